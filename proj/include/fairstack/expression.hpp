#pragma once

#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "fairstack/linalg.hpp"

namespace fairstack {

// Arithmetic over policy coordinates w1..wd:
//   expr := term (('+'|'-') term)*
//   term := unary ('*' unary)*
//   unary := '-' unary | primary
//   primary := number | 'w'<index> | abs(expr) | sqrt(expr) | pow(expr, expr) | '(' expr ')'
class Expression {
public:
    static Expression parse(const std::string& text) {
        Parser p{text, 0, {}};
        Expression e;
        e.root_ = p.expr();
        p.skip();
        if (p.pos != text.size()) p.fail("unexpected trailing input");
        e.text_ = text;
        e.nodes_ = std::move(p.nodes);
        return e;
    }

    double operator()(const Vec& w) const { return eval(root_, w); }

    // Largest 1-based coordinate index referenced; 0 if none.
    int max_index() const {
        int m = 0;
        for (const Node& n : nodes_)
            if (n.op == Op::Var) m = std::max(m, n.index + 1);
        return m;
    }

    const std::string& text() const { return text_; }
    bool empty() const { return nodes_.empty(); }

private:
    enum class Op { Num, Var, Add, Sub, Mul, Neg, Abs, Sqrt, Pow };
    struct Node {
        Op op;
        double value = 0.0;
        int index = 0;
        int a = -1, b = -1;
    };

    struct Parser {
        const std::string& s;
        std::size_t pos;
        std::vector<Node> nodes;

        [[noreturn]] void fail(const std::string& why) const {
            throw Error(ErrorKind::Input, "expression '" + s + "' at offset " + std::to_string(pos) + ": " + why);
        }
        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool accept(char c) {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        void expect(char c) {
            if (!accept(c)) fail(std::string("expected '") + c + "'");
        }
        int add(Node n) {
            nodes.push_back(n);
            return static_cast<int>(nodes.size()) - 1;
        }
        int expr() {
            int lhs = term();
            for (;;) {
                if (accept('+')) lhs = add({Op::Add, 0, 0, lhs, term()});
                else if (accept('-')) lhs = add({Op::Sub, 0, 0, lhs, term()});
                else return lhs;
            }
        }
        int term() {
            int lhs = unary();
            while (accept('*')) lhs = add({Op::Mul, 0, 0, lhs, unary()});
            return lhs;
        }
        int unary() {
            if (accept('-')) return add({Op::Neg, 0, 0, unary(), -1});
            return primary();
        }
        std::string ident() {
            std::size_t start = pos;
            while (pos < s.size() && std::isalpha(static_cast<unsigned char>(s[pos]))) ++pos;
            return s.substr(start, pos - start);
        }
        int primary() {
            skip();
            if (pos >= s.size()) fail("unexpected end of input");
            char c = s[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(s.substr(pos), &used);
                } catch (const std::exception&) {
                    fail("bad number");
                }
                pos += used;
                return add({Op::Num, v, 0, -1, -1});
            }
            if (accept('(')) {
                int e = expr();
                expect(')');
                return e;
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                std::size_t at = pos;
                std::string id = ident();
                if (id == "w") {
                    std::size_t start = pos;
                    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
                    if (start == pos) fail("coordinate index expected after 'w'");
                    int k = std::stoi(s.substr(start, pos - start));
                    if (k < 1) fail("coordinates are numbered from 1");
                    return add({Op::Var, 0, k - 1, -1, -1});
                }
                Op op;
                if (id == "abs") op = Op::Abs;
                else if (id == "sqrt") op = Op::Sqrt;
                else if (id == "pow") op = Op::Pow;
                else {
                    pos = at;
                    fail("unknown identifier '" + id + "'");
                }
                expect('(');
                int a = expr();
                int b = -1;
                if (op == Op::Pow) {
                    expect(',');
                    b = expr();
                }
                expect(')');
                return add({op, 0, 0, a, b});
            }
            fail(std::string("unexpected character '") + c + "'");
        }
    };

    double eval(int i, const Vec& w) const {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        switch (n.op) {
            case Op::Num: return n.value;
            case Op::Var:
                if (n.index >= w.size()) throw Error(ErrorKind::Input, "expression references w" + std::to_string(n.index + 1) + " beyond dimension");
                return w[n.index];
            case Op::Add: return eval(n.a, w) + eval(n.b, w);
            case Op::Sub: return eval(n.a, w) - eval(n.b, w);
            case Op::Mul: return eval(n.a, w) * eval(n.b, w);
            case Op::Neg: return -eval(n.a, w);
            case Op::Abs: return std::abs(eval(n.a, w));
            case Op::Sqrt: return std::sqrt(eval(n.a, w));
            case Op::Pow: return std::pow(eval(n.a, w), eval(n.b, w));
        }
        return 0.0;
    }

    std::string text_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace fairstack
