#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fairstack/agents.hpp"
#include "fairstack/solvers.hpp"

namespace fairstack {

// ---- formatting ----

inline std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
    return buf;
}

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

// ---- ingestion ----

enum class Encoding { Numeric, Threshold, Codes };

// Threshold: 1 when value <= threshold (or in `positive` for string cells), else 0.
struct ColumnEncoding {
    std::string column;
    Encoding encoding = Encoding::Numeric;
    double threshold = 0.0;
    std::set<std::string> positive;
    std::map<std::string, double> codes;
};

struct DatasetSchema {
    std::vector<ColumnEncoding> features;
    std::optional<ColumnEncoding> label;
    std::vector<std::string> keep;  // raw columns retained for split rules
    bool standardize = false;
};

struct TabularDataset {
    std::vector<std::string> columns;  // encoded feature names
    Mat values;                        // rows x features
    std::optional<Vec> label;
    std::map<std::string, std::vector<std::string>> raw;  // raw cells of kept columns

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index dim() const { return values.cols(); }
};

inline double encode_cell(const ColumnEncoding& enc, const std::string& cell, std::size_t row) {
    auto fail = [&](const std::string& why) {
        return Error(ErrorKind::Ingestion,
                     "row " + std::to_string(row) + ", column '" + enc.column + "': " + why + " ('" + cell + "')");
    };
    if (cell.empty() || cell == "?" || cell == "NA") throw fail("missing value");
    double v = 0.0;
    switch (enc.encoding) {
        case Encoding::Numeric:
            if (!parse_double(cell, v)) throw fail("unparseable cell");
            return v;
        case Encoding::Threshold:
            if (!enc.positive.empty()) return enc.positive.count(cell) ? 1.0 : 0.0;
            if (!parse_double(cell, v)) throw fail("unparseable cell");
            return v <= enc.threshold ? 1.0 : 0.0;
        case Encoding::Codes: {
            auto it = enc.codes.find(cell);
            if (it == enc.codes.end()) throw fail("no code for value");
            return it->second;
        }
    }
    return v;
}

inline TabularDataset ingest_dataset(std::istream& in, const DatasetSchema& schema, const std::string& source = "input") {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Ingestion, source + ": empty file, header expected");
    std::vector<std::string> header = split_csv_line(line);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
    auto column = [&](const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw Error(ErrorKind::Ingestion, source + ": unknown column '" + name + "'");
        return it->second;
    };
    if (schema.features.empty()) throw Error(ErrorKind::Ingestion, source + ": schema declares no features");
    std::vector<std::size_t> fcols;
    for (const auto& f : schema.features) fcols.push_back(column(f.column));
    std::optional<std::size_t> lcol;
    if (schema.label) lcol = column(schema.label->column);
    std::vector<std::size_t> kcols;
    for (const auto& k : schema.keep) kcols.push_back(column(k));

    TabularDataset ds;
    for (const auto& f : schema.features) ds.columns.push_back(f.column);
    std::vector<std::vector<double>> rows;
    std::vector<double> labels;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw Error(ErrorKind::Ingestion, source + ": row " + std::to_string(row) + " has " +
                                                  std::to_string(cells.size()) + " cells, header has " +
                                                  std::to_string(header.size()));
        std::vector<double> r;
        for (std::size_t j = 0; j < fcols.size(); ++j) r.push_back(encode_cell(schema.features[j], cells[fcols[j]], row));
        rows.push_back(std::move(r));
        if (lcol) labels.push_back(encode_cell(*schema.label, cells[*lcol], row));
        for (std::size_t j = 0; j < kcols.size(); ++j) ds.raw[schema.keep[j]].push_back(cells[kcols[j]]);
    }
    if (rows.empty()) throw Error(ErrorKind::Ingestion, source + ": no data rows");
    ds.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(fcols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < fcols.size(); ++j)
            ds.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    if (lcol) ds.label = Eigen::Map<Vec>(labels.data(), static_cast<Eigen::Index>(labels.size()));
    if (schema.standardize) {
        for (Eigen::Index j = 0; j < ds.values.cols(); ++j) {
            double mean = ds.values.col(j).mean();
            double sd = std::sqrt((ds.values.col(j).array() - mean).square().mean());
            ds.values.col(j).array() -= mean;
            if (sd > 0.0) ds.values.col(j) /= sd;
        }
    }
    return ds;
}

inline TabularDataset ingest_dataset(const std::filesystem::path& path, const DatasetSchema& schema) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open dataset '" + path.string() + "'");
    return ingest_dataset(in, schema, path.string());
}

// ---- splitting ----

enum class SplitOp { Le, Lt, Ge, Gt, In };

struct SplitRule {
    std::string column;
    SplitOp op = SplitOp::Le;
    double value = 0.0;
    std::set<std::string> values;
};

struct GroupSplit {
    Mat group1;  // rows satisfying the rule
    Mat group2;
    std::vector<Eigen::Index> rows1;
    std::vector<Eigen::Index> rows2;
};

inline bool split_member(const SplitRule& rule, const std::string& cell, std::size_t row) {
    if (rule.op == SplitOp::In) return rule.values.count(cell) > 0;
    double v = 0.0;
    if (!parse_double(cell, v))
        throw Error(ErrorKind::Split, "row " + std::to_string(row) + ", column '" + rule.column + "': not numeric");
    switch (rule.op) {
        case SplitOp::Le: return v <= rule.value;
        case SplitOp::Lt: return v < rule.value;
        case SplitOp::Ge: return v >= rule.value;
        case SplitOp::Gt: return v > rule.value;
        default: return false;
    }
}

inline GroupSplit split_groups(const TabularDataset& ds, const SplitRule& rule) {
    std::vector<std::string> cells;
    auto raw = ds.raw.find(rule.column);
    if (raw != ds.raw.end()) {
        cells = raw->second;
    } else {
        auto it = std::find(ds.columns.begin(), ds.columns.end(), rule.column);
        if (it == ds.columns.end()) throw Error(ErrorKind::Split, "unknown split column '" + rule.column + "'");
        auto j = static_cast<Eigen::Index>(it - ds.columns.begin());
        for (Eigen::Index i = 0; i < ds.rows(); ++i) cells.push_back(fmt17(ds.values(i, j)));
    }
    GroupSplit g;
    for (Eigen::Index i = 0; i < ds.rows(); ++i)
        (split_member(rule, cells[static_cast<std::size_t>(i)], static_cast<std::size_t>(i) + 2) ? g.rows1 : g.rows2)
            .push_back(i);
    if (g.rows1.empty() || g.rows2.empty())
        throw Error(ErrorKind::Split, "split on '" + rule.column + "' leaves group " + (g.rows1.empty() ? "1" : "2") +
                                          " empty");
    g.group1 = ds.values(g.rows1, Eigen::all);
    g.group2 = ds.values(g.rows2, Eigen::all);
    return g;
}

// ---- ground truth ----

inline constexpr int kLogisticEpochs = 500;
inline constexpr double kLogisticStep = 0.1;

// Full-batch gradient descent on the mean logistic loss with an intercept.
inline Vec fit_ground_truth(const Mat& x, const Vec& y) {
    if (x.rows() != y.size() || x.rows() == 0) throw Error(ErrorKind::Fit, "feature and label counts differ");
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y(i) != 0.0 && y(i) != 1.0) throw Error(ErrorKind::Fit, "labels must be 0/1");
    if (y.minCoeff() == y.maxCoeff()) throw Error(ErrorKind::Fit, "all labels identical");
    const double n = static_cast<double>(x.rows());
    Vec w = Vec::Zero(x.cols());
    double b = 0.0;
    for (int epoch = 0; epoch < kLogisticEpochs; ++epoch) {
        Vec z = (x * w).array() + b;
        Vec p = z.unaryExpr([](double t) { return 1.0 / (1.0 + std::exp(-t)); });
        Vec r = p - y;
        w -= kLogisticStep * (x.transpose() * r) / n;
        b -= kLogisticStep * r.sum() / n;
    }
    if (!w.allFinite()) throw Error(ErrorKind::Fit, "logistic fit diverged");
    return clip_to_ball(w);
}

inline Vec fit_ground_truth(const TabularDataset& ds) {
    if (!ds.label) throw Error(ErrorKind::Fit, "dataset has no label column");
    return fit_ground_truth(ds.values, *ds.label);
}

// ---- sweeps ----

struct SweepPoint {
    double beta = 0.0;
    double objective_value = std::numeric_limits<double>::quiet_NaN();
    double delta_at_opt = std::numeric_limits<double>::quiet_NaN();
    Vec policy;
    SolverDiagnostics diagnostics;
    std::string error;
};

struct SweepMetadata {
    std::string split;
    std::string cost_case;
    FairnessKind kind = FairnessKind::L1;
    Objective objective = Objective::Acc;
    std::uint64_t seed = 0;
};

struct SweepResult {
    std::vector<double> grid;
    std::vector<SweepPoint> points;
    double unconstrained_value = 0.0;
    double unconstrained_delta = 0.0;
    SweepMetadata meta;

    bool monotone(double slack = 1e-9) const {
        for (std::size_t i = 1; i < points.size(); ++i)
            if (points[i].objective_value < points[i - 1].objective_value - slack) return false;
        return true;
    }
};

inline std::vector<double> linear_grid(double lo, double hi, int n) {
    if (n < 1) throw Error(ErrorKind::Input, "grid needs at least one point");
    std::vector<double> g;
    for (int i = 0; i < n; ++i) g.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
    return g;
}

inline std::vector<double> geometric_grid(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi >= lo)) throw Error(ErrorKind::Input, "geometric grid needs 0 < lo <= hi");
    if (n < 1) throw Error(ErrorKind::Input, "grid needs at least one point");
    std::vector<double> g;
    for (int i = 0; i < n; ++i) g.push_back(n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
    return g;
}

// "lo:hi:n" followed by "lin" or "geo", e.g. "0:1:11lin".
inline std::vector<double> parse_beta_grid(const std::string& text) {
    auto a = text.find(':');
    auto b = a == std::string::npos ? a : text.find(':', a + 1);
    if (b == std::string::npos) throw Error(ErrorKind::Input, "beta grid must look like lo:hi:n{lin|geo}");
    std::string tail = text.substr(b + 1);
    std::string mode = tail.size() >= 3 ? tail.substr(tail.size() - 3) : "";
    if (mode != "lin" && mode != "geo") throw Error(ErrorKind::Input, "beta grid mode must be lin or geo");
    double lo = 0.0, hi = 0.0, n = 0.0;
    if (!parse_double(text.substr(0, a), lo) || !parse_double(text.substr(a + 1, b - a - 1), hi) ||
        !parse_double(tail.substr(0, tail.size() - 3), n) || n < 1 || n != std::floor(n))
        throw Error(ErrorKind::Input, "beta grid must look like lo:hi:n{lin|geo}");
    if (hi < lo) throw Error(ErrorKind::Input, "beta grid needs lo <= hi");
    return mode == "lin" ? linear_grid(lo, hi, static_cast<int>(n)) : geometric_grid(lo, hi, static_cast<int>(n));
}

inline std::vector<double> default_beta_grid(double delta_unconstrained) {
    return geometric_grid(1e-3, std::max(2.0 * delta_unconstrained, 2e-3), 25);
}

inline EquilibriumResult solve_for_sweep(Objective obj, const FairProblem& pb) {
    if (is_convex_kind(pb.spec.kind)) return solve_constrained(obj, pb);
    ClassFReport cf = check_class_F(pb.spec, pb.dm);
    if (!cf.member) throw Error(ErrorKind::Contract, "class F membership not verified: " + cf.reason);
    return solve_nonconvex_restricted(obj, pb, cf);
}

inline SweepResult beta_sweep(const FairProblem& base, const std::vector<double>& grid, Objective obj,
                              SweepMetadata meta = {}, unsigned threads = 0) {
    if (!std::is_sorted(grid.begin(), grid.end())) throw Error(ErrorKind::Input, "beta grid must be sorted ascending");
    for (double b : grid)
        if (!(b >= 0.0)) throw Error(ErrorKind::Input, "beta grid values must be nonnegative");
    SweepResult res;
    res.grid = grid;
    meta.kind = base.spec.kind;
    meta.objective = obj;
    res.meta = meta;
    EquilibriumResult un = solve_unconstrained(obj, base.w_star, base.coeff);
    res.unconstrained_value = un.objective_value;
    res.unconstrained_delta = base.delta(un.policy.weights);
    res.points.resize(grid.size());

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < grid.size(); i = next++) {
            SweepPoint& p = res.points[i];
            p.beta = grid[i];
            try {
                FairProblem pb = base;
                pb.spec.beta = grid[i];
                EquilibriumResult r = solve_for_sweep(obj, pb);
                p.objective_value = r.objective_value;
                p.delta_at_opt = r.delta_value;
                p.policy = r.policy.weights;
                p.diagnostics = r.diagnostics;
            } catch (const std::exception& e) {
                p.diagnostics.converged = false;
                p.error = e.what();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(grid.size(), 1)));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return res;
}

inline SweepResult beta_sweep(const Scenario& s, const FairnessSpec& spec, const std::vector<double>& grid, Objective obj,
                              SweepMetadata meta = {}, unsigned threads = 0) {
    return beta_sweep(FairProblem::from(s, spec), grid, obj, std::move(meta), threads);
}

// ---- emission ----

inline std::filesystem::path policies_path(const std::filesystem::path& csv) {
    std::filesystem::path p = csv;
    p.replace_filename(csv.stem().string() + "_policies" + csv.extension().string());
    return p;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

inline std::string sweep_csv(const SweepResult& res) {
    std::ostringstream os;
    os << "beta,objective_value,delta_at_opt,unconstrained_value,converged\n";
    for (const SweepPoint& p : res.points)
        os << fmt17(p.beta) << ',' << fmt17(p.objective_value) << ',' << fmt17(p.delta_at_opt) << ','
           << fmt17(res.unconstrained_value) << ',' << (p.diagnostics.converged ? 1 : 0) << '\n';
    return os.str();
}

inline std::string sweep_policies_csv(const SweepResult& res) {
    Eigen::Index d = 0;
    for (const SweepPoint& p : res.points) d = std::max(d, p.policy.size());
    std::ostringstream os;
    os << "beta";
    for (Eigen::Index j = 0; j < d; ++j) os << ",w" << j + 1;
    os << '\n';
    for (const SweepPoint& p : res.points) {
        os << fmt17(p.beta);
        for (Eigen::Index j = 0; j < d; ++j) os << ',' << (j < p.policy.size() ? fmt17(p.policy(j)) : "nan");
        os << '\n';
    }
    return os.str();
}

inline void emit_csv(const SweepResult& res, const std::filesystem::path& path) {
    write_text_file(path, sweep_csv(res));
    write_text_file(policies_path(path), sweep_policies_csv(res));
}

struct SweepCsvRow {
    double beta = 0.0;
    double objective_value = 0.0;
    double delta_at_opt = 0.0;
    double unconstrained_value = 0.0;
    bool converged = false;
};

inline std::vector<SweepCsvRow> read_sweep_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    if (trim(line) != "beta,objective_value,delta_at_opt,unconstrained_value,converged")
        throw Error(ErrorKind::Ingestion, path.string() + ": unexpected header");
    std::vector<SweepCsvRow> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto c = split_csv_line(line);
        if (c.size() != 5) throw Error(ErrorKind::Ingestion, path.string() + ": malformed row");
        auto num = [](const std::string& s) { return s == "nan" ? std::nan("") : std::strtod(s.c_str(), nullptr); };
        rows.push_back({num(c[0]), num(c[1]), num(c[2]), num(c[3]), c[4] == "1"});
    }
    return rows;
}

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        if (ch == '<') out += "&lt;";
        else if (ch == '>') out += "&gt;";
        else if (ch == '&') out += "&amp;";
        else out += ch;
    }
    return out;
}

inline std::string sweep_svg(const std::vector<SweepResult>& results, const std::string& title = "") {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
    const double width = 640, height = 420, left = 70, right = 170, top = 40, bottom = 50;
    const double pw = width - left - right, ph = height - top - bottom;
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
    for (const SweepResult& r : results) {
        for (const SweepPoint& p : r.points) {
            if (!std::isfinite(p.objective_value)) continue;
            xlo = std::min(xlo, p.beta);
            xhi = std::max(xhi, p.beta);
            ylo = std::min(ylo, p.objective_value);
            yhi = std::max(yhi, p.objective_value);
        }
        ylo = std::min(ylo, r.unconstrained_value);
        yhi = std::max(yhi, r.unconstrained_value);
    }
    if (!std::isfinite(xlo)) xlo = 0.0, xhi = 1.0;
    if (!std::isfinite(ylo)) ylo = 0.0, yhi = 1.0;
    if (xhi - xlo <= 0.0) xhi = xlo + 1.0;
    if (yhi - ylo <= 0.0) ylo -= 0.5, yhi += 0.5;
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;
    auto sx = [&](double x) { return left + (x - xlo) / (xhi - xlo) * pw; };
    auto sy = [&](double y) { return top + (yhi - y) / (yhi - ylo) * ph; };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    auto label = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return std::string(buf);
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    if (!title.empty())
        os << "<text x=\"" << num(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
           << svg_escape(title) << "</text>\n";
    os << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
    os << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(left + pw) << "\" y2=\""
       << num(top + ph) << "\"/>\n";
    os << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\"" << num(top + ph)
       << "\"/>\n</g>\n";
    for (int i = 0; i <= 4; ++i) {
        double xv = xlo + (xhi - xlo) * i / 4.0, yv = ylo + (yhi - ylo) * i / 4.0;
        os << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(top + ph + 16) << "\" text-anchor=\"middle\">" << label(xv)
           << "</text>\n";
        os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(sy(yv) + 4) << "\" text-anchor=\"end\">" << label(yv)
           << "</text>\n";
    }
    os << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(height - 10) << "\" text-anchor=\"middle\">beta</text>\n";
    os << "<text x=\"16\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << num(top + ph / 2) << ")\">objective value</text>\n";

    std::vector<double> refs;
    for (const SweepResult& r : results) {
        bool seen = false;
        for (double v : refs) seen = seen || std::abs(v - r.unconstrained_value) <= 1e-12;
        if (!seen) refs.push_back(r.unconstrained_value);
    }
    for (double v : refs)
        os << "<line class=\"reference\" x1=\"" << num(left) << "\" y1=\"" << num(sy(v)) << "\" x2=\"" << num(left + pw)
           << "\" y2=\"" << num(sy(v)) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";

    for (std::size_t k = 0; k < results.size(); ++k) {
        const char* color = palette[k % (sizeof palette / sizeof *palette)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (const SweepPoint& p : results[k].points) {
            if (!std::isfinite(p.objective_value)) continue;
            os << (first ? "" : " ") << num(sx(p.beta)) << ',' << num(sy(p.objective_value));
            first = false;
        }
        os << "\"/>\n";
        std::string name = results[k].meta.split.empty() ? "series " + std::to_string(k + 1) : results[k].meta.split;
        double ly = top + 14.0 * static_cast<double>(k) + 6;
        os << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + pw + 32)
           << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
        os << "<text x=\"" << num(left + pw + 36) << "\" y=\"" << num(ly + 4) << "\">" << svg_escape(name) << "</text>\n";
    }
    double ly = top + 14.0 * static_cast<double>(results.size()) + 6;
    os << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + pw + 32) << "\" y2=\""
       << num(ly) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
    os << "<text x=\"" << num(left + pw + 36) << "\" y=\"" << num(ly + 4) << "\">unconstrained</text>\n";
    os << "</svg>\n";
    return os.str();
}

inline void emit_plot(const std::vector<SweepResult>& results, const std::filesystem::path& path,
                      const std::string& title = "") {
    write_text_file(path, sweep_svg(results, title));
}

// ---- synthetic scenarios ----

enum class CostCase { Uniform, Scaled, Random };

inline const char* to_string(CostCase c) {
    switch (c) {
        case CostCase::Uniform: return "uniform";
        case CostCase::Scaled: return "scaled";
        case CostCase::Random: return "random";
    }
    return "?";
}

inline CostCase parse_cost_case(const std::string& s) {
    if (s == "uniform") return CostCase::Uniform;
    if (s == "scaled") return CostCase::Scaled;
    if (s == "random") return CostCase::Random;
    throw Error(ErrorKind::Input, "unknown cost case '" + s + "' (uniform|scaled|random)");
}

// B B^T / d + I / 2 with B standard normal.
inline Mat random_pd(Eigen::Index d, Stream& st) {
    Mat b = st.normal_mat(d, d);
    return symmetrize(Mat(b * b.transpose() / static_cast<double>(d) + 0.5 * Mat::Identity(d, d)));
}

inline std::array<Mat, 2> cost_pair(CostCase c, Eigen::Index d, std::uint64_t seed) {
    Mat id = Mat::Identity(d, d);
    switch (c) {
        case CostCase::Uniform: return {id, id};
        case CostCase::Scaled: return {id, Mat(2.0 * id)};
        case CostCase::Random: {
            Stream st(seed, 0xC057);
            Mat a1 = random_pd(d, st);
            Mat a2 = random_pd(d, st);
            return {a1, a2};
        }
    }
    return {id, id};
}

struct SynthOptions {
    Eigen::Index d = 8;
    Eigen::Index n_per_group = 200;
    std::uint64_t seed = 0;
    CostCase cost_case = CostCase::Uniform;
    double edge_probability = 0.3;
    double max_edge_weight = 1.0;
    std::array<Eigen::Index, 2> rank{5, 5};
    std::array<std::vector<Eigen::Index>, 2> support;  // coordinate supports; empty means random subspace
    Vec desirability;                                   // empty means all ones
    Vec ground_truth;                                   // empty means random in B(1)
};

struct SynthOutput {
    Scenario scenario;
    CausalGraph graph;
    std::array<Mat, 2> samples;
};

inline SynthOutput synth_generate(const SynthOptions& o) {
    if (o.d < 1 || o.d > static_cast<Eigen::Index>(kMaxGraphNodes))
        throw Error(ErrorKind::Capacity, "synthetic dimension must be in [1, 24]");
    if (o.n_per_group < 1) throw Error(ErrorKind::Input, "n_per_group must be positive");
    SynthOutput out;
    Stream graph_rng(o.seed, 1);
    out.graph.node_count = static_cast<std::size_t>(o.d);
    std::vector<std::size_t> perm(out.graph.node_count);
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[graph_rng.below(i)]);
    for (std::size_t a = 0; a < perm.size(); ++a)
        for (std::size_t b = a + 1; b < perm.size(); ++b)
            if (graph_rng.uniform() < o.edge_probability)
                out.graph.edges.push_back({perm[a], perm[b], graph_rng.uniform(0.0, o.max_edge_weight)});

    Scenario& s = out.scenario;
    s.contribution = build_contribution_matrix(out.graph);
    auto costs = cost_pair(o.cost_case, o.d, o.seed);
    for (int g = 0; g < 2; ++g) {
        Stream st(o.seed, 10 + static_cast<std::uint64_t>(g));
        Mat basis;
        if (!o.support[static_cast<std::size_t>(g)].empty()) {
            const auto& sup = o.support[static_cast<std::size_t>(g)];
            basis = Mat::Zero(o.d, static_cast<Eigen::Index>(sup.size()));
            for (std::size_t j = 0; j < sup.size(); ++j) {
                if (sup[j] < 0 || sup[j] >= o.d) throw Error(ErrorKind::Input, "support index out of range");
                basis(sup[j], static_cast<Eigen::Index>(j)) = 1.0;
            }
        } else {
            Eigen::Index k = std::clamp<Eigen::Index>(o.rank[static_cast<std::size_t>(g)], 1, o.d);
            basis = st.orthogonal(o.d).leftCols(k);
        }
        GroupParams& gp = s.groups[static_cast<std::size_t>(g)];
        gp.cost = costs[static_cast<std::size_t>(g)];
        gp.sampler.mean = Vec::Zero(o.d);
        gp.sampler.factor = basis;
        out.samples[static_cast<std::size_t>(g)] = sample_features(gp.sampler, o.n_per_group, derive_seed(o.seed, 20 + g));
        gp.projector = projector_from_samples(out.samples[static_cast<std::size_t>(g)], basis.cols()).projector;
    }
    s.desirability = o.desirability.size() ? o.desirability : Vec(Vec::Ones(o.d));
    if (o.ground_truth.size()) {
        s.ground_truth = o.ground_truth;
    } else {
        Stream st(o.seed, 2);
        s.ground_truth = st.in_ball(o.d, 1.0);
    }
    return out;
}

inline Vec desirability_vector(Eigen::Index d, const std::vector<Eigen::Index>& desirable, double epsilon = 1e-6) {
    Vec v = Vec::Constant(d, epsilon);
    for (Eigen::Index i : desirable) {
        if (i < 0 || i >= d) throw Error(ErrorKind::Input, "desirable index out of range");
        v(i) = 1.0;
    }
    return v;
}

}  // namespace fairstack
