#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "fairstack/fairness.hpp"
#include "fairstack/objectives.hpp"
#include "fairstack/projection.hpp"

namespace fairstack {

enum class Geometry {
    BallOnly,
    PolyBall,
    Ellipsoid,
    EllipsoidBall,
    NonconvexRestricted,
    NonconvexEnvelope,
    NonconvexMultistart
};

inline const char* to_string(Geometry g) {
    switch (g) {
        case Geometry::BallOnly: return "ball";
        case Geometry::PolyBall: return "polyhedron+ball";
        case Geometry::Ellipsoid: return "ellipsoid";
        case Geometry::EllipsoidBall: return "ellipsoid+ball";
        case Geometry::NonconvexRestricted: return "nonconvex-restricted";
        case Geometry::NonconvexEnvelope: return "nonconvex-envelope";
        case Geometry::NonconvexMultistart: return "nonconvex-multistart";
    }
    return "?";
}

struct SolverDiagnostics {
    std::string method;
    int iterations = 0;
    bool converged = true;
    bool degenerate = false;  // SW with zero coefficient
    bool heuristic = false;   // multistart lower bound
};

struct EquilibriumResult {
    Policy policy;
    Objective objective = Objective::Acc;
    double objective_value = 0.0;
    double delta_value = std::numeric_limits<double>::quiet_NaN();
    double beta = std::numeric_limits<double>::infinity();
    Geometry geometry = Geometry::BallOnly;
    SolverDiagnostics diagnostics;
};

// Scenario-derived data shared by every solve of one (scenario, spec) pair.
struct FairProblem {
    FairnessSpec spec;
    DiscrepancyMatrix dm;
    Vec w_star;
    SwCoefficient coeff;

    static FairProblem from(const Scenario& s, const FairnessSpec& spec) {
        require_valid(s);
        if (!(spec.beta >= 0.0)) throw Error(ErrorKind::Input, "beta must be nonnegative");
        return FairProblem{spec, discrepancy_matrix(s), s.ground_truth, sw_coefficient(s)};
    }

    double delta(const Vec& w) const { return fairstack::delta(spec, dm, w); }
    Eigen::Index dim() const { return w_star.size(); }
};

inline double objective_value(Objective obj, const Vec& w, const Vec& w_star, const SwCoefficient& c) {
    return obj == Objective::Acc ? accuracy_value(w, w_star) : sw_value(w, c);
}

inline EquilibriumResult solve_unconstrained(Objective obj, const Vec& w_star, const SwCoefficient& coeff) {
    EquilibriumResult r;
    r.objective = obj;
    r.geometry = Geometry::BallOnly;
    r.diagnostics.method = "closed-form";
    if (obj == Objective::Acc) {
        double n = w_star.norm();
        r.policy = make_policy(clip_to_ball(w_star));
        double excess = std::max(0.0, n - 1.0);
        r.objective_value = -excess * excess;
    } else {
        double n = compensated_norm(coeff.vector);
        if (n == 0.0) {
            r.policy = make_policy(Vec::Zero(coeff.vector.size()));
            r.objective_value = 0.0;
            r.diagnostics.degenerate = true;
        } else {
            r.policy = make_policy(coeff.vector / n);
            r.objective_value = n;
        }
    }
    return r;
}

// Convex fair set W, optionally intersected with the unit ball.
struct FairRegion {
    enum class Kind { Whole, Ellipsoid, Polyhedron };
    Kind kind = Kind::Whole;
    Mat q;
    double level = 0.0;
    Mat rows;
    Vec rhs;
    Mat m;  // polyhedron generator: W = {|m w|_1 <= level}
    bool ball = true;

    static FairRegion ellipsoid(const Mat& q, double level, bool ball) {
        FairRegion r;
        r.kind = Kind::Ellipsoid;
        r.q = q;
        r.level = level;
        r.ball = ball;
        return r;
    }
    static FairRegion l1(const Mat& m, double level) {
        FairRegion r;
        r.kind = Kind::Polyhedron;
        Polyhedron p = polyhedron_rows(m, level);
        r.rows = p.rows;
        r.rhs = p.rhs;
        r.m = m;
        r.level = level;
        return r;
    }

    bool in_fair_set(const Vec& w, double slack = tol::fair) const {
        switch (kind) {
            case Kind::Whole: return true;
            case Kind::Ellipsoid: return w.dot(q * w) <= level + slack;
            case Kind::Polyhedron: return (m * w).lpNorm<1>() <= level + slack;
        }
        return true;
    }

    Vec project_fair(const Vec& v) const {
        switch (kind) {
            case Kind::Whole: return v;
            case Kind::Ellipsoid: return project_onto_ellipsoid(v, q, level);
            case Kind::Polyhedron: return project_onto_polyhedron(v, rows, rhs);
        }
        return v;
    }

    // argmax c^T w over W alone when it exists in closed form.
    std::optional<Vec> maximize_fair(const Vec& c) const {
        if (kind == Kind::Ellipsoid && lambda_min(q) > tol::pd) {
            if (level == 0.0) return Vec(Vec::Zero(c.size()));
            Vec y = solve_pd(q, c);
            return Vec(std::sqrt(level) * y / norm_q_inv(c, q));
        }
        if (kind == Kind::Ellipsoid) {
            // singular Q: bounded along c only when c lies in range(Q)
            Mat qp = pinv(q);
            Vec y = qp * c;
            if ((q * y - c).norm() > 1e-10 * c.norm()) return std::nullopt;
            double n2 = c.dot(y);
            if (level == 0.0 || !(n2 > 0.0)) return Vec(Vec::Zero(c.size()));
            return Vec(std::sqrt(level / n2) * y);
        }
        if (kind == Kind::Polyhedron && m.rows() == m.cols() && sigma_min(m) > tol::invertible) {
            Vec g = m.transpose().fullPivLu().solve(c);
            Eigen::Index i = 0;
            g.cwiseAbs().maxCoeff(&i);
            Vec y = Vec::Zero(c.size());
            y(i) = g(i) >= 0.0 ? level : -level;
            return Vec(m.fullPivLu().solve(y));
        }
        return std::nullopt;
    }
};

// Projection onto W ∩ B(1). Since 0 ∈ W, the answer is P_W(s v) with s in (0,1]
// chosen so that the projection lands on the unit sphere.
inline Vec project_onto_region(const FairRegion& reg, const Vec& v, SolverDiagnostics& diag) {
    Vec clipped = reg.ball ? clip_to_ball(v) : v;
    if (reg.in_fair_set(clipped)) {
        diag.method = "feasible-input";
        return clipped;
    }
    Vec p = reg.project_fair(v);
    if (!reg.ball || p.norm() <= 1.0) {
        diag.method = "fair-set-projection";
        diag.iterations = 1;
        return p;
    }
    diag.method = "scaled-projection";
    double lo = 0.0, hi = 1.0;
    Vec best = Vec::Zero(v.size());
    int it = 0;
    for (; it < 200 && hi - lo > 1e-16 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        Vec pm = reg.project_fair(mid * v);
        if (pm.norm() <= 1.0) {
            lo = mid;
            best = pm;
        } else {
            hi = mid;
        }
    }
    diag.iterations = it;
    return best;
}

// argmax c^T w over W ∩ B(1): the point P_W(t c) on the unit sphere, or the
// unrestricted maximizer over W when that already lies in the ball.
inline Vec maximize_linear_over_region(const FairRegion& reg, const Vec& c, SolverDiagnostics& diag) {
    const double cn = c.norm();
    if (cn == 0.0) {
        diag.degenerate = true;
        diag.method = "degenerate";
        return Vec::Zero(c.size());
    }
    Vec u = c / cn;
    if (reg.in_fair_set(u)) {
        diag.method = "unconstrained-feasible";
        return u;
    }
    if (auto wf = reg.maximize_fair(c); wf && (!reg.ball || wf->norm() <= 1.0)) {
        diag.method = "fair-set-closed-form";
        return *wf;
    }
    if (!reg.ball) throw Error(ErrorKind::Numeric, "linear objective unbounded over the fair set");
    if (reg.kind == FairRegion::Kind::Polyhedron) {
        // c orthogonal to ker M: solve in range(M^T) coordinates where the polytope is bounded
        Eigen::JacobiSVD<Mat> svd(reg.m, Eigen::ComputeFullV);
        const Vec& sv = svd.singularValues();
        Eigen::Index r = 0;
        while (r < sv.size() && sv(r) > tol::pinv_rel * std::max(1.0, sv(0))) ++r;
        if (r < c.size()) {
            Mat vr = svd.matrixV().leftCols(r);
            Mat vk = svd.matrixV().rightCols(c.size() - r);
            if ((vk.transpose() * u).norm() <= tol::pinv_rel) {
                if (r == 0) {
                    diag.method = "kernel-orthogonal";
                    return Vec::Zero(c.size());
                }
                FairRegion sub = FairRegion::l1(Mat(reg.m * vr), reg.level);
                Vec z = maximize_linear_over_region(sub, Vec(vr.transpose() * c), diag);
                return vr * z;
            }
        }
    }
    diag.method = "scaled-projection-ascent";
    double lo = 0.0, hi = 1.0;
    Vec best = Vec::Zero(c.size());
    int it = 0;
    for (; it < 64; ++it) {
        Vec p = reg.project_fair(hi * u);
        if (p.norm() >= 1.0) break;
        // W is bounded along c: P_W(t u) settles on the maximizing face before reaching the sphere
        if (it > 0 && (p - best).norm() <= 1e-12 * (1.0 + hi)) {
            diag.method = "scaled-projection-plateau";
            diag.iterations = it + 1;
            return p;
        }
        best = p;
        lo = hi;
        hi *= 2.0;
    }
    if (it == 64) {
        diag.converged = false;
        diag.iterations = it;
        return best;
    }
    for (; it < 400 && hi - lo > 1e-15 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        Vec pm = reg.project_fair(mid * u);
        if (pm.norm() <= 1.0) {
            lo = mid;
            best = pm;
        } else {
            hi = mid;
        }
    }
    diag.iterations = it;
    if (!reg.in_fair_set(best, 0.0)) best = clip_to_ball(reg.project_fair(best));
    if (!reg.in_fair_set(best, 1e-9)) diag.converged = false;
    return best;
}

inline EquilibriumResult finish(EquilibriumResult r, const Vec& w, const FairProblem& pb) {
    r.policy = make_policy(w);
    r.objective_value = objective_value(r.objective, w, pb.w_star, pb.coeff);
    r.delta_value = pb.delta(w);
    return r;
}

inline EquilibriumResult solve_ellipsoid_sw(const SwCoefficient& coeff, const Mat& q, double beta) {
    if (!is_square(q, coeff.vector.size())) throw Error(ErrorKind::Input, "Q dimension mismatch");
    if (!(lambda_min(q) > tol::pd)) throw Error(ErrorKind::Contract, "Q must be positive definite");
    if (!(beta >= 0.0)) throw Error(ErrorKind::Input, "beta must be nonnegative");
    EquilibriumResult r;
    r.objective = Objective::Sw;
    r.geometry = Geometry::Ellipsoid;
    r.beta = beta;
    r.diagnostics.method = "closed-form";
    const Vec& c = coeff.vector;
    if (c.norm() == 0.0 || beta == 0.0) {
        r.policy = make_policy(Vec::Zero(c.size()));
        r.objective_value = 0.0;
        r.delta_value = 0.0;
        r.diagnostics.degenerate = c.norm() == 0.0;
        return r;
    }
    double nq = norm_q_inv(c, q);
    Vec w = std::sqrt(beta) * solve_pd(q, c) / nq;
    r.policy = make_policy(w);
    r.objective_value = std::sqrt(beta) * nq;
    r.delta_value = w.dot(q * w);
    return r;
}

inline EquilibriumResult solve_constrained(Objective obj, const FairProblem& pb) {
    const FairnessSpec& spec = pb.spec;
    if (!is_convex_kind(spec.kind))
        throw Error(ErrorKind::Contract, "solve_constrained handles l1/l2; use the nonconvex solvers for " +
                                             std::string(to_string(spec.kind)));
    EquilibriumResult r;
    r.objective = obj;
    r.beta = spec.beta;
    FairRegion reg;
    Mat q;
    if (spec.kind == FairnessKind::L1) {
        reg = FairRegion::l1(pb.dm.m, spec.beta);
        r.geometry = Geometry::PolyBall;
    } else {
        q = symmetrize(pb.dm.m.transpose() * pb.dm.m);
        double ld = lambda_min(q);
        bool inside = ld > tol::pd && spec.beta <= ld;
        reg = FairRegion::ellipsoid(q, spec.beta, !inside);
        r.geometry = inside ? Geometry::Ellipsoid : Geometry::EllipsoidBall;
    }
    Vec w;
    if (obj == Objective::Acc) {
        w = project_onto_region(reg, pb.w_star, r.diagnostics);
    } else if (r.geometry == Geometry::Ellipsoid) {
        EquilibriumResult e = solve_ellipsoid_sw(pb.coeff, q, spec.beta);
        e.delta_value = pb.delta(e.policy.weights);
        return e;
    } else {
        w = maximize_linear_over_region(reg, pb.coeff.vector, r.diagnostics);
    }
    return finish(r, w, pb);
}

inline EquilibriumResult solve_constrained(Objective obj, const FairnessSpec& spec, const Scenario& s) {
    return solve_constrained(obj, FairProblem::from(s, spec));
}

inline EquilibriumResult solve_nonconvex_restricted(Objective obj, const FairProblem& pb, const ClassFReport& cf) {
    if (!cf.member) throw Error(ErrorKind::Contract, "class F membership not verified: " + cf.reason);
    EquilibriumResult r;
    if (obj == Objective::Sw) {
        r = solve_ellipsoid_sw(pb.coeff, cf.q, cf.beta);
    } else {
        r.objective = obj;
        r.diagnostics.method = "ellipsoid-projection";
        r.policy = make_policy(project_onto_ellipsoid(pb.w_star, cf.q, cf.beta));
        r.objective_value = accuracy_value(r.policy.weights, pb.w_star);
    }
    r.beta = cf.beta;
    r.geometry = Geometry::NonconvexRestricted;
    r.delta_value = pb.delta(r.policy.weights);
    return r;
}

inline EquilibriumResult solve_nonconvex_envelope(Objective obj, const FairProblem& pb, const ClassFReport& cf) {
    if (!(cf.lambda_d > tol::pd)) throw Error(ErrorKind::Contract, "envelope needs a positive definite core Q");
    const double level = cf.beta + cf.lipschitz * cf.diameter;
    const bool inside = level <= cf.lambda_d;
    FairRegion reg = FairRegion::ellipsoid(cf.q, level, !inside);
    EquilibriumResult r;
    r.objective = obj;
    r.beta = cf.beta;
    Vec w = obj == Objective::Acc ? project_onto_region(reg, pb.w_star, r.diagnostics)
                                  : maximize_linear_over_region(reg, pb.coeff.vector, r.diagnostics);
    r = finish(r, w, pb);
    r.geometry = Geometry::NonconvexEnvelope;
    return r;
}

struct MultistartOptions {
    int starts = 64;
    std::uint64_t seed = 0;
    int iterations = 400;
    int grid_directions = 20000;
};

namespace detail {

class NonconvexSearch {
public:
    NonconvexSearch(Objective obj, const FairProblem& pb) : obj_(obj), pb_(pb) {
        homogeneous_ = pb.spec.kind == FairnessKind::Asym ||
                       (pb.spec.kind == FairnessKind::Custom && !pb.spec.f) || pb.spec.kind == FairnessKind::L2;
        if (homogeneous_) {
            if (pb.spec.kind == FairnessKind::Asym) {
                const Mat& a = pb.dm.group(pb.spec.privileged_group);
                const Mat& b = pb.dm.group(other_group(pb.spec.privileged_group));
                radial_ = a.transpose() * a - b.transpose() * b;
            } else if (pb.spec.kind == FairnessKind::L2) {
                radial_ = pb.dm.m.transpose() * pb.dm.m;
            } else {
                radial_ = class_f_q(pb.spec, pb.dm);
            }
        }
    }

    bool feasible(const Vec& w) const {
        return w.norm() <= 1.0 + 1e-12 && pb_.delta(w) <= pb_.spec.beta + tol::fair;
    }

    double value(const Vec& w) const { return objective_value(obj_, w, pb_.w_star, pb_.coeff); }

    Vec gradient(const Vec& w) const { return obj_ == Objective::Acc ? Vec(2.0 * (pb_.w_star - w)) : pb_.coeff.vector; }

    // Largest feasible point on the segment [0, w] by bisection.
    Vec restore(const Vec& w_in) const {
        Vec w = clip_to_ball(w_in);
        if (feasible(w)) return w;
        double lo = 0.0, hi = 1.0;
        for (int i = 0; i < 80; ++i) {
            double mid = 0.5 * (lo + hi);
            if (feasible(mid * w)) lo = mid;
            else hi = mid;
        }
        return lo * w;
    }

    // End of the feasible segment along unit direction u.
    double radial_limit(const Vec& u) const {
        if (homogeneous_) {
            double a = u.dot(radial_ * u);
            double t = a > 0.0 ? std::min(1.0, std::sqrt(pb_.spec.beta / a)) : 1.0;
            while (t > 0.0 && !feasible(t * u)) t *= 1.0 - 1e-15;
            return t;
        }
        const int steps = 64;
        int k = 1;
        for (; k <= steps; ++k)
            if (!feasible((static_cast<double>(k) / steps) * u)) break;
        if (k > steps) return 1.0;
        double lo = static_cast<double>(k - 1) / steps, hi = static_cast<double>(k) / steps;
        for (int i = 0; i < 60; ++i) {
            double mid = 0.5 * (lo + hi);
            if (feasible(mid * u)) lo = mid;
            else hi = mid;
        }
        return lo;
    }

    // Best point on the feasible segment along u.
    Vec best_on_ray(const Vec& u) const {
        double tmax = radial_limit(u);
        double t = 0.0;
        if (obj_ == Objective::Acc) t = std::clamp(u.dot(pb_.w_star), 0.0, tmax);
        else t = u.dot(pb_.coeff.vector) > 0.0 ? tmax : 0.0;
        return t * u;
    }

    Vec ascend(const Vec& w0, int iterations, int* used) const {
        Vec w = restore(w0);
        double fw = value(w);
        double step = 0.5;
        int it = 0;
        for (; it < iterations && step > 1e-13; ++it) {
            Vec g = gradient(w);
            double gn = g.norm();
            if (gn == 0.0) break;
            Vec cand = restore(w + (step / gn) * g);
            double fc = value(cand);
            if (fc > fw) {
                w = cand;
                fw = fc;
                step = std::min(1.0, step * 1.5);
            } else {
                step *= 0.5;
            }
        }
        if (used) *used += it;
        return w;
    }

    Vec grid_pass_2d(int directions) const {
        auto at = [&](double th) { return best_on_ray(Vec((Vec(2) << std::cos(th), std::sin(th)).finished())); };
        const double h = 2.0 * M_PI / directions;
        double best_th = 0.0, best_v = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < directions; ++k) {
            double th = h * k;
            double v = value(at(th));
            if (v > best_v) {
                best_v = v;
                best_th = th;
            }
        }
        double a = best_th - h, b = best_th + h;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
        double f1 = value(at(x1)), f2 = value(at(x2));
        for (int i = 0; i < 80; ++i) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + gr * (b - a);
                f2 = value(at(x2));
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - gr * (b - a);
                f1 = value(at(x1));
            }
        }
        Vec cand = at(0.5 * (a + b));
        Vec grid_best = at(best_th);
        return value(cand) >= value(grid_best) ? cand : grid_best;
    }

private:
    Objective obj_;
    const FairProblem& pb_;
    bool homogeneous_ = false;
    Mat radial_;
};

}  // namespace detail

// Heuristic lower bound on the nonconvex optimum over W(beta) ∩ B(1).
inline EquilibriumResult solve_nonconvex_multistart(Objective obj, const FairProblem& pb,
                                                    const MultistartOptions& opt = {}) {
    detail::NonconvexSearch search(obj, pb);
    const Eigen::Index d = pb.dim();
    int used = 0;
    Vec best = Vec::Zero(d);
    double best_v = search.value(best);
    auto consider = [&](const Vec& w) {
        if (!search.feasible(w)) return;
        double v = search.value(w);
        if (v > best_v) {
            best_v = v;
            best = w;
        }
    };

    if (pb.spec.kind == FairnessKind::Asym || pb.spec.kind == FairnessKind::Custom) {
        ClassFReport cf = check_class_F(pb.spec, pb.dm);
        if (cf.member) {
            EquilibriumResult res = solve_nonconvex_restricted(obj, pb, cf);
            consider(res.policy.weights);
            consider(search.ascend(res.policy.weights, opt.iterations, &used));
        }
    }
    EquilibriumResult un = solve_unconstrained(obj, pb.w_star, pb.coeff);
    consider(search.ascend(un.policy.weights, opt.iterations, &used));
    for (int s = 0; s < opt.starts; ++s) {
        Stream st(opt.seed, static_cast<std::uint64_t>(s));
        consider(search.ascend(st.in_ball(d), opt.iterations, &used));
    }
    if (d == 1) {
        for (double sgn : {-1.0, 1.0}) consider(search.best_on_ray(Vec::Constant(1, sgn)));
    } else if (d == 2) {
        Vec g = search.grid_pass_2d(opt.grid_directions);
        consider(g);
        consider(search.ascend(g, opt.iterations, &used));
    }

    EquilibriumResult r;
    r.objective = obj;
    r.beta = pb.spec.beta;
    r.geometry = Geometry::NonconvexMultistart;
    r.diagnostics.method = "multistart";
    r.diagnostics.heuristic = true;
    r.diagnostics.iterations = used;
    r.policy = make_policy(best);
    r.objective_value = best_v;
    r.delta_value = pb.delta(best);
    return r;
}

inline EquilibriumResult solve_nonconvex_restricted(Objective obj, const FairnessSpec& spec, const Scenario& s) {
    FairProblem pb = FairProblem::from(s, spec);
    return solve_nonconvex_restricted(obj, pb, check_class_F(spec, pb.dm));
}

inline EquilibriumResult solve_nonconvex_envelope(Objective obj, const FairnessSpec& spec, const Scenario& s) {
    FairProblem pb = FairProblem::from(s, spec);
    return solve_nonconvex_envelope(obj, pb, check_class_F(spec, pb.dm));
}

inline EquilibriumResult solve_nonconvex_multistart(Objective obj, const FairnessSpec& spec, const Scenario& s,
                                                    int starts, std::uint64_t seed) {
    MultistartOptions opt;
    opt.starts = starts;
    opt.seed = seed;
    return solve_nonconvex_multistart(obj, FairProblem::from(s, spec), opt);
}

}  // namespace fairstack
