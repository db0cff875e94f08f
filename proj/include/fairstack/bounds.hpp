#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairstack/solvers.hpp"

namespace fairstack {

struct BoundPair {
    double acc = 0.0;
    double sw = 0.0;
};

inline BoundPair generic_loss_bounds(const Vec& w_star, const SwCoefficient& coeff) {
    return {4.0 * (compensated_norm(w_star) + 1.0), 2.0 * compensated_norm(coeff.vector)};
}

struct HoffmanResult {
    double value = 0.0;
    bool certified = true;
    std::uint64_t subsets = 0;
};

class HoffmanCapacityError : public Error {
public:
    HoffmanCapacityError(const std::string& msg, double lower_bound)
        : Error(ErrorKind::Capacity, msg), lower_bound_(lower_bound) {}
    double lower_bound() const noexcept { return lower_bound_; }
    bool certified() const noexcept { return false; }

private:
    double lower_bound_;
};

inline constexpr std::uint64_t kHoffmanBudget = 1000000;

// sum_{s=1}^{min(k,d)} C(k, s), saturating above cap.
inline std::uint64_t hoffman_subset_count(std::uint64_t k, std::uint64_t d, std::uint64_t cap) {
    std::uint64_t total = 0;
    double c = 1.0;
    for (std::uint64_t s = 1; s <= std::min(k, d); ++s) {
        c = c * static_cast<double>(k - s + 1) / static_cast<double>(s);
        if (c + static_cast<double>(total) > static_cast<double>(cap)) return cap + 1;
        total += static_cast<std::uint64_t>(std::llround(c));
    }
    return total;
}

// Lower bound from sampled distance/residual ratios (b = 0) and single rows.
inline double hoffman_sampled_lower_bound(const Mat& rows, std::uint64_t seed = 0, int samples = 2000) {
    double lb = 0.0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        double n = rows.row(i).norm();
        if (n > 0.0) lb = std::max(lb, 1.0 / n);
    }
    Vec zero = Vec::Zero(rows.rows());
    for (int i = 0; i < samples; ++i) {
        Stream st(seed, static_cast<std::uint64_t>(i));
        Vec z = st.normal_vec(rows.cols());
        Vec res = (rows * z).cwiseMax(0.0);
        double rn = res.norm();
        if (rn <= 0.0) continue;
        double dist = (z - project_onto_polyhedron(z, rows, zero)).norm();
        lb = std::max(lb, dist / rn);
    }
    return lb;
}

// H = 1 / sqrt(min over independent row sets S of min_{v >= 0, |v| = 1} v^T A_S A_S^T v).
// The inner minimum is attained at a strictly positive eigenvector of some principal
// submatrix, and every such submatrix is itself an independent row set.
inline HoffmanResult hoffman_constant(const Mat& rows, std::uint64_t budget = kHoffmanBudget) {
    const auto k = static_cast<std::uint64_t>(rows.rows());
    const auto d = static_cast<std::uint64_t>(rows.cols());
    std::uint64_t need = hoffman_subset_count(k, d, budget);
    if (need > budget)
        throw HoffmanCapacityError("Hoffman enumeration needs more than " + std::to_string(budget) +
                                       " row subsets; sampled lower bound only",
                                   hoffman_sampled_lower_bound(rows));
    HoffmanResult r;
    const Mat gram = rows * rows.transpose();
    double min_mu = std::numeric_limits<double>::infinity();
    std::vector<Eigen::Index> subset;

    std::function<void(Eigen::Index)> visit = [&](Eigen::Index start) {
        for (Eigen::Index i = start; i < rows.rows(); ++i) {
            subset.push_back(i);
            const auto s = static_cast<Eigen::Index>(subset.size());
            Mat g(s, s);
            for (Eigen::Index a = 0; a < s; ++a)
                for (Eigen::Index b = 0; b < s; ++b) g(a, b) = gram(subset[a], subset[b]);
            ++r.subsets;
            Eigen::SelfAdjointEigenSolver<Mat> es(g);
            const Vec& ev = es.eigenvalues();
            const double scale = std::max(ev(s - 1), std::numeric_limits<double>::min());
            if (ev(0) > 1e-12 * scale && ev(s - 1) > 0.0) {
                for (Eigen::Index j = 0; j < s; ++j) {
                    Vec v = es.eigenvectors().col(j);
                    if (v.sum() < 0.0) v = -v;
                    if (v.minCoeff() > 1e-12) min_mu = std::min(min_mu, ev(j));
                }
                if (s < rows.cols()) visit(i + 1);
            }
            subset.pop_back();
        }
    };
    visit(0);
    r.value = std::isfinite(min_mu) ? 1.0 / std::sqrt(min_mu) : 0.0;
    return r;
}

// (rows w' - beta 1)_+ with w' the ball-normalized ground truth.
inline Vec polyhedral_residual(const Mat& m, double beta, const Vec& w_star) {
    Polyhedron p = polyhedron_rows(m, beta);
    Vec wp = clip_to_ball(w_star);
    return (p.rows * wp - p.rhs).cwiseMax(0.0);
}

inline double polyhedral_acc_bound(const Mat& m, double beta, const Vec& w_star, double hoffman) {
    double r = compensated_norm(polyhedral_residual(m, beta, w_star));
    double h = hoffman * r;
    return h * h;
}

inline double polyhedral_acc_bound(const Mat& m, double beta, const Vec& w_star) {
    if (!check_property1(m, beta).satisfied) throw Error(ErrorKind::Contract, "Property 1 not verified");
    return polyhedral_acc_bound(m, beta, w_star, hoffman_constant(polyhedron_rows(m, beta).rows).value);
}

inline double ellipsoid_sw_bound() { return std::sqrt(2.0); }

namespace detail {

inline BoundPair core_ellipsoid_bounds(const Mat& q, double beta, const Vec& w_star, const Vec& c) {
    const double ld = lambda_min(q);
    const double ratio = std::sqrt(beta / ld);
    const double wn = compensated_norm(w_star);
    const bool outside = w_star.dot(q * w_star) > beta;
    const double qv = outside ? ratio + wn : 0.0;
    const double s = outside ? std::min(1.0, wn) + ratio : 0.0;
    const double t = 2.0 * ratio;
    BoundPair b;
    b.acc = 2.0 * qv * (t + s);
    b.sw = compensated_norm(c) - std::sqrt(beta) * norm_q_inv(c, q);
    return b;
}

}  // namespace detail

inline BoundPair internal_ellipsoid_bounds(const Mat& q, double beta, const Vec& w_star, const SwCoefficient& coeff) {
    if (!check_property3(q, beta).satisfied) throw Error(ErrorKind::Contract, "Property 3 not verified");
    return detail::core_ellipsoid_bounds(q, beta, w_star, coeff.vector);
}

inline BoundPair nonconvex_se_bounds(const ClassFReport& cf, const Vec& w_star, const SwCoefficient& coeff) {
    if (!cf.member) throw Error(ErrorKind::Contract, "class F membership not verified");
    return detail::core_ellipsoid_bounds(cf.q, cf.beta, w_star, coeff.vector);
}

inline BoundPair restriction_loss_bounds(const ClassFReport& cf, const Vec& w_star, const SwCoefficient& coeff) {
    if (!cf.member) throw Error(ErrorKind::Contract, "class F membership not verified");
    const double beta = cf.beta;
    const double ld = cf.lambda_d;
    const double env = beta + cf.lipschitz * cf.diameter;
    const double ratio = std::sqrt(beta / ld);
    const double wn = compensated_norm(w_star);
    const bool outside = w_star.dot(cf.q * w_star) > beta;
    const double a = outside ? ratio + std::min({1.0, wn, std::sqrt(env / ld)}) : 0.0;
    const double c = outside ? ratio + wn : 0.0;
    const double e = 2.0 * ratio;
    const double nq = norm_q_inv(coeff.vector, cf.q);
    BoundPair b;
    b.acc = 2.0 * c * (a + e);
    b.sw = std::min(compensated_norm(coeff.vector), std::sqrt(env) * nq) - std::sqrt(beta) * nq;
    return b;
}

struct TightnessVerdict {
    bool w_star_outside = false;   // w* not in E(beta)
    bool envelope_inside = false;  // LD < lambda_d - beta
    bool w_star_beyond = false;    // |w*| > sqrt((beta + LD) / lambda_d)
    bool conditions_met = false;
    BoundPair se;
    BoundPair restriction;
    bool acc_strict = false;
    bool sw_strict = false;
    bool sw_degenerate = false;    // w~ = 0: both SW bounds are 0
    bool holds = true;             // strict ordering whenever the conditions hold
};

inline TightnessVerdict restriction_tightness_check(const ClassFReport& cf, const Vec& w_star,
                                                    const SwCoefficient& coeff) {
    if (!cf.member) throw Error(ErrorKind::Contract, "class F membership not verified");
    TightnessVerdict v;
    const double ld_term = cf.lipschitz * cf.diameter;
    v.w_star_outside = w_star.dot(cf.q * w_star) > cf.beta;
    v.envelope_inside = ld_term < cf.lambda_d - cf.beta;
    v.w_star_beyond = w_star.norm() > std::sqrt((cf.beta + ld_term) / cf.lambda_d);
    v.conditions_met = v.w_star_outside && v.envelope_inside && v.w_star_beyond;
    v.se = nonconvex_se_bounds(cf, w_star, coeff);
    v.restriction = restriction_loss_bounds(cf, w_star, coeff);
    v.acc_strict = v.restriction.acc < v.se.acc;
    v.sw_strict = v.restriction.sw < v.se.sw;
    v.sw_degenerate = coeff.vector.norm() == 0.0;
    if (v.conditions_met) v.holds = v.acc_strict && (v.sw_strict || v.sw_degenerate);
    return v;
}

struct BoundEntry {
    Objective objective = Objective::Acc;
    std::string name;
    double value = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<std::string, bool>> preconditions;
    double realized_loss = std::numeric_limits<double>::quiet_NaN();
    bool checked = false;
    bool valid = true;

    bool emitted() const {
        for (const auto& p : preconditions)
            if (!p.second) return false;
        return true;
    }
};

struct BoundsInputs {
    double beta = 0.0;
    double lambda_d = std::numeric_limits<double>::quiet_NaN();
    double sigma_d = std::numeric_limits<double>::quiet_NaN();
    double hoffman = std::numeric_limits<double>::quiet_NaN();
    bool hoffman_certified = false;
    double lipschitz = std::numeric_limits<double>::quiet_NaN();
    double diameter = std::numeric_limits<double>::quiet_NaN();
    Mat q;
    Vec w_star;
    Vec coeff;
};

struct BoundsReport {
    FairnessKind kind = FairnessKind::L1;
    BoundsInputs inputs;
    std::vector<BoundEntry> entries;
    std::optional<TightnessVerdict> tightness;
    std::optional<EquilibriumResult> unconstrained[2];
    std::optional<EquilibriumResult> constrained[2];
    std::optional<EquilibriumResult> restricted[2];
    std::optional<EquilibriumResult> envelope[2];
    std::vector<std::string> notes;

    bool all_valid() const {
        for (const BoundEntry& e : entries)
            if (e.emitted() && e.checked && !e.valid) return false;
        return true;
    }
};

struct BoundsOptions {
    bool run_solvers = true;
    int starts = 64;
    std::uint64_t seed = 0;
    std::uint64_t hoffman_budget = kHoffmanBudget;
};

inline constexpr double kBoundSlack = 1e-8;

inline BoundsReport bounds_report(const FairProblem& pb, const BoundsOptions& opt = {}) {
    BoundsReport rep;
    const FairnessSpec& spec = pb.spec;
    const Vec& ws = pb.w_star;
    rep.kind = spec.kind;
    rep.inputs.beta = spec.beta;
    rep.inputs.sigma_d = sigma_min(pb.dm.m);
    rep.inputs.w_star = ws;
    rep.inputs.coeff = pb.coeff.vector;

    auto add = [&](Objective o, std::string name, double value, std::vector<std::pair<std::string, bool>> pre) {
        BoundEntry e;
        e.objective = o;
        e.name = std::move(name);
        e.preconditions = std::move(pre);
        if (e.emitted()) e.value = value;
        rep.entries.push_back(e);
    };

    BoundPair gen = generic_loss_bounds(ws, pb.coeff);
    add(Objective::Acc, "generic", gen.acc, {});
    add(Objective::Sw, "generic", gen.sw, {});

    std::optional<ClassFReport> cf;
    if (spec.kind == FairnessKind::L1) {
        PropertyCheck p1 = check_property1(pb.dm.m, spec.beta);
        double poly = std::numeric_limits<double>::quiet_NaN();
        bool certified = false;
        if (p1.satisfied) {
            try {
                HoffmanResult h = hoffman_constant(polyhedron_rows(pb.dm.m, spec.beta).rows, opt.hoffman_budget);
                rep.inputs.hoffman = h.value;
                certified = true;
                poly = polyhedral_acc_bound(pb.dm.m, spec.beta, ws, h.value);
            } catch (const HoffmanCapacityError& e) {
                rep.inputs.hoffman = e.lower_bound();
                rep.notes.push_back(e.what());
            }
        }
        rep.inputs.hoffman_certified = certified;
        add(Objective::Acc, "polyhedral", poly, {{"property1", p1.satisfied}, {"hoffman_certified", certified}});
        add(Objective::Sw, "polyhedral", gen.sw, {{"property1", p1.satisfied}});
    } else if (spec.kind == FairnessKind::L2) {
        Property2Check p2 = check_property2(pb.dm.m);
        Mat q = symmetrize(pb.dm.m.transpose() * pb.dm.m);
        rep.inputs.q = q;
        rep.inputs.lambda_d = lambda_min(q);
        PropertyCheck p3 = check_property3(q, spec.beta);
        add(Objective::Acc, "ellipsoid", gen.acc, {{"property2", p2.check.satisfied}});
        add(Objective::Sw, "ellipsoid", ellipsoid_sw_bound(), {{"property2", p2.check.satisfied}});
        BoundPair ie;
        if (p2.check.satisfied && p3.satisfied) ie = internal_ellipsoid_bounds(q, spec.beta, ws, pb.coeff);
        add(Objective::Acc, "internal-ellipsoid", ie.acc,
            {{"property2", p2.check.satisfied}, {"property3", p3.satisfied}});
        add(Objective::Sw, "internal-ellipsoid", ie.sw, {{"property2", p2.check.satisfied}, {"property3", p3.satisfied}});
    } else {
        cf = check_class_F(spec, pb.dm);
        rep.inputs.q = cf->q;
        rep.inputs.lambda_d = cf->lambda_d;
        rep.inputs.lipschitz = cf->lipschitz;
        rep.inputs.diameter = cf->diameter;
        BoundPair se, rl;
        if (cf->member) {
            se = nonconvex_se_bounds(*cf, ws, pb.coeff);
            rl = restriction_loss_bounds(*cf, ws, pb.coeff);
            rep.tightness = restriction_tightness_check(*cf, ws, pb.coeff);
        }
        add(Objective::Acc, "nonconvex-se", se.acc, {{"class_f", cf->member}});
        add(Objective::Sw, "nonconvex-se", se.sw, {{"class_f", cf->member}});
        add(Objective::Acc, "restriction", rl.acc, {{"class_f", cf->member}});
        add(Objective::Sw, "restriction", rl.sw, {{"class_f", cf->member}});
    }

    if (!opt.run_solvers) return rep;

    for (Objective o : {Objective::Acc, Objective::Sw}) {
        const int oi = o == Objective::Acc ? 0 : 1;
        EquilibriumResult un = solve_unconstrained(o, ws, pb.coeff);
        rep.unconstrained[oi] = un;
        double realized = 0.0;
        double restriction_gap = std::numeric_limits<double>::quiet_NaN();
        if (is_convex_kind(spec.kind)) {
            EquilibriumResult c = solve_constrained(o, pb);
            rep.constrained[oi] = c;
            realized = un.objective_value - c.objective_value;
        } else {
            MultistartOptions mo;
            mo.starts = opt.starts;
            mo.seed = opt.seed;
            EquilibriumResult ms = solve_nonconvex_multistart(o, pb, mo);
            rep.constrained[oi] = ms;
            realized = un.objective_value - ms.objective_value;
            if (cf && cf->member) {
                EquilibriumResult res = solve_nonconvex_restricted(o, pb, *cf);
                rep.restricted[oi] = res;
                rep.envelope[oi] = solve_nonconvex_envelope(o, pb, *cf);
                restriction_gap = ms.objective_value - res.objective_value;
            }
        }
        for (BoundEntry& e : rep.entries) {
            if (e.objective != o || !e.emitted()) continue;
            double loss = e.name == "restriction" ? restriction_gap : realized;
            if (std::isnan(loss)) continue;
            e.realized_loss = loss;
            e.checked = true;
            e.valid = loss <= e.value + kBoundSlack;
        }
    }
    return rep;
}

inline BoundsReport bounds_report(const Scenario& s, const FairnessSpec& spec, const BoundsOptions& opt = {}) {
    return bounds_report(FairProblem::from(s, spec), opt);
}

}  // namespace fairstack
