#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fairstack/expression.hpp"
#include "fairstack/model.hpp"
#include "fairstack/rng.hpp"

namespace fairstack {

enum class FairnessKind { L1, L2, Asym, Custom };

inline const char* to_string(FairnessKind k) {
    switch (k) {
        case FairnessKind::L1: return "l1";
        case FairnessKind::L2: return "l2";
        case FairnessKind::Asym: return "asym";
        case FairnessKind::Custom: return "custom";
    }
    return "?";
}

inline bool is_convex_kind(FairnessKind k) { return k == FairnessKind::L1 || k == FairnessKind::L2; }

struct FairnessSpec {
    FairnessKind kind = FairnessKind::L1;
    double beta = 0.0;
    int privileged_group = 1;                 // asym / custom default Q
    Mat custom_q;                             // custom: empty means M_g^T M_g
    std::shared_ptr<const Expression> f;      // custom: null means f = 0
    double lipschitz = 0.0;                   // custom: user-supplied L
};

// M = M1 - M2 with M_g = Pi_D A_g^{-1} C^T Pi_g.
struct DiscrepancyMatrix {
    Mat m;
    Mat m1;
    Mat m2;

    const Mat& group(int g) const { return g == 1 ? m1 : m2; }
};

inline DiscrepancyMatrix discrepancy_matrix(const Scenario& s) {
    const Mat& c = s.contribution.entries;
    Mat pd = s.desirability_matrix();
    DiscrepancyMatrix dm;
    dm.m1 = pd * solve_pd(s.groups[0].cost, Mat(c.transpose() * s.groups[0].projector));
    dm.m2 = pd * solve_pd(s.groups[1].cost, Mat(c.transpose() * s.groups[1].projector));
    dm.m = dm.m1 - dm.m2;
    return dm;
}

inline double delta_l1(const Vec& w, const Mat& m) {
    require_dim(w.size(), m.cols(), "policy");
    return (m * w).lpNorm<1>();
}

inline double delta_l2(const Vec& w, const Mat& m) {
    require_dim(w.size(), m.cols(), "policy");
    Vec v = m * w;
    return compensated_dot(v, v);
}

inline double delta_asym(const Vec& w, const Mat& mg, const Mat& mg_other) {
    Vec a = mg * w;
    Vec b = mg_other * w;
    return compensated_dot(a, a) - compensated_dot(b, b);
}

inline int other_group(int g) { return g == 1 ? 2 : 1; }

inline Mat class_f_q(const FairnessSpec& spec, const DiscrepancyMatrix& dm) {
    if (spec.kind == FairnessKind::Custom && spec.custom_q.size() > 0) return symmetrize(spec.custom_q);
    const Mat& mg = dm.group(spec.privileged_group);
    return mg.transpose() * mg;
}

inline double delta(const FairnessSpec& spec, const DiscrepancyMatrix& dm, const Vec& w) {
    switch (spec.kind) {
        case FairnessKind::L1: return delta_l1(w, dm.m);
        case FairnessKind::L2: return delta_l2(w, dm.m);
        case FairnessKind::Asym:
            return delta_asym(w, dm.group(spec.privileged_group), dm.group(other_group(spec.privileged_group)));
        case FairnessKind::Custom: {
            Mat q = class_f_q(spec, dm);
            double quad = w.dot(q * w);
            return spec.f ? quad - (*spec.f)(w) : quad;
        }
    }
    return 0.0;
}

inline bool is_beta_fair(const Vec& w, const FairnessSpec& spec, const DiscrepancyMatrix& dm) {
    return delta(spec, dm, w) <= spec.beta + tol::fair;
}

struct Polyhedron {
    Mat rows;  // k x d
    Vec rhs;   // k
    std::string warning;
};

inline constexpr Eigen::Index kMaxPolyhedronDim = 16;

// Rows a^T M for a in {-1,+1}^d, lexicographic with -1 < +1, most significant coordinate first.
inline Polyhedron polyhedron_rows(const Mat& m, double beta) {
    const Eigen::Index d = m.rows();
    if (d > kMaxPolyhedronDim)
        throw Error(ErrorKind::Capacity, "polyhedron needs 2^" + std::to_string(d) + " rows; cap is d <= 16");
    Polyhedron p;
    if (d >= 12) p.warning = "2^" + std::to_string(d) + " polyhedron rows; expect slow solves";
    const Eigen::Index k = Eigen::Index(1) << d;
    p.rows.resize(k, m.cols());
    for (Eigen::Index b = 0; b < k; ++b) {
        Vec a(d);
        for (Eigen::Index i = 0; i < d; ++i) a[i] = ((b >> (d - 1 - i)) & 1) ? 1.0 : -1.0;
        p.rows.row(b) = a.transpose() * m;
    }
    p.rhs = Vec::Constant(k, beta);
    return p;
}

struct PropertyCheck {
    bool satisfied = false;
    double margin = std::numeric_limits<double>::quiet_NaN();
    std::string reason;
};

// Sufficient condition: sigma_d(M) > 0 and beta <= sigma_d(M).
inline PropertyCheck check_property1(const Mat& m, double beta) {
    PropertyCheck r;
    double sd = sigma_min(m);
    r.margin = sd - beta;
    if (!(sd > tol::invertible)) {
        r.reason = "kernel nonempty (sigma_d = " + std::to_string(sd) + ")";
    } else if (beta <= sd) {
        r.satisfied = true;
        r.reason = "sigma_d = " + std::to_string(sd) + " >= beta";
    } else {
        r.reason = "sufficient condition fails: beta > sigma_d = " + std::to_string(sd);
    }
    return r;
}

struct Property2Check {
    PropertyCheck check;
    Mat q;  // M^T M, emitted when satisfied
};

inline Property2Check check_property2(const Mat& m) {
    Property2Check r;
    double sd = sigma_min(m);
    r.check.margin = sd;
    if (sd > tol::invertible) {
        r.check.satisfied = true;
        r.check.reason = "M invertible (sigma_d = " + std::to_string(sd) + ")";
        r.q = symmetrize(m.transpose() * m);
    } else {
        r.check.reason = "M singular (sigma_d = " + std::to_string(sd) + ")";
    }
    return r;
}

inline PropertyCheck check_property3(const Mat& q, double beta) {
    PropertyCheck r;
    double ld = lambda_min(q);
    r.margin = ld - beta;
    if (!(ld > tol::pd)) r.reason = "Q not positive definite (lambda_d = " + std::to_string(ld) + ")";
    else if (beta <= ld) {
        r.satisfied = true;
        r.reason = "lambda_d = " + std::to_string(ld) + " >= beta";
    } else
        r.reason = "beta > lambda_d = " + std::to_string(ld) + "; ellipsoid leaves the unit ball";
    return r;
}

struct ClassFReport {
    bool member = false;
    std::string reason;
    double margin = std::numeric_limits<double>::quiet_NaN();  // lambda_d - beta
    double beta = 0.0;
    Mat q;                   // core quadratic
    Mat p;                   // asym: the subtracted quadratic
    double lambda_d = 0.0;
    double lipschitz = 0.0;  // L
    double diameter = 1.0;   // D over W(beta) ∩ B(1)
    bool diameter_conservative = false;
};

inline ClassFReport check_class_F(const FairnessSpec& spec, const DiscrepancyMatrix& dm) {
    if (spec.kind != FairnessKind::Asym && spec.kind != FairnessKind::Custom)
        throw Error(ErrorKind::Contract, "class F check needs an asym or custom fairness spec");
    if (spec.privileged_group != 1 && spec.privileged_group != 2)
        throw Error(ErrorKind::Input, "privileged_group must be 1 or 2");
    ClassFReport r;
    r.beta = spec.beta;
    r.q = class_f_q(spec, dm);
    r.lambda_d = lambda_min(r.q);
    r.margin = r.lambda_d - spec.beta;
    const double beta = std::max(spec.beta, 0.0);

    if (spec.kind == FairnessKind::Asym) {
        const Mat& mo = dm.group(other_group(spec.privileged_group));
        r.p = symmetrize(mo.transpose() * mo);
        // Delta(t u) = t^2 u^T (Q - P) u, so the radial sup is exact.
        double lm = lambda_min(Mat(r.q - r.p));
        r.diameter = lm > 0.0 ? std::min(1.0, std::sqrt(beta / lm)) : 1.0;
        r.lipschitz = 2.0 * r.diameter * std::max(0.0, lambda_max(r.p));
    } else if (!spec.f) {
        r.diameter = r.lambda_d > 0.0 ? std::min(1.0, std::sqrt(beta / r.lambda_d)) : 1.0;
        r.lipschitz = 0.0;
    } else {
        r.diameter = 1.0;
        r.diameter_conservative = true;
        r.lipschitz = spec.lipschitz;
    }

    if (spec.kind == FairnessKind::Custom && spec.f) {
        Vec zero = Vec::Zero(r.q.rows());
        if (std::abs((*spec.f)(zero)) > tol::fair) {
            r.reason = "f(0) != 0";
            return r;
        }
        if (!(spec.lipschitz >= 0.0)) {
            r.reason = "Lipschitz constant must be nonnegative";
            return r;
        }
    }
    if (!(r.lambda_d > tol::pd)) {
        r.reason = "Q not positive definite (lambda_d = " + std::to_string(r.lambda_d) + ")";
    } else if (spec.beta > r.lambda_d) {
        r.reason = "beta > lambda_d(Q) = " + std::to_string(r.lambda_d);
    } else {
        r.member = true;
        r.reason = "Q positive definite and beta <= lambda_d(Q) = " + std::to_string(r.lambda_d);
    }
    return r;
}

// Sampled estimate of inf over the unit sphere of |Mw|_1. Informational only.
inline double sampled_mu(const Mat& m, std::uint64_t seed, int samples = 4096) {
    const Eigen::Index d = m.cols();
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
    double best = (m * svd.matrixV().col(d - 1)).lpNorm<1>();
    for (int i = 0; i < samples; ++i) {
        Stream st(seed, static_cast<std::uint64_t>(i));
        best = std::min(best, (m * st.unit_vec(d)).lpNorm<1>());
    }
    return best;
}

struct PropertyReport {
    FairnessKind kind = FairnessKind::L1;
    double beta = 0.0;
    double sigma_d = 0.0;
    double mu_sampled = 0.0;
    PropertyCheck property1;
    Property2Check property2;
    PropertyCheck property3;  // on Q = M^T M
    std::optional<ClassFReport> class_f;
    std::vector<std::string> notes;
};

inline PropertyReport property_report(const Scenario& s, const FairnessSpec& spec, std::uint64_t seed = 0) {
    DiscrepancyMatrix dm = discrepancy_matrix(s);
    PropertyReport r;
    r.kind = spec.kind;
    r.beta = spec.beta;
    r.sigma_d = sigma_min(dm.m);
    r.mu_sampled = sampled_mu(dm.m, seed);
    r.property1 = check_property1(dm.m, spec.beta);
    r.property2 = check_property2(dm.m);
    r.property3 = check_property3(symmetrize(dm.m.transpose() * dm.m), spec.beta);
    if (spec.kind == FairnessKind::Asym || spec.kind == FairnessKind::Custom) r.class_f = check_class_F(spec, dm);

    const Mat& a1 = s.groups[0].cost;
    const Mat& a2 = s.groups[1].cost;
    const Mat& p1 = s.groups[0].projector;
    const Mat& p2 = s.groups[1].projector;
    if ((a1 - a2).norm() <= tol::frobenius) {
        Mat mu = s.desirability_matrix() * solve_pd(a1, Mat(s.contribution.entries.transpose() * (p1 - p2)));
        r.notes.push_back("uniform costs: sigma_d(Pi_D A^-1 C^T (Pi1 - Pi2)) = " + std::to_string(sigma_min(mu)));
    }
    if ((p1 - p2).norm() <= tol::frobenius) {
        bool full = sigma_min(p1) > 0.5;
        bool ordered = lambda_min(Mat(a2 - a1)) > tol::pd;
        r.notes.push_back(std::string("uniform information: projector ") + (full ? "full rank" : "rank deficient") +
                          ", A2 - A1 " + (ordered ? "PD" : "not PD"));
    }
    return r;
}

}  // namespace fairstack
