#pragma once

#include <cmath>
#include <cstdint>

#include "fairstack/agents.hpp"

namespace fairstack {

enum class Objective { Acc, Sw };

inline const char* to_string(Objective o) { return o == Objective::Acc ? "acc" : "sw"; }

struct SwCoefficient {
    Vec vector;
};

inline double accuracy_value(const Vec& w, const Vec& w_star) {
    require_dim(w.size(), w_star.size(), "policy");
    Vec diff = w_star - w;
    return -compensated_dot(diff, diff);
}

// (C A1^{-1} C^T Pi1 + C A2^{-1} C^T Pi2)^T w*.
inline SwCoefficient sw_coefficient(const Scenario& s) {
    const Mat& c = s.contribution.entries;
    Mat sum = Mat::Zero(c.rows(), c.cols());
    for (const GroupParams& g : s.groups) sum += c * solve_pd(g.cost, Mat(c.transpose() * g.projector));
    return SwCoefficient{sum.transpose() * s.ground_truth};
}

inline double sw_value(const Vec& w, const SwCoefficient& coeff) {
    require_dim(w.size(), coeff.vector.size(), "policy");
    return compensated_dot(coeff.vector, w);
}

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    Eigen::Index n = 0;
    std::uint64_t seed = 0;
};

namespace detail {

// Sum over groups of per-group sample means of integrand(x', g).
template <class F>
MonteCarloEstimate monte_carlo(const Scenario& s, const Vec& w, Eigen::Index n, std::uint64_t seed, F integrand) {
    if (n < 2) throw Error(ErrorKind::Input, "Monte Carlo needs at least 2 draws");
    MonteCarloEstimate est;
    est.n = n;
    est.seed = seed;
    double var = 0.0;
    for (int g = 0; g < 2; ++g) {
        const GroupParams& gp = s.groups[static_cast<std::size_t>(g)];
        Vec x_e = best_response_effort(w, gp, s.contribution);
        Vec shift = s.contribution.entries * x_e;
        Mat x = sample_features(gp.sampler, n, derive_seed(seed, static_cast<std::uint64_t>(g)));
        CompensatedSum sum, sq;
        for (Eigen::Index i = 0; i < n; ++i) {
            Vec xp = x.row(i).transpose() + shift;
            double v = integrand(xp);
            sum.add(v);
            sq.add(v * v);
        }
        double m = sum.value() / static_cast<double>(n);
        double sv = std::max(0.0, (sq.value() - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
        est.mean += m;
        var += sv / static_cast<double>(n);
    }
    est.std_error = std::sqrt(var);
    return est;
}

}  // namespace detail

// Sum_g E[x'^T w*], constant terms included.
inline MonteCarloEstimate monte_carlo_sw(const Scenario& s, const Vec& w, Eigen::Index n, std::uint64_t seed) {
    const Vec& ws = s.ground_truth;
    return detail::monte_carlo(s, w, n, seed, [&](const Vec& xp) { return xp.dot(ws); });
}

// -Sum_g E[(w*^T x' - w^T x')^2]. Diagnostic only.
inline MonteCarloEstimate monte_carlo_acc_diagnostic(const Scenario& s, const Vec& w, Eigen::Index n,
                                                     std::uint64_t seed) {
    Vec diff = s.ground_truth - w;
    MonteCarloEstimate e = detail::monte_carlo(s, w, n, seed, [&](const Vec& xp) {
        double r = diff.dot(xp);
        return r * r;
    });
    e.mean = -e.mean;
    return e;
}

}  // namespace fairstack
