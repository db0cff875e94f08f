#pragma once

#include <cstdint>

#include "fairstack/model.hpp"
#include "fairstack/rng.hpp"

namespace fairstack {

struct PeerDataset {
    Mat features;  // N x d
    Vec scores;    // N
};

struct BestResponse {
    Vec exogenous_effort;
    Vec altered_features;
    double utility = 0.0;
};

inline Vec peer_estimate_closed_form(const Mat& projector, const Vec& w) {
    require_dim(projector.cols(), w.size(), "policy");
    return projector * w;
}

// Minimum-norm least-squares solution of features * w = scores.
inline Vec peer_estimate_erm(const PeerDataset& peers) {
    if (peers.features.rows() != peers.scores.size())
        throw Error(ErrorKind::Input, "peer features and scores have different row counts");
    if (peers.features.rows() == 0) return Vec::Zero(peers.features.cols());
    return pinv(peers.features) * peers.scores;
}

// A_g^{-1} C^T Pi_g w.
inline Vec best_response_effort(const Vec& w, const GroupParams& g, const ContributionMatrix& c) {
    require_dim(w.size(), c.entries.rows(), "policy");
    return solve_pd(g.cost, Vec(c.entries.transpose() * (g.projector * w)));
}

inline Vec altered_features(const Vec& x, const Vec& x_e, const ContributionMatrix& c) {
    require_dim(x.size(), c.entries.rows(), "features");
    require_dim(x_e.size(), c.entries.rows(), "effort");
    return x + c.entries * x_e;
}

inline double agent_utility(const Vec& x, const Vec& x_e, const GroupParams& g, const ContributionMatrix& c,
                            const Vec& w) {
    Vec est = g.projector * w;
    return est.dot(altered_features(x, x_e, c)) - 0.5 * x_e.dot(g.cost * x_e);
}

inline BestResponse best_response(const Vec& x, const Vec& w, const GroupParams& g, const ContributionMatrix& c) {
    BestResponse r;
    r.exogenous_effort = best_response_effort(w, g, c);
    r.altered_features = altered_features(x, r.exogenous_effort, c);
    r.utility = agent_utility(x, r.exogenous_effort, g, c, w);
    return r;
}

// Draw n rows x = mean + factor z. Row i uses its own derived stream.
inline Mat sample_features(const Sampler& s, Eigen::Index n, std::uint64_t seed) {
    if (!s.defined()) throw Error(ErrorKind::Contract, "group sampler is not defined");
    Mat x(n, s.mean.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        Stream st(seed, static_cast<std::uint64_t>(i));
        x.row(i) = (s.mean + s.factor * st.normal_vec(s.factor.cols())).transpose();
    }
    return x;
}

// Peers scored by the deployed rule; optional additive score noise for diagnostics.
inline PeerDataset sample_peers(const Sampler& s, Eigen::Index n, const Vec& w, std::uint64_t seed,
                                double noise_sd = 0.0) {
    PeerDataset p;
    p.features = sample_features(s, n, seed);
    p.scores = p.features * w;
    if (noise_sd > 0.0) {
        Stream st(seed, 0xa11ce);
        for (Eigen::Index i = 0; i < n; ++i) p.scores[i] += noise_sd * st.normal();
    }
    return p;
}

}  // namespace fairstack
