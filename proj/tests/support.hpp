#pragma once

#include <functional>
#include <vector>

#include "fairstack/fairstack.hpp"

namespace fstest {

using namespace fairstack;

inline Vec Vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

inline CausalGraph random_dag(std::size_t d, double p, Stream& st) {
    CausalGraph g;
    g.node_count = d;
    std::vector<std::size_t> perm(d);
    for (std::size_t i = 0; i < d; ++i) perm[i] = i;
    for (std::size_t i = d; i > 1; --i) std::swap(perm[i - 1], perm[st.below(i)]);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a + 1; b < d; ++b)
            if (st.uniform() < p) g.edges.push_back({perm[a], perm[b], st.uniform(0.0, 1.0)});
    return g;
}

// Independent oracle: enumerate every simple path j -> i and sum its edge weights.
inline Mat contribution_by_paths(const CausalGraph& g) {
    const std::size_t d = g.node_count;
    Mat c = Mat::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    std::function<void(std::size_t, std::size_t, double, std::vector<char>&)> walk =
        [&](std::size_t start, std::size_t at, double acc, std::vector<char>& on) {
            for (const Edge& e : g.edges) {
                if (e.source != at || on[e.target]) continue;
                double w = acc + e.weight;
                c(static_cast<Eigen::Index>(e.target), static_cast<Eigen::Index>(start)) += w;
                on[e.target] = 1;
                walk(start, e.target, w, on);
                on[e.target] = 0;
            }
        };
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<char> on(d, 0);
        on[j] = 1;
        walk(j, j, 0.0, on);
    }
    return c;
}

inline Mat random_projector(Eigen::Index d, Eigen::Index k, Stream& st) {
    Mat q = st.orthogonal(d).leftCols(k);
    return symmetrize(Mat(q * q.transpose()));
}

inline Mat random_pd_matrix(Eigen::Index d, Stream& st, double floor = 0.3) {
    Mat b = st.normal_mat(d, d);
    return symmetrize(Mat(b * b.transpose() / static_cast<double>(d) + floor * Mat::Identity(d, d)));
}

struct ScenarioOptions {
    double edge_probability = 0.4;
    bool full_rank = false;      // both projectors identity
    bool ground_truth_outside = false;
};

inline Scenario random_scenario(Eigen::Index d, Stream& st, const ScenarioOptions& o = {}) {
    Scenario s;
    s.contribution = build_contribution_matrix(random_dag(static_cast<std::size_t>(d), o.edge_probability, st));
    for (auto& g : s.groups) {
        g.cost = random_pd_matrix(d, st);
        Eigen::Index k = o.full_rank ? d : 1 + static_cast<Eigen::Index>(st.below(static_cast<std::uint64_t>(d)));
        g.projector = k == d ? Mat(Mat::Identity(d, d)) : random_projector(d, k, st);
        g.sampler.mean = Vec::Zero(d);
        g.sampler.factor = g.projector;
    }
    s.desirability = Vec(d);
    for (Eigen::Index i = 0; i < d; ++i) s.desirability(i) = st.uniform(0.3, 1.5);
    s.ground_truth = st.in_ball(d, 1.0);
    if (o.ground_truth_outside) s.ground_truth *= 2.5;
    return s;
}

// C = A_g = I, desirability (1, 3/4), projectors diag(1,0) / diag(0,1), w* = (1/2, 1/2).
inline Scenario worked_example() {
    Scenario s;
    s.contribution.entries = Mat::Identity(2, 2);
    s.groups[0].cost = Mat::Identity(2, 2);
    s.groups[1].cost = Mat::Identity(2, 2);
    s.groups[0].projector = Vec2(1.0, 0.0).asDiagonal();
    s.groups[1].projector = Vec2(0.0, 1.0).asDiagonal();
    s.desirability = Vec2(1.0, 0.75);
    s.ground_truth = Vec2(0.5, 0.5);
    return s;
}

}  // namespace fstest

namespace fstest {

// d = 4, nodes 0,1 desirable; edges only point into desirable nodes.
// Group 1 sees every coordinate, group 2 misses `missing`.
inline Scenario alignment_scenario(Eigen::Index missing, const Vec& w_star) {
    CausalGraph g;
    g.node_count = 4;
    g.edges = {{3, 0, 0.5}, {2, 1, 0.4}, {3, 1, 0.3}};
    Scenario s;
    s.contribution = build_contribution_matrix(g);
    s.desirability = desirability_vector(4, {0, 1});
    for (auto& gp : s.groups) gp.cost = Mat::Identity(4, 4);
    s.groups[0].projector = Mat::Identity(4, 4);
    Mat p = Mat::Identity(4, 4);
    p(missing, missing) = 0.0;
    s.groups[1].projector = p;
    s.ground_truth = w_star;
    return s;
}

}  // namespace fstest
