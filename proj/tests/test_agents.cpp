#include <gtest/gtest.h>

#include "support.hpp"

using namespace fstest;

namespace {

GroupParams identity_group(Eigen::Index d, double cost = 1.0) {
    GroupParams g;
    g.cost = cost * Mat::Identity(d, d);
    g.projector = Mat::Identity(d, d);
    return g;
}

ContributionMatrix identity_c(Eigen::Index d) { return ContributionMatrix{Mat::Identity(d, d)}; }

}  // namespace

TEST(PeerEstimate, ClosedForm) {
    EXPECT_LE((peer_estimate_closed_form(Vec2(1, 0).asDiagonal(), Vec2(0.3, 0.9)) - Vec2(0.3, 0)).norm(), 1e-15);
    Vec w = Vec2(-0.2, 0.7);
    EXPECT_EQ(peer_estimate_closed_form(Mat::Identity(2, 2), w), w);
    Vec v = Vec2(1, 1) / std::sqrt(2.0);
    Mat p = v * v.transpose();
    EXPECT_LE((peer_estimate_closed_form(p, Vec2(1, 0)) - Vec2(0.5, 0.5)).norm(), 1e-15);

    PeerDataset peers;
    peers.features = Mat(3, 2);
    peers.features << 1, 1, 2, 2, -1, -1;
    peers.scores = peers.features * Vec2(1, 0);
    EXPECT_LE((peer_estimate_erm(peers) - Vec2(0.5, 0.5)).norm(), 1e-12);
}

TEST(PeerEstimate, ErmMinNormCompletion) {
    PeerDataset peers;
    peers.features = Mat(1, 2);
    peers.features << 1, 0;
    peers.scores = Vec::Constant(1, 0.7);
    EXPECT_LE((peer_estimate_erm(peers) - Vec2(0.7, 0)).norm(), 1e-15);
}

TEST(PeerEstimate, ErmEqualsRowspaceProjection) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Stream st(seed, 11);
        Eigen::Index d = 2 + static_cast<Eigen::Index>(st.below(5));
        Eigen::Index k = 1 + static_cast<Eigen::Index>(st.below(static_cast<std::uint64_t>(d)));
        Mat x = st.normal_mat(20, k) * st.normal_mat(k, d);
        Vec w = st.in_ball(d);
        PeerDataset peers{x, x * w};
        Mat p = projector_from_samples(x, d).projector;
        ASSERT_LE((peer_estimate_erm(peers) - p * w).cwiseAbs().maxCoeff(), 1e-8) << "seed " << seed;
    }
}

TEST(PeerEstimate, SampledPeersRecoverGroupProjector) {
    Stream st(3, 12);
    Mat p = random_projector(5, 3, st);
    Sampler s{Vec::Zero(5), p};
    Vec w = st.in_ball(5);
    PeerDataset peers = sample_peers(s, 40, w, 17);
    EXPECT_LE((peer_estimate_erm(peers) - p * w).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_THROW(peer_estimate_erm(PeerDataset{Mat::Zero(2, 2), Vec::Zero(3)}), Error);
}

TEST(BestResponse, Examples) {
    auto c = identity_c(2);
    EXPECT_LE((best_response_effort(Vec2(0.2, -0.5), identity_group(2), c) - Vec2(0.2, -0.5)).norm(), 1e-15);
    EXPECT_LE((best_response_effort(Vec2(1, 0), identity_group(2, 2.0), c) - Vec2(0.5, 0)).norm(), 1e-15);
    Vec w = Vec2(0.3, -0.4);
    Vec xe = best_response_effort(w, identity_group(2, 0.5), c);
    EXPECT_LE((xe - 2 * w).norm(), 1e-14);

    // Grid oracle for the cheap-cost group: maximize utility over x_e on a dense square.
    double best = -1e300;
    Vec arg(2);
    for (int i = -400; i <= 400; ++i)
        for (int j = -400; j <= 400; ++j) {
            Vec z = Vec2(i / 400.0, j / 400.0);
            double u = agent_utility(Vec::Zero(2), z, identity_group(2, 0.5), c, w);
            if (u > best) best = u, arg = z;
        }
    EXPECT_LE((arg - 2 * w).norm(), 2.0 / 400.0);
}

TEST(BestResponse, AlteredFeaturesAndUtility) {
    Vec x = Vec2(0.1, 0.2);
    EXPECT_EQ(altered_features(x, Vec::Zero(2), identity_c(2)), x);
    EXPECT_EQ(altered_features(x, Vec2(1, 2), identity_c(2)), x + Vec2(1, 2));
    CausalGraph g;
    g.node_count = 3;
    g.edges = {{0, 1, 0.5}, {1, 2, 0.25}};
    Vec e0 = Vec::Zero(3);
    e0(0) = 1.0;
    Vec shift = altered_features(Vec::Zero(3), e0, build_contribution_matrix(g));
    Vec expected(3);
    expected << 1, 0.5, 0.75;
    EXPECT_LE((shift - expected).norm(), 1e-15);

    EXPECT_DOUBLE_EQ(agent_utility(Vec::Zero(2), Vec2(1, 0), identity_group(2), identity_c(2), Vec2(1, 0)), 0.5);
    GroupParams half;
    half.cost = Mat::Identity(2, 2);
    half.projector = Vec2(1, 0).asDiagonal();
    EXPECT_DOUBLE_EQ(agent_utility(x, Vec::Zero(2), half, identity_c(2), Vec2(0.5, 3)), 0.05);
}

TEST(BestResponse, StationaryLocallyOptimalLinear) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Stream st(seed, 13);
        Eigen::Index d = 2 + static_cast<Eigen::Index>(st.below(5));
        Scenario s = random_scenario(d, st);
        const GroupParams& g = s.groups[seed % 2];
        Vec w1 = st.in_ball(d), w2 = st.in_ball(d);
        Vec xe = best_response_effort(w1, g, s.contribution);
        Vec grad = s.contribution.entries.transpose() * g.projector * w1 - g.cost * xe;
        ASSERT_LE(grad.cwiseAbs().maxCoeff(), 1e-10);
        double a = st.normal(), b = st.normal();
        Vec lin = best_response_effort(a * w1 + b * w2, g, s.contribution) -
                  (a * xe + b * best_response_effort(w2, g, s.contribution));
        ASSERT_LE(lin.cwiseAbs().maxCoeff(), 1e-10);
        if (seed < 5) {
            Vec x = st.normal_vec(d);
            double u0 = agent_utility(x, xe, g, s.contribution, w1);
            for (int k = 0; k < 1000; ++k)
                ASSERT_GE(u0, agent_utility(x, xe + 1e-3 * st.unit_vec(d), g, s.contribution, w1));
            auto br = best_response(x, w1, g, s.contribution);
            ASSERT_EQ(br.altered_features, x + s.contribution.entries * xe);
        }
    }
}
