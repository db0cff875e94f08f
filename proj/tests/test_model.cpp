#include <gtest/gtest.h>

#include "support.hpp"

using namespace fstest;

namespace {

CausalGraph graph3(std::vector<Edge> edges) {
    CausalGraph g;
    g.node_count = 3;
    g.edges = std::move(edges);
    return g;
}

}  // namespace

TEST(ContributionMatrix, EmptyGraphIsIdentity) {
    EXPECT_TRUE(build_contribution_matrix(graph3({})).entries.isApprox(Mat::Identity(3, 3)));
}

TEST(ContributionMatrix, ChainMatchesPathOracle) {
    CausalGraph g = graph3({{0, 1, 0.5}, {1, 2, 0.25}});
    Mat c = build_contribution_matrix(g).entries;
    Mat oracle = contribution_by_paths(g);
    EXPECT_LE((c - oracle).norm(), 1e-15);
    EXPECT_DOUBLE_EQ(c(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(c(2, 1), 0.25);
    EXPECT_DOUBLE_EQ(c(2, 0), 0.75);
    EXPECT_DOUBLE_EQ(c(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(c(0, 2), 0.0);
    EXPECT_DOUBLE_EQ(c(1, 2), 0.0);
}

TEST(ContributionMatrix, ParallelPathsAdd) {
    CausalGraph g = graph3({{0, 1, 0.5}, {0, 2, 0.1}, {1, 2, 0.25}});
    Mat c = build_contribution_matrix(g).entries;
    EXPECT_NEAR(c(2, 0), 0.85, 1e-15);
    EXPECT_LE((c - contribution_by_paths(g)).norm(), 1e-15);
}

TEST(ContributionMatrix, RandomDagsAgreeWithOracleAndAreInvertible) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Stream st(seed, 7);
        auto d = static_cast<std::size_t>(1 + st.below(8));
        CausalGraph g = random_dag(d, 0.5, st);
        Mat c = build_contribution_matrix(g).entries;
        ASSERT_LE((c - contribution_by_paths(g)).norm(), 1e-12) << "seed " << seed;
        for (std::size_t i = 0; i < d; ++i) ASSERT_EQ(c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)), 1.0);
        ASSERT_GT(sigma_min(c), 1e-10);
        auto order = topological_order(g);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a + 1; b < d; ++b)
                ASSERT_EQ(c(static_cast<Eigen::Index>(order[a]), static_cast<Eigen::Index>(order[b])), 0.0);
    }
}

TEST(ContributionMatrix, RelabelingConjugates) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Stream st(seed, 8);
        std::size_t d = 6;
        CausalGraph g = random_dag(d, 0.5, st);
        std::vector<std::size_t> perm(d);
        for (std::size_t i = 0; i < d; ++i) perm[i] = i;
        for (std::size_t i = d; i > 1; --i) std::swap(perm[i - 1], perm[st.below(i)]);
        CausalGraph h = g;
        for (Edge& e : h.edges) e = {perm[e.source], perm[e.target], e.weight};
        Mat p = Mat::Zero(6, 6);
        for (std::size_t i = 0; i < d; ++i) p(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(i)) = 1.0;
        Mat lhs = build_contribution_matrix(h).entries;
        Mat rhs = p * build_contribution_matrix(g).entries * p.transpose();
        ASSERT_LE((lhs - rhs).norm(), 1e-12);
    }
}

TEST(ContributionMatrix, StructuralErrors) {
    auto kind = [](const CausalGraph& g) {
        try {
            build_contribution_matrix(g);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::Io;
    };
    EXPECT_EQ(kind(graph3({{0, 1, 1.0}, {1, 2, 1.0}, {2, 0, 1.0}})), ErrorKind::Structural);
    EXPECT_EQ(kind(graph3({{1, 1, 1.0}})), ErrorKind::Structural);
    EXPECT_EQ(kind(graph3({{0, 1, 1.0}, {0, 1, 2.0}})), ErrorKind::Structural);
    EXPECT_EQ(kind(graph3({{0, 3, 1.0}})), ErrorKind::Input);
    EXPECT_EQ(kind(graph3({{0, 1, -1.0}})), ErrorKind::Input);
    CausalGraph big;
    big.node_count = 25;
    EXPECT_EQ(kind(big), ErrorKind::Capacity);
}

TEST(ValidateScenario, WorkedExampleIsValid) {
    EXPECT_TRUE(validate_scenario(worked_example()).ok());
}

TEST(ValidateScenario, NegativeEigenvalueCost) {
    Scenario s = worked_example();
    s.groups[0].cost = Vec2(1.0, -1.0).asDiagonal();
    auto r = validate_scenario(s);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_NE(r.violations[0].find("cost matrix not PD"), std::string::npos);
}

TEST(ValidateScenario, NonIdempotentProjector) {
    Scenario s = worked_example();
    s.groups[0].projector = Vec2(1.0, 0.5).asDiagonal();
    auto r = validate_scenario(s);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_NE(r.violations[0].find("projector not idempotent"), std::string::npos);
}

TEST(ValidateScenario, DesirabilityAndDimensions) {
    Scenario s = worked_example();
    s.desirability = Vec2(1.0, 0.0);
    EXPECT_FALSE(validate_scenario(s).ok());
    s.allow_zero_desirability = true;
    EXPECT_TRUE(validate_scenario(s).ok());
    s.ground_truth = Vec::Zero(3);
    EXPECT_FALSE(validate_scenario(s).ok());
    EXPECT_THROW(require_valid(s), Error);
}

TEST(Projector, OneDimensionalRowSpace) {
    Mat rows(2, 2);
    rows << 1, 0, 2, 0;
    auto r = projector_from_samples(rows, 1);
    EXPECT_LE((r.projector - Mat(Vec2(1, 0).asDiagonal())).norm(), 1e-12);
    EXPECT_FALSE(r.reduced);
}

TEST(Projector, FullSpanIsIdentity) {
    Mat rows(5, 2);
    rows << 1, 0, 0, 1, 2, 0, 0, -3, 1, 0;
    EXPECT_LE((projector_from_samples(rows, 2).projector - Mat::Identity(2, 2)).norm(), 1e-12);
}

TEST(Projector, ExcessRankIsReducedAndFlagged) {
    Mat rows(2, 3);
    rows << 1, 0, 0, 2, 0, 0;
    auto r = projector_from_samples(rows, 3);
    EXPECT_TRUE(r.reduced);
    EXPECT_EQ(r.rank, 1);
}

TEST(Projector, RandomLowRankSamples) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Stream st(seed, 9);
        Mat basis = st.normal_mat(4, 2);
        Mat rows = st.normal_mat(30, 2) * basis.transpose();
        Mat p = projector_from_samples(rows, 2).projector;
        ASSERT_LE((p * p - p).norm(), 1e-8);
        ASSERT_LE((p - p.transpose()).norm(), 1e-8);
        ASSERT_NEAR(p.trace(), 2.0, 1e-8);
        for (Eigen::Index i = 0; i < rows.rows(); ++i)
            ASSERT_LE((p * rows.row(i).transpose() - rows.row(i).transpose()).norm(), 1e-8);
    }
}

TEST(Policy, DeployableFlag) {
    EXPECT_TRUE(make_policy(Vec2(0.6, 0.8)).deployable);
    EXPECT_TRUE(make_policy(Vec2(0.6, 0.8) * (1.0 + 5e-10)).deployable);
    EXPECT_FALSE(make_policy(Vec2(0.6, 0.8) * 1.01).deployable);
}
