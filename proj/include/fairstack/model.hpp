#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "fairstack/linalg.hpp"

namespace fairstack {

inline constexpr std::size_t kMaxGraphNodes = 24;

struct Edge {
    std::size_t source = 0;
    std::size_t target = 0;
    double weight = 0.0;
};

struct CausalGraph {
    std::size_t node_count = 0;
    std::vector<Edge> edges;
};

struct ContributionMatrix {
    Mat entries;
};

// Sample model x = mean + factor * z with z standard normal.
struct Sampler {
    Vec mean;
    Mat factor;

    bool defined() const { return mean.size() > 0; }
};

struct GroupParams {
    Mat cost;
    Mat projector;
    Sampler sampler;
};

struct Scenario {
    ContributionMatrix contribution;
    std::array<GroupParams, 2> groups;
    Vec desirability;
    Vec ground_truth;
    bool allow_zero_desirability = false;

    Eigen::Index dim() const { return contribution.entries.rows(); }
    Mat desirability_matrix() const { return desirability.asDiagonal(); }
};

struct Policy {
    Vec weights;
    bool deployable = false;
};

inline Policy make_policy(const Vec& w) { return Policy{w, w.norm() <= 1.0 + tol::deployable}; }

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Throws on out-of-range nodes, self-loops, duplicates and negative weights.
inline void check_graph(const CausalGraph& g) {
    if (g.node_count == 0) throw Error(ErrorKind::Input, "graph has no nodes");
    if (g.node_count > kMaxGraphNodes)
        throw Error(ErrorKind::Capacity, "graph has " + std::to_string(g.node_count) + " nodes; cap is 24");
    std::vector<char> seen(g.node_count * g.node_count, 0);
    for (const Edge& e : g.edges) {
        if (e.source >= g.node_count || e.target >= g.node_count)
            throw Error(ErrorKind::Input, "edge " + std::to_string(e.source) + "->" + std::to_string(e.target) +
                                              " references a node outside [0, " + std::to_string(g.node_count) + ")");
        if (e.source == e.target)
            throw Error(ErrorKind::Structural, "self-loop on node " + std::to_string(e.source));
        if (!(e.weight >= 0.0) || !std::isfinite(e.weight))
            throw Error(ErrorKind::Input, "edge " + std::to_string(e.source) + "->" + std::to_string(e.target) +
                                              " has a negative or non-finite weight");
        char& s = seen[e.source * g.node_count + e.target];
        if (s) throw Error(ErrorKind::Structural, "duplicate edge " + std::to_string(e.source) + "->" +
                                                      std::to_string(e.target));
        s = 1;
    }
}

// Kahn's algorithm; smallest available index first.
inline std::vector<std::size_t> topological_order(const CausalGraph& g) {
    check_graph(g);
    const std::size_t d = g.node_count;
    std::vector<std::size_t> indeg(d, 0);
    std::vector<std::vector<std::size_t>> out(d);
    for (const Edge& e : g.edges) {
        ++indeg[e.target];
        out[e.source].push_back(e.target);
    }
    std::vector<std::size_t> order;
    std::vector<char> done(d, 0);
    while (order.size() < d) {
        std::size_t pick = d;
        for (std::size_t i = 0; i < d; ++i)
            if (!done[i] && indeg[i] == 0) {
                pick = i;
                break;
            }
        if (pick == d) throw Error(ErrorKind::Structural, "cycle detected in causal graph");
        done[pick] = 1;
        order.push_back(pick);
        for (std::size_t t : out[pick]) --indeg[t];
    }
    return order;
}

// C(i, j) = sum over directed paths p from j into i of the summed edge weights of p.
inline ContributionMatrix build_contribution_matrix(const CausalGraph& g) {
    const std::vector<std::size_t> order = topological_order(g);
    const std::size_t d = g.node_count;
    std::vector<std::vector<const Edge*>> in(d);
    for (const Edge& e : g.edges) in[e.target].push_back(&e);

    // count(i, j): number of paths j -> i; weight(i, j): summed path weights.
    Mat count = Mat::Identity(d, d);
    Mat weight = Mat::Zero(d, d);
    for (std::size_t v : order) {
        for (const Edge* e : in[v]) {
            const std::size_t u = e->source;
            for (std::size_t j = 0; j < d; ++j) {
                if (count(u, j) == 0.0) continue;
                count(v, j) += count(u, j);
                weight(v, j) += weight(u, j) + e->weight * count(u, j);
            }
        }
    }
    Mat c = weight;
    c.diagonal().setOnes();
    return ContributionMatrix{c};
}

inline ValidationReport validate_scenario(const Scenario& s) {
    ValidationReport r;
    auto& out = r.violations;
    const Eigen::Index d = s.contribution.entries.rows();
    if (d == 0 || s.contribution.entries.cols() != d) {
        out.push_back("contribution matrix is not square and nonempty");
        return r;
    }
    const Mat& c = s.contribution.entries;
    if (!all_finite(c)) out.push_back("contribution matrix has non-finite entries");
    else {
        if ((c.diagonal() - Vec::Ones(d)).cwiseAbs().maxCoeff() > tol::frobenius)
            out.push_back("contribution matrix diagonal is not all ones");
        if (sigma_min(c) <= tol::invertible) out.push_back("contribution matrix is not invertible");
    }
    for (int g = 0; g < 2; ++g) {
        const std::string name = "group " + std::to_string(g + 1);
        const GroupParams& gp = s.groups[static_cast<std::size_t>(g)];
        if (!is_square(gp.cost, d)) out.push_back(name + " cost matrix dimension mismatch");
        else if (!all_finite(gp.cost)) out.push_back(name + " cost matrix has non-finite entries");
        else {
            if (!is_symmetric(gp.cost)) out.push_back(name + " cost matrix not symmetric");
            double lmin = lambda_min(gp.cost);
            if (!(lmin > tol::pd)) out.push_back(name + " cost matrix not PD (lambda_min = " + std::to_string(lmin) + ")");
        }
        if (!is_square(gp.projector, d)) out.push_back(name + " projector dimension mismatch");
        else if (!all_finite(gp.projector)) out.push_back(name + " projector has non-finite entries");
        else {
            const Mat& p = gp.projector;
            if (!is_symmetric(p)) out.push_back(name + " projector not symmetric");
            double idem = (p * p - p).norm();
            if (idem > tol::frobenius)
                out.push_back(name + " projector not idempotent (|PP - P|_F = " + std::to_string(idem) + ")");
            else {
                Vec ev = sym_eigenvalues(p);
                for (Eigen::Index i = 0; i < ev.size(); ++i)
                    if (std::min(std::abs(ev[i]), std::abs(ev[i] - 1.0)) > 1e-6) {
                        out.push_back(name + " projector eigenvalues not in {0,1}");
                        break;
                    }
            }
        }
        if (gp.sampler.defined()) {
            if (gp.sampler.mean.size() != d) out.push_back(name + " sampler mean dimension mismatch");
            if (gp.sampler.factor.rows() != d) out.push_back(name + " sampler factor dimension mismatch");
        }
    }
    if (s.desirability.size() != d) out.push_back("desirability dimension mismatch");
    else {
        for (Eigen::Index i = 0; i < d; ++i) {
            double v = s.desirability[i];
            bool bad = s.allow_zero_desirability ? !(v >= 0.0) : !(v > 0.0);
            if (bad || !std::isfinite(v)) {
                out.push_back("desirability score " + std::to_string(i) + " not positive");
                break;
            }
        }
    }
    if (s.ground_truth.size() != d) out.push_back("ground truth dimension mismatch");
    else if (!s.ground_truth.allFinite()) out.push_back("ground truth has non-finite entries");
    return r;
}

inline void require_valid(const Scenario& s) {
    ValidationReport r = validate_scenario(s);
    if (!r.ok()) throw Error(ErrorKind::Structural, "invalid scenario: " + r.violations.front());
}

struct ProjectorResult {
    Mat projector;
    Eigen::Index rank = 0;       // k actually used
    Eigen::Index requested = 0;
    bool reduced = false;        // requested k exceeded the effective rank
};

// V_k V_k^T from the top-k right singular vectors of the sample rows.
inline ProjectorResult projector_from_samples(const Mat& rows, Eigen::Index k) {
    if (rows.rows() < 1 || rows.cols() < 1) throw Error(ErrorKind::Input, "sample matrix is empty");
    if (k < 1) throw Error(ErrorKind::Input, "projector rank k must be positive");
    if (!rows.allFinite()) throw Error(ErrorKind::Input, "sample matrix has non-finite entries");
    const Eigen::Index d = rows.cols();
    Eigen::JacobiSVD<Mat> svd(rows, Eigen::ComputeFullV);
    const Vec& s = svd.singularValues();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > tol::pinv_rel * s(0) && s(i) > 0.0) ++rank;
    ProjectorResult r;
    r.requested = k;
    r.rank = std::min(k, rank);
    r.reduced = r.rank < k;
    Mat v = svd.matrixV().leftCols(r.rank);
    r.projector = r.rank == 0 ? Mat(Mat::Zero(d, d)) : Mat(v * v.transpose());
    r.projector = symmetrize(r.projector);
    return r;
}

}  // namespace fairstack
