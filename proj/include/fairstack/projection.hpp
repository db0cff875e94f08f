#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "fairstack/linalg.hpp"

namespace fairstack {

inline Vec project_onto_ball(const Vec& v, double r = 1.0) { return clip_to_ball(v, r); }

inline Vec project_onto_halfspace(const Vec& v, const Vec& a, double b) {
    double an = a.squaredNorm();
    double viol = a.dot(v) - b;
    if (viol <= 0.0 || an == 0.0) return v;
    return v - (viol / an) * a;
}

struct EllipsoidProjection {
    Vec point;
    double multiplier = 0.0;
    int iterations = 0;
};

// argmin |v - w| s.t. w^T Q w <= beta, for symmetric PSD Q. Newton on the secular
// equation 1/sqrt(g(mu)) = 1/sqrt(beta), g(mu) = sum l_i y_i^2 / (1 + mu l_i)^2.
inline EllipsoidProjection project_onto_ellipsoid_ex(const Vec& v, const Mat& q, double beta) {
    require_dim(v.size(), q.rows(), "point");
    if (!is_square(q, v.size())) throw Error(ErrorKind::Input, "ellipsoid matrix is not square");
    if (!(beta >= 0.0)) throw Error(ErrorKind::Input, "ellipsoid level must be nonnegative");
    EllipsoidProjection out;
    if (v.dot(q * v) <= beta) {
        out.point = v;
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(q));
    Vec lam = es.eigenvalues();
    const double lmax = std::max(lam(lam.size() - 1), 0.0);
    if (lam(0) < -tol::pd * std::max(1.0, lmax))
        throw Error(ErrorKind::Contract, "ellipsoid matrix is not positive semidefinite");
    const Mat& u = es.eigenvectors();
    Vec y = u.transpose() * v;
    const double zero_cut = 1e-14 * std::max(1.0, lmax);
    for (Eigen::Index i = 0; i < lam.size(); ++i)
        if (lam(i) < zero_cut) lam(i) = 0.0;

    if (beta == 0.0) {
        Vec z = y;
        for (Eigen::Index i = 0; i < lam.size(); ++i)
            if (lam(i) > 0.0) z(i) = 0.0;
        out.point = u * z;
        return out;
    }

    auto g = [&](double mu, double* dg) {
        CompensatedSum s, ds;
        for (Eigen::Index i = 0; i < lam.size(); ++i) {
            if (lam(i) == 0.0) continue;
            double den = 1.0 + mu * lam(i);
            double t = lam(i) * y(i) * y(i) / (den * den);
            s.add(t);
            ds.add(-2.0 * lam(i) * t / den);
        }
        if (dg) *dg = ds.value();
        return s.value();
    };

    double hi_sq = 0.0;
    for (Eigen::Index i = 0; i < lam.size(); ++i)
        if (lam(i) > 0.0) hi_sq += y(i) * y(i) / lam(i);
    double lo = 0.0;
    double hi = std::sqrt(hi_sq / beta);
    const double target = 1.0 / std::sqrt(beta);
    double mu = 0.0;
    bool done = false;
    for (int it = 1; it <= 200; ++it) {
        out.iterations = it;
        double dg = 0.0;
        double gv = g(mu, &dg);
        double psi = 1.0 / std::sqrt(gv) - target;
        if (std::abs(gv - beta) <= 4e-16 * beta || hi - lo <= 4e-16 * hi) {
            done = true;
            break;
        }
        if (psi < 0.0) lo = mu;
        else hi = mu;
        double dpsi = -0.5 * dg / (gv * std::sqrt(gv));
        double next = dpsi > 0.0 ? mu - psi / dpsi : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == mu) {
            done = true;
            break;
        }
        mu = next;
    }
    if (!done) {
        double gv = g(mu, nullptr);
        throw Error(ErrorKind::Numeric, "ellipsoid projection did not converge in 200 Newton iterations (residual " +
                                            std::to_string(gv - beta) + ")");
    }
    Vec z(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) z(i) = y(i) / (1.0 + mu * lam(i));
    Vec w = u * z;
    double val = w.dot(q * w);
    if (val > beta) w *= std::sqrt(beta / val);
    out.point = w;
    out.multiplier = mu;
    return out;
}

inline Vec project_onto_ellipsoid(const Vec& v, const Mat& q, double beta) {
    return project_onto_ellipsoid_ex(v, q, beta).point;
}

struct ConvexSet {
    enum class Kind { Ball, Ellipsoid, Halfspace };
    Kind kind = Kind::Ball;
    double radius = 1.0;
    Mat q;
    double level = 0.0;
    Vec a;
    double b = 0.0;

    static ConvexSet ball(double r = 1.0) {
        ConvexSet s;
        s.kind = Kind::Ball;
        s.radius = r;
        return s;
    }
    static ConvexSet ellipsoid(const Mat& q, double level) {
        ConvexSet s;
        s.kind = Kind::Ellipsoid;
        s.q = q;
        s.level = level;
        return s;
    }
    static ConvexSet halfspace(const Vec& a, double b) {
        ConvexSet s;
        s.kind = Kind::Halfspace;
        s.a = a;
        s.b = b;
        return s;
    }

    Vec project(const Vec& v) const {
        switch (kind) {
            case Kind::Ball: return project_onto_ball(v, radius);
            case Kind::Ellipsoid: return project_onto_ellipsoid(v, q, level);
            case Kind::Halfspace: return project_onto_halfspace(v, a, b);
        }
        return v;
    }

    double violation(const Vec& v) const {
        switch (kind) {
            case Kind::Ball: return v.norm() - radius;
            case Kind::Ellipsoid: return v.dot(q * v) - level;
            case Kind::Halfspace: return a.dot(v) - b;
        }
        return 0.0;
    }
};

struct DykstraResult {
    Vec point;
    std::size_t sweeps = 0;
    bool converged = false;
    double last_change = 0.0;
};

inline DykstraResult project_intersection_dykstra(const Vec& v, const std::vector<ConvexSet>& sets,
                                                  double tolerance = 1e-10, std::size_t max_sweeps = 10000) {
    DykstraResult r;
    r.point = v;
    bool feasible = true;
    for (const ConvexSet& s : sets)
        if (s.violation(v) > 0.0) feasible = false;
    if (feasible || sets.empty()) {
        r.converged = true;
        return r;
    }
    std::vector<Vec> inc(sets.size(), Vec::Zero(v.size()));
    Vec x = v;
    for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
        Vec start = x;
        double inc_change = 0.0;
        for (std::size_t i = 0; i < sets.size(); ++i) {
            Vec y = sets[i].project(x + inc[i]);
            Vec next = x + inc[i] - y;
            inc_change += (next - inc[i]).squaredNorm();
            inc[i] = next;
            x = y;
        }
        r.sweeps = sweep;
        r.last_change = (x - start).norm();
        // the iterate can return to the same point while the increments still move
        if (r.last_change < tolerance && std::sqrt(inc_change) < tolerance) {
            r.converged = true;
            break;
        }
    }
    r.point = x;
    return r;
}

struct NnlsResult {
    Vec x;
    int iterations = 0;
    bool converged = false;
};

// Lawson-Hanson active set for min |E x - f| s.t. x >= 0.
inline NnlsResult nnls(const Mat& e, const Vec& f, int max_iterations = 0) {
    const Eigen::Index n = e.cols();
    if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 30);
    NnlsResult r;
    r.x = Vec::Zero(n);
    std::vector<char> passive(static_cast<std::size_t>(n), 0);
    std::vector<char> blocked(static_cast<std::size_t>(n), 0);
    const double scale = std::max(1.0, e.cwiseAbs().maxCoeff()) * std::max(1.0, f.cwiseAbs().maxCoeff());
    const double gtol = 1e-13 * scale * static_cast<double>(e.rows());

    auto solve_passive = [&](std::vector<Eigen::Index>& idx) {
        idx.clear();
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        Mat sub(e.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = e.col(idx[k]);
        Vec z = sub.colPivHouseholderQr().solve(f);
        return z;
    };

    std::vector<Eigen::Index> idx;
    for (int it = 0; it < max_iterations; ++it) {
        r.iterations = it + 1;
        Vec grad = e.transpose() * (f - e * r.x);
        Eigen::Index pick = -1;
        double best = gtol;
        for (Eigen::Index j = 0; j < n; ++j) {
            auto sj = static_cast<std::size_t>(j);
            if (passive[sj] || blocked[sj]) continue;
            if (grad(j) > best) {
                best = grad(j);
                pick = j;
            }
        }
        if (pick < 0) {
            r.converged = true;
            return r;
        }
        passive[static_cast<std::size_t>(pick)] = 1;
        Vec before = r.x;
        for (int inner = 0; inner < 3 * n + 30; ++inner) {
            Vec z = solve_passive(idx);
            bool positive = true;
            for (Eigen::Index k = 0; k < z.size(); ++k)
                if (!(z(k) > 0.0)) positive = false;
            if (positive) {
                r.x.setZero();
                for (std::size_t k = 0; k < idx.size(); ++k) r.x(idx[k]) = z(static_cast<Eigen::Index>(k));
                break;
            }
            double alpha = 1.0;
            std::size_t hit = idx.size();
            for (std::size_t k = 0; k < idx.size(); ++k) {
                double zk = z(static_cast<Eigen::Index>(k));
                if (zk <= 0.0) {
                    double xk = r.x(idx[k]);
                    double den = xk - zk;
                    double a = den > 0.0 ? xk / den : 0.0;
                    if (hit == idx.size() || a < alpha) {
                        alpha = a;
                        hit = k;
                    }
                }
            }
            for (std::size_t k = 0; k < idx.size(); ++k) {
                double& xk = r.x(idx[k]);
                xk += alpha * (z(static_cast<Eigen::Index>(k)) - xk);
                if (k == hit || xk <= 0.0) {
                    xk = 0.0;
                    passive[static_cast<std::size_t>(idx[k])] = 0;
                }
            }
            bool any = false;
            for (char p : passive) any = any || p;
            if (!any) break;
        }
        if ((r.x - before).norm() == 0.0) blocked[static_cast<std::size_t>(pick)] = 1;
        else std::fill(blocked.begin(), blocked.end(), 0);
    }
    return r;
}

// min |x| s.t. G x >= h (Lawson-Hanson least distance programming).
inline Vec least_distance(const Mat& g, const Vec& h) {
    const Eigen::Index m = g.rows();
    const Eigen::Index n = g.cols();
    if (h.size() != m) throw Error(ErrorKind::Input, "constraint rows and right-hand side disagree");
    if (m == 0 || h.maxCoeff() <= 0.0) return Vec::Zero(n);
    Mat e(n + 1, m);
    e.topRows(n) = g.transpose();
    e.row(n) = h.transpose();
    Vec f = Vec::Zero(n + 1);
    f(n) = 1.0;
    NnlsResult u = nnls(e, f);
    Vec res = e * u.x - f;
    if (!u.converged) throw Error(ErrorKind::Numeric, "least-distance solve did not converge");
    if (res.norm() <= 1e-14 || res(n) >= 0.0) throw Error(ErrorKind::Numeric, "polyhedron is empty");
    return -res.head(n) / res(n);
}

// Exact Euclidean projection onto {w : rows w <= rhs}.
inline Vec project_onto_polyhedron(const Vec& v, const Mat& rows, const Vec& rhs) {
    require_dim(v.size(), rows.cols(), "point");
    Vec slack = rows * v - rhs;
    if (slack.size() == 0 || slack.maxCoeff() <= 0.0) return v;
    Vec x = least_distance(-rows, slack);
    return v + x;
}

}  // namespace fairstack
