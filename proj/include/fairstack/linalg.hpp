#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "fairstack/error.hpp"

namespace fairstack {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace tol {
inline constexpr double frobenius = 1e-8;   // matrix equality / idempotence
inline constexpr double pd = 1e-10;         // smallest eigenvalue for PD
inline constexpr double invertible = 1e-10; // smallest singular value
inline constexpr double pinv_rel = 1e-10;   // relative SVD cutoff
inline constexpr double fair = 1e-12;       // is_beta_fair slack
inline constexpr double deployable = 1e-9;  // policy norm slack
inline constexpr double feasible = 1e-8;    // solver feasibility
}  // namespace tol

// Neumaier summation.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_dot(const Vec& a, const Vec& b) {
    CompensatedSum s;
    for (Eigen::Index i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
    return s.value();
}

inline double compensated_norm(const Vec& a) { return std::sqrt(compensated_dot(a, a)); }

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Ascending eigenvalues of the symmetric part.
inline Vec sym_eigenvalues(const Mat& m) {
    if (m.size() == 0) return Vec();
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline double lambda_min(const Mat& m) { return sym_eigenvalues(m)(0); }
inline double lambda_max(const Mat& m) {
    Vec ev = sym_eigenvalues(m);
    return ev(ev.size() - 1);
}

// Descending singular values.
inline Vec singular_values(const Mat& m) {
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues();
}

inline double sigma_min(const Mat& m) {
    Vec s = singular_values(m);
    return s.size() == 0 ? 0.0 : s(s.size() - 1);
}

inline bool is_square(const Mat& m, Eigen::Index d) { return m.rows() == d && m.cols() == d; }

inline bool is_symmetric(const Mat& m, double eps = tol::frobenius) {
    return m.rows() == m.cols() && (m - m.transpose()).norm() <= eps;
}

inline bool is_pd(const Mat& m) { return is_symmetric(m) && lambda_min(m) > tol::pd; }

inline bool all_finite(const Mat& m) { return m.allFinite(); }

// Min-norm least-squares solution operator.
inline Mat pinv(const Mat& a) {
    if (a.size() == 0) return Mat::Zero(a.cols(), a.rows());
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    const double cut = tol::pinv_rel * s(0);
    Vec inv = Vec::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cut && s(i) > 0.0) inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// sqrt(c^T Q^{-1} c) for PD Q.
inline double norm_q_inv(const Vec& c, const Mat& q) {
    Eigen::LLT<Mat> llt(symmetrize(q));
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::Numeric, "matrix is not positive definite");
    Vec y = llt.matrixL().solve(c);
    return compensated_norm(y);
}

inline Vec solve_pd(const Mat& a, const Vec& b) {
    Eigen::LLT<Mat> llt(symmetrize(a));
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::Structural, "cost matrix is not positive definite");
    return llt.solve(b);
}

inline Mat solve_pd(const Mat& a, const Mat& b) {
    Eigen::LLT<Mat> llt(symmetrize(a));
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::Structural, "cost matrix is not positive definite");
    return llt.solve(b);
}

inline Vec clip_to_ball(const Vec& v, double r = 1.0) {
    double n = v.norm();
    return n > r ? Vec(v * (r / n)) : v;
}

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want)
        throw Error(ErrorKind::Input, std::string(what) + " has dimension " + std::to_string(got) +
                                          ", expected " + std::to_string(want));
}

}  // namespace fairstack
