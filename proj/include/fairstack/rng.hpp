#pragma once

#include <cmath>
#include <cstdint>

#include "fairstack/linalg.hpp"

namespace fairstack {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

// Counter-based stream: the i-th output is a pure function of (key, i).
class Stream {
public:
    explicit Stream(std::uint64_t seed, std::uint64_t stream = 0) : key_(derive_seed(seed, stream)) {}

    std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Box-Muller; the second variate is discarded to keep outputs position-independent.
    double normal() {
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Vec normal_vec(Eigen::Index d) {
        Vec v(d);
        for (Eigen::Index i = 0; i < d; ++i) v[i] = normal();
        return v;
    }

    Vec unit_vec(Eigen::Index d) {
        Vec v = normal_vec(d);
        double n = v.norm();
        while (n == 0.0) {
            v = normal_vec(d);
            n = v.norm();
        }
        return v / n;
    }

    // Uniform in the ball of radius r.
    Vec in_ball(Eigen::Index d, double r = 1.0) {
        return unit_vec(d) * (r * std::pow(uniform(), 1.0 / static_cast<double>(d)));
    }

    Mat normal_mat(Eigen::Index r, Eigen::Index c) {
        Mat m(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal();
        return m;
    }

    // Haar-ish orthogonal matrix via QR of a Gaussian matrix.
    Mat orthogonal(Eigen::Index d) {
        Eigen::HouseholderQR<Mat> qr(normal_mat(d, d));
        Mat q = qr.householderQ();
        Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (Eigen::Index i = 0; i < d; ++i)
            if (r(i, i) < 0) q.col(i) = -q.col(i);
        return q;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace fairstack
