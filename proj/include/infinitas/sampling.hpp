#pragma once

#include <random>

#include <Eigen/Dense>

#include "infinitas/parallel.hpp"

namespace infinitas {

inline Eigen::VectorXd gaussian_vector(Rng& rng, Eigen::Index n) {
    std::normal_distribution<double> g;
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

inline Eigen::VectorXd uniform_on_sphere(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd v;
    do {
        v = gaussian_vector(rng, n);
    } while (v.norm() < 1e-12);
    return v.normalized();
}

/// Orthonormal n x k frame whose span is uniformly distributed on G(k, n):
/// QR of a Gaussian matrix with the signs of R's diagonal made positive.
inline Eigen::MatrixXd random_orthonormal_frame(Rng& rng, int n, int k) {
    Eigen::MatrixXd m(n, k);
    std::normal_distribution<double> g;
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < n; ++i) m(i, j) = g(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
    const Eigen::MatrixXd r = qr.matrixQR();
    for (int j = 0; j < k; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    return q;
}

}  // namespace infinitas
