#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace testutil {

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

inline Eigen::MatrixXd random_orthonormal(std::mt19937_64& rng, int n, int l) {
    Eigen::MatrixXd m(n, l);
    std::normal_distribution<double> g;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < l; ++j) m(i, j) = g(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    return qr.householderQ() * Eigen::MatrixXd::Identity(n, l);
}

}  // namespace testutil
