#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "matchals/index_map.hpp"
#include "matchals/types.hpp"

namespace matchals {

/// Euclidean projection of d onto { x : 0 <= x_i <= 1, sum x_i = target }.
/// Solved by bisection on the shift theta in x = clamp(d - theta, 0, 1),
/// whose coordinate sum is continuous and non-increasing in theta.
inline Eigen::VectorXd capped_simplex_project(const Eigen::VectorXd& d, double target) {
    const int m = static_cast<int>(d.size());
    if (target < 0.0 || target > static_cast<double>(m)) {
        throw std::invalid_argument("capped simplex target outside [0, dimension]");
    }
    if (!d.allFinite()) {
        throw std::invalid_argument("capped simplex input must be finite");
    }
    if (target == static_cast<double>(m)) {
        return Eigen::VectorXd::Ones(m);
    }
    if (target == 0.0) {
        return Eigen::VectorXd::Zero(m);
    }
    const auto sum_at = [&](double theta) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) {
            s += std::clamp(d[i] - theta, 0.0, 1.0);
        }
        return s;
    };
    double lo = d.minCoeff() - 1.0;  // sum = m >= target
    double hi = d.maxCoeff();        // sum = 0 <= target
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (sum_at(mid) >= target) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-15 * std::max(1.0, std::abs(lo))) break;
    }
    const double theta = 0.5 * (lo + hi);
    Eigen::VectorXd x(m);
    for (int i = 0; i < m; ++i) {
        x[i] = std::clamp(d[i] - theta, 0.0, 1.0);
    }
    return x;
}

/// Euclidean projection of Z onto the solver's feasible set: symmetric
/// matrices with entries in [0, 1], identity-free within-image blocks
/// (off-diagonal entries of each diagonal block are zero), and diagonal
/// summing to m_prime.
///
/// The set is closed under transposition, so projecting the symmetric part
/// is exact; the remaining constraints act on disjoint entry groups.
inline Eigen::MatrixXd project_to_constraints(const Eigen::MatrixXd& Z,
                                              const FeatureIndexMap& index,
                                              double m_prime) {
    const int m = index.total();
    if (Z.rows() != m || Z.cols() != m) {
        throw std::invalid_argument("matrix shape does not match the feature index");
    }
    if (m_prime <= 0.0 || m_prime > static_cast<double>(m)) {
        throw std::invalid_argument("diagonal sum target outside (0, size]");
    }
    Eigen::MatrixXd X = 0.5 * (Z + Z.transpose());

    for (int i = 0; i < index.images(); ++i) {
        const int off = index.offset(i);
        const int p = index.features(i);
        auto block = X.block(off, off, p, p);
        const Eigen::VectorXd diag = block.diagonal();
        block.setZero();
        block.diagonal() = diag;
    }

    const Eigen::VectorXd diag = capped_simplex_project(X.diagonal(), m_prime);
    X = X.cwiseMax(0.0).cwiseMin(1.0);
    X.diagonal() = diag;
    return X;
}

}  // namespace matchals
