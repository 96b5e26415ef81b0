#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "matchals/errors.hpp"
#include "matchals/hungarian.hpp"
#include "matchals/index_map.hpp"
#include "matchals/types.hpp"

namespace matchals {

struct SpectralConfig {
    int r = 0;  // number of leading eigenvectors (assumed universe size)
    std::optional<int> anchor;  // rounding reference; default: image with most features

    void validate(const FeatureIndexMap& index) const {
        if (r < 1 || r > index.total()) {
            throw std::invalid_argument("r must be in [1, m]");
        }
        if (anchor && (*anchor < 0 || *anchor >= index.images())) {
            throw std::invalid_argument("anchor image out of range");
        }
    }
};

/// Leading r eigenvectors of the symmetrized score matrix, each column
/// scaled by the square root of its eigenvalue, ordered by decreasing
/// eigenvalue. Requires the top r eigenvalues to be nonnegative (up to
/// relative roundoff).
inline Eigen::MatrixXd spectral_embed(const AffinityInput& S, int r) {
    S.validate();
    const int m = S.index.total();
    if (r < 1 || r > m) {
        throw std::invalid_argument("r must be in [1, m]");
    }
    const Eigen::MatrixXd sym = 0.5 * (S.scores + S.scores.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) {
        throw NumericError("eigendecomposition failed");
    }
    const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
    const double tol = 1e-9 * std::max(1.0, values.cwiseAbs().maxCoeff());
    Eigen::MatrixXd U(m, r);
    for (int c = 0; c < r; ++c) {
        const int src = m - 1 - c;
        const double value = values[src];
        if (value < -tol) {
            throw DegenerateSpectrumError("fewer than r nonnegative eigenvalues");
        }
        U.col(c) = eig.eigenvectors().col(src) * std::sqrt(std::max(value, 0.0));
    }
    return U;
}

/// Rounds a spectral embedding to a consistent joint match matrix: each
/// image's rows are assigned to the anchor's label space by Hungarian on
/// U_i U_anchor^T, and blocks are rebuilt as X_ij = P_i P_j^T. Invariant to
/// any orthogonal mixing of U's columns.
inline JointMatchMatrix assemble_from_embedding(const Eigen::MatrixXd& U,
                                                const FeatureIndexMap& index, int anchor) {
    if (U.rows() != index.total()) {
        throw std::invalid_argument("embedding row count does not match index map");
    }
    if (anchor < 0 || anchor >= index.images()) {
        throw std::invalid_argument("anchor image out of range");
    }
    const int n = index.images();
    const Eigen::MatrixXd U_anchor =
        U.middleRows(index.offset(anchor), index.features(anchor));
    std::vector<Eigen::MatrixXd> P(n);
    for (int i = 0; i < n; ++i) {
        const Eigen::MatrixXd U_i = U.middleRows(index.offset(i), index.features(i));
        P[i] = hungarian_assign(U_i * U_anchor.transpose()).to_matrix();
    }
    JointMatchMatrix X = JointMatchMatrix::zeros(index);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            set_block(X.entries, index, i, j, P[i] * P[j].transpose());
        }
    }
    return X;
}

inline int default_anchor(const FeatureIndexMap& index) {
    int anchor = 0;
    for (int i = 1; i < index.images(); ++i) {
        if (index.features(i) > index.features(anchor)) anchor = i;
    }
    return anchor;
}

inline JointMatchMatrix spectral_solve(const AffinityInput& S, const SpectralConfig& config) {
    config.validate(S.index);
    const Eigen::MatrixXd U = spectral_embed(S, config.r);
    const int anchor = config.anchor.value_or(default_anchor(S.index));
    return assemble_from_embedding(U, S.index, anchor);
}

}  // namespace matchals
