#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "matchals/index_map.hpp"

namespace matchals {

/// Dense symmetric m x m matrix of match values with per-image-pair block
/// structure. Entries lie in [0, 1]; off-diagonal entries of diagonal blocks
/// are zero (self-matching carries no cross terms).
struct JointMatchMatrix {
    FeatureIndexMap index;
    Eigen::MatrixXd entries;

    JointMatchMatrix() = default;
    JointMatchMatrix(FeatureIndexMap map, Eigen::MatrixXd values)
        : index(std::move(map)), entries(std::move(values)) {}

    static JointMatchMatrix zeros(FeatureIndexMap map) {
        const int m = map.total();
        return {std::move(map), Eigen::MatrixXd::Zero(m, m)};
    }

    /// Throws std::invalid_argument naming the first violated invariant.
    void validate(double tol = 1e-9) const {
        const int m = index.total();
        if (entries.rows() != m || entries.cols() != m) {
            throw std::invalid_argument("joint matrix shape does not match index map");
        }
        if ((entries - entries.transpose()).cwiseAbs().maxCoeff() > tol) {
            throw std::invalid_argument("joint matrix is not symmetric");
        }
        if (entries.minCoeff() < -tol || entries.maxCoeff() > 1.0 + tol) {
            throw std::invalid_argument("joint matrix entries outside [0, 1]");
        }
        for (int i = 0; i < index.images(); ++i) {
            const auto block = get_block(entries, index, i, i);
            for (int r = 0; r < block.rows(); ++r) {
                for (int c = 0; c < block.cols(); ++c) {
                    if (r != c && std::abs(block(r, c)) > tol) {
                        throw std::invalid_argument(
                            "diagonal block has nonzero off-diagonal entries");
                    }
                }
            }
        }
    }
};

/// Pairwise affinity scores S with the same block structure, plus the n x n
/// mask of image pairs for which matching was actually performed.
struct AffinityInput {
    FeatureIndexMap index;
    Eigen::MatrixXd scores;
    std::vector<std::uint8_t> observed;  // n*n, row-major

    AffinityInput() = default;

    static AffinityInput zeros(FeatureIndexMap map) {
        AffinityInput in;
        const int m = map.total();
        const int n = map.images();
        in.index = std::move(map);
        in.scores = Eigen::MatrixXd::Zero(m, m);
        in.observed.assign(static_cast<std::size_t>(n) * n, 0);
        return in;
    }

    bool is_observed(int i, int j) const {
        return observed[static_cast<std::size_t>(i) * index.images() + j] != 0;
    }
    void set_observed(int i, int j, bool value) {
        observed[static_cast<std::size_t>(i) * index.images() + j] = value ? 1 : 0;
        observed[static_cast<std::size_t>(j) * index.images() + i] = value ? 1 : 0;
    }
    void set_all_observed() {
        observed.assign(observed.size(), 1);
    }

    void validate(double tol = 1e-9) const {
        const int m = index.total();
        const int n = index.images();
        if (scores.rows() != m || scores.cols() != m) {
            throw std::invalid_argument("score matrix shape does not match index map");
        }
        if (observed.size() != static_cast<std::size_t>(n) * n) {
            throw std::invalid_argument("observed mask has wrong size");
        }
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const auto block = get_block(scores, index, i, j);
                if (!is_observed(i, j) && block.cwiseAbs().maxCoeff() > tol) {
                    throw std::invalid_argument("scores present for unobserved image pair");
                }
                const auto mirror = get_block(scores, index, j, i);
                if ((block - mirror.transpose()).cwiseAbs().maxCoeff() > tol) {
                    throw std::invalid_argument("score blocks are not transpose-symmetric");
                }
            }
        }
    }
};

/// Low-rank parameterization X = A * B^T; rows of A and B are per-feature
/// embeddings into a k-dimensional universe space.
struct UniverseFactor {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    int k = 0;
};

/// All solver tunables. m_prime unset means "use m" (every feature matched
/// to the universe); set it below m to let the solver switch off features.
struct SolverConfig {
    double lambda = 50.0;   // nuclear-norm weight
    double alpha = 0.1;     // sparsity weight / score threshold
    double mu = 64.0;       // ADMM step parameter
    int k = 0;              // factor dimension (required, must be in [1, m])
    std::optional<double> m_prime;  // trace target, defaults to m
    double tol = 1e-4;      // relative convergence tolerance
    int max_iter = 1000;
    std::uint64_t seed = 0;
    double quantize_threshold = 0.5;  // fixed in normal use; exposed for experiments

    double resolved_m_prime(int m) const { return m_prime.value_or(static_cast<double>(m)); }

    void validate(int m) const {
        if (lambda <= 0) throw std::invalid_argument("lambda must be positive");
        if (alpha < 0) throw std::invalid_argument("alpha must be nonnegative");
        if (mu <= 0) throw std::invalid_argument("mu must be positive");
        if (k < 1 || k > m) throw std::invalid_argument("k must be in [1, m]");
        const double mp = resolved_m_prime(m);
        if (mp <= 0 || mp > m) throw std::invalid_argument("m_prime must be in (0, m]");
        if (tol <= 0) throw std::invalid_argument("tol must be positive");
        if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
    }
};

}  // namespace matchals
