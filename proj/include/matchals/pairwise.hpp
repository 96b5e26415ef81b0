#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "matchals/errors.hpp"
#include "matchals/hungarian.hpp"
#include "matchals/index_map.hpp"
#include "matchals/types.hpp"

namespace matchals {

/// Unit-normalized feature descriptors for one image, stored as rows of a
/// p x d matrix so inner products are cosine similarities.
struct DescriptorSet {
    int id = 0;
    int dim = 0;
    Eigen::MatrixXd vectors;

    int size() const { return static_cast<int>(vectors.rows()); }

    void validate(double tol = 1e-9) const {
        if (vectors.cols() != dim) {
            throw std::invalid_argument("descriptor matrix width does not match dim");
        }
        for (int r = 0; r < vectors.rows(); ++r) {
            if (std::abs(vectors.row(r).norm() - 1.0) > tol) {
                throw std::invalid_argument("descriptor vector is not unit length");
            }
        }
    }
};

namespace detail {

/// Zeroes every row (axis 0) or column (axis 1) whose largest entry divided
/// by its second largest is below ratio_threshold. A zero second-best passes
/// (a unique candidate is maximally distinctive).
inline void apply_ratio_test(Eigen::MatrixXd& S, double ratio_threshold, int axis) {
    const int outer = axis == 0 ? static_cast<int>(S.rows()) : static_cast<int>(S.cols());
    const int inner = axis == 0 ? static_cast<int>(S.cols()) : static_cast<int>(S.rows());
    for (int u = 0; u < outer; ++u) {
        double first = 0.0, second = 0.0;
        for (int v = 0; v < inner; ++v) {
            const double s = axis == 0 ? S(u, v) : S(v, u);
            if (s > first) {
                second = first;
                first = s;
            } else if (s > second) {
                second = s;
            }
        }
        if (first > 0.0 && second > 0.0 && first / second < ratio_threshold) {
            if (axis == 0) {
                S.row(u).setZero();
            } else {
                S.col(u).setZero();
            }
        }
    }
}

}  // namespace detail

/// Cross-image affinity scores from descriptor similarity: inner products
/// kept only above score_threshold, then indistinctive rows and columns
/// (best-to-second-best ratio below ratio_threshold) zeroed, rows first.
inline Eigen::MatrixXd compute_affinity(const DescriptorSet& a, const DescriptorSet& b,
                                        double score_threshold = 0.7,
                                        double ratio_threshold = 1.1) {
    if (a.dim != b.dim) {
        throw std::invalid_argument("descriptor dimensions do not match");
    }
    Eigen::MatrixXd S = a.vectors * b.vectors.transpose();
    S = (S.array() > score_threshold).select(S, 0.0);
    detail::apply_ratio_test(S, ratio_threshold, 0);
    detail::apply_ratio_test(S, ratio_threshold, 1);
    return S;
}

/// Result of pruning: the reduced input plus, per surviving image, which
/// original image and feature indices it kept.
struct PruneResult {
    AffinityInput input;
    std::vector<int> kept_images;
    std::vector<std::vector<int>> kept_features;
};

/// Removes every feature whose row holds nonzero scores in fewer than two
/// distinct other images, repeating until stable since each removal can
/// isolate further features. Images left with no features are dropped.
inline PruneResult prune_isolated(const AffinityInput& input) {
    input.validate();
    const auto& index = input.index;
    const int n = index.images();
    const int m = index.total();

    std::vector<char> kept(m, 1);
    bool changed = true;
    while (changed) {
        changed = false;
        for (int i = 0; i < n; ++i) {
            for (int f = 0; f < index.features(i); ++f) {
                const int g = index.global_index(i, f);
                if (!kept[g]) continue;
                int partners = 0;
                for (int j = 0; j < n && partners < 2; ++j) {
                    if (j == i) continue;
                    const int off = index.offset(j);
                    for (int h = 0; h < index.features(j); ++h) {
                        if (kept[off + h] && input.scores(g, off + h) != 0.0) {
                            ++partners;
                            break;
                        }
                    }
                }
                if (partners < 2) {
                    kept[g] = 0;
                    changed = true;
                }
            }
        }
    }

    PruneResult result;
    std::vector<int> counts;
    for (int i = 0; i < n; ++i) {
        std::vector<int> features;
        for (int f = 0; f < index.features(i); ++f) {
            if (kept[index.global_index(i, f)]) features.push_back(f);
        }
        if (features.empty()) continue;
        counts.push_back(static_cast<int>(features.size()));
        result.kept_images.push_back(i);
        result.kept_features.push_back(std::move(features));
    }
    if (result.kept_images.empty()) {
        throw EmptyProblemError("no features with matches in two or more images");
    }

    std::vector<int> global_kept;
    for (std::size_t i = 0; i < result.kept_images.size(); ++i) {
        const int off = index.offset(result.kept_images[i]);
        for (int f : result.kept_features[i]) global_kept.push_back(off + f);
    }
    result.input = AffinityInput::zeros(FeatureIndexMap::from_counts(counts));
    const int m2 = static_cast<int>(global_kept.size());
    for (int r = 0; r < m2; ++r) {
        for (int c = 0; c < m2; ++c) {
            result.input.scores(r, c) = input.scores(global_kept[r], global_kept[c]);
        }
    }
    for (std::size_t i = 0; i < result.kept_images.size(); ++i) {
        for (std::size_t j = 0; j < result.kept_images.size(); ++j) {
            if (input.is_observed(result.kept_images[i], result.kept_images[j])) {
                result.input.set_observed(static_cast<int>(i), static_cast<int>(j), true);
            }
        }
    }
    return result;
}

}  // namespace matchals
