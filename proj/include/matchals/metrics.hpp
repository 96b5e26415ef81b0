#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "matchals/index_map.hpp"
#include "matchals/rng.hpp"
#include "matchals/types.hpp"

namespace matchals {

/// One cross-image correspondence in canonical orientation (image_i < image_j).
struct Match {
    int image_i = 0;
    int feature_a = 0;
    int image_j = 0;
    int feature_b = 0;

    /// Ordered by image pair first so block-wise scans emit sorted output.
    std::strong_ordering operator<=>(const Match& o) const {
        if (auto c = image_i <=> o.image_i; c != 0) return c;
        if (auto c = image_j <=> o.image_j; c != 0) return c;
        if (auto c = feature_a <=> o.feature_a; c != 0) return c;
        return feature_b <=> o.feature_b;
    }
    bool operator==(const Match&) const = default;
};

/// Sorted, duplicate-free set of cross-image matches.
struct MatchSet {
    std::vector<Match> matches;

    void canonicalize() {
        for (auto& m : matches) {
            if (m.image_i > m.image_j) {
                std::swap(m.image_i, m.image_j);
                std::swap(m.feature_a, m.feature_b);
            }
            if (m.image_i == m.image_j) {
                throw std::invalid_argument("match within a single image");
            }
        }
        std::sort(matches.begin(), matches.end());
        matches.erase(std::unique(matches.begin(), matches.end()), matches.end());
    }

    std::size_t size() const { return matches.size(); }
};

/// Lists the selected entries of the off-diagonal blocks (i < j); diagonal
/// self-matches are excluded so the metric compares correspondences only.
inline MatchSet extract_matches(const JointMatchMatrix& X) {
    MatchSet set;
    const auto& index = X.index;
    for (int i = 0; i < index.images(); ++i) {
        for (int j = i + 1; j < index.images(); ++j) {
            const auto block = get_block(X.entries, index, i, j);
            for (int a = 0; a < block.rows(); ++a) {
                for (int b = 0; b < block.cols(); ++b) {
                    if (block(a, b) > 0.5) set.matches.push_back({i, a, j, b});
                }
            }
        }
    }
    return set;
}

/// Intersection-over-union error between two match sets: 1 - |A∩B|/|A∪B|,
/// with two empty sets counting as perfect agreement.
inline double error_rate(const MatchSet& a, const MatchSet& b) {
    std::vector<Match> inter;
    std::set_intersection(a.matches.begin(), a.matches.end(), b.matches.begin(), b.matches.end(),
                          std::back_inserter(inter));
    const std::size_t unions = a.size() + b.size() - inter.size();
    if (unions == 0) return 0.0;
    return 1.0 - static_cast<double>(inter.size()) / static_cast<double>(unions);
}

inline double error_rate(const JointMatchMatrix& X, const JointMatchMatrix& truth) {
    if (!(X.index == truth.index)) {
        throw std::invalid_argument("index maps differ");
    }
    return error_rate(extract_matches(X), extract_matches(truth));
}

namespace detail {

/// Column of the first selected entry in the given row of block (i, j),
/// or -1 when the row is unmatched.
inline int first_match_col(const Eigen::MatrixXd& entries, const FeatureIndexMap& index, int i,
                           int j, int row) {
    const auto block = get_block(entries, index, i, j);
    for (int b = 0; b < block.cols(); ++b) {
        if (block(row, b) > 0.5) return b;
    }
    return -1;
}

/// Whether the identity X_ij = X_iz X_zj holds on every row of image i
/// whose links through both paths exist.
inline bool triple_consistent(const JointMatchMatrix& X, int i, int j, int z) {
    const auto& index = X.index;
    for (int a = 0; a < index.features(i); ++a) {
        const int direct = first_match_col(X.entries, index, i, j, a);
        if (direct < 0) continue;
        const int via = first_match_col(X.entries, index, i, z, a);
        if (via < 0) continue;
        const int composed = first_match_col(X.entries, index, z, j, via);
        if (composed < 0) continue;
        if (composed != direct) return false;
    }
    return true;
}

}  // namespace detail

/// Fraction of ordered image triples (i, j, z) on which composing i→z→j
/// agrees with the direct i→j matches wherever both paths exist. samples = 0
/// enumerates every ordered triple; otherwise that many triples are drawn
/// uniformly with the given seed.
inline double cycle_consistency_rate(const JointMatchMatrix& X, long samples = 0,
                                     std::uint64_t seed = 0) {
    const int n = X.index.images();
    if (n < 3) {
        throw std::invalid_argument("cycle consistency needs at least three images");
    }
    long total = 0;
    long good = 0;
    if (samples <= 0) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                for (int z = 0; z < n; ++z) {
                    if (i == j || j == z || i == z) continue;
                    ++total;
                    if (detail::triple_consistent(X, i, j, z)) ++good;
                }
            }
        }
    } else {
        Rng rng(seed);
        for (long s = 0; s < samples; ++s) {
            int i, j, z;
            do {
                i = static_cast<int>(rng.uniform_below(n));
                j = static_cast<int>(rng.uniform_below(n));
                z = static_cast<int>(rng.uniform_below(n));
            } while (i == j || j == z || i == z);
            ++total;
            if (detail::triple_consistent(X, i, j, z)) ++good;
        }
    }
    return static_cast<double>(good) / static_cast<double>(total);
}

/// Magnitude of the most negative eigenvalue, normalized by the trace;
/// zero for positive semidefinite input.
inline double psd_gap(const JointMatchMatrix& X) {
    if ((X.entries - X.entries.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw std::invalid_argument("matrix is not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(X.entries, Eigen::EigenvaluesOnly);
    const double smallest = eig.eigenvalues().minCoeff();
    return std::max(0.0, -smallest) / std::max(1e-12, X.entries.trace());
}

/// Fraction of entries within tol of 0 or 1.
inline double binarity(const JointMatchMatrix& X, double tol = 0.05) {
    const auto& E = X.entries;
    long close = 0;
    for (int r = 0; r < E.rows(); ++r) {
        for (int c = 0; c < E.cols(); ++c) {
            const double v = E(r, c);
            if (std::abs(v) <= tol || std::abs(v - 1.0) <= tol) ++close;
        }
    }
    return static_cast<double>(close) / static_cast<double>(E.size());
}

}  // namespace matchals
