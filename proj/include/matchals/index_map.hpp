#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "matchals/errors.hpp"

namespace matchals {

/// Maps (image, local feature) pairs to rows of the m x m joint matrix and
/// back. Image and feature indices are 0-based everywhere inside the
/// library; the 1-based convention of the file formats is handled by the IO
/// layer alone.
class FeatureIndexMap {
public:
    FeatureIndexMap() = default;

    /// Builds the map from per-image feature counts.
    static FeatureIndexMap from_counts(std::vector<int> counts) {
        if (counts.empty()) {
            throw std::invalid_argument("feature counts must be non-empty");
        }
        FeatureIndexMap map;
        map.counts_ = std::move(counts);
        map.offsets_.resize(map.counts_.size() + 1);
        map.offsets_[0] = 0;
        for (std::size_t i = 0; i < map.counts_.size(); ++i) {
            if (map.counts_[i] < 1) {
                throw std::invalid_argument("every image must have at least one feature");
            }
            map.offsets_[i + 1] = map.offsets_[i] + map.counts_[i];
        }
        return map;
    }

    int images() const { return static_cast<int>(counts_.size()); }
    int features(int image) const { return counts_[check_image(image)]; }
    int offset(int image) const { return offsets_[check_image(image)]; }
    int total() const { return offsets_.empty() ? 0 : offsets_.back(); }
    const std::vector<int>& counts() const { return counts_; }

    /// Row of the joint matrix holding feature `feature` of image `image`.
    int global_index(int image, int feature) const {
        check_image(image);
        if (feature < 0 || feature >= counts_[image]) {
            throw std::invalid_argument("feature index out of range");
        }
        return offsets_[image] + feature;
    }

    /// Inverse of global_index.
    std::pair<int, int> local_index(int global) const {
        if (global < 0 || global >= total()) {
            throw std::invalid_argument("global index out of range");
        }
        int image = 0;
        while (offsets_[image + 1] <= global) ++image;
        return {image, global - offsets_[image]};
    }

    bool operator==(const FeatureIndexMap& other) const = default;

private:
    int check_image(int image) const {
        if (image < 0 || image >= images()) {
            throw std::invalid_argument("image index out of range: " + std::to_string(image));
        }
        return image;
    }

    std::vector<int> counts_;
    std::vector<int> offsets_;  // counts_.size() + 1 entries, offsets_[0] == 0
};

/// View of the (i, j) block of a joint-shape matrix.
inline Eigen::Block<Eigen::MatrixXd> get_block(Eigen::MatrixXd& M, const FeatureIndexMap& map,
                                               int i, int j) {
    if (M.rows() != map.total() || M.cols() != map.total()) {
        throw std::invalid_argument("matrix shape does not match index map");
    }
    return M.block(map.offset(i), map.offset(j), map.features(i), map.features(j));
}

inline Eigen::Block<const Eigen::MatrixXd> get_block(const Eigen::MatrixXd& M,
                                                     const FeatureIndexMap& map, int i, int j) {
    if (M.rows() != map.total() || M.cols() != map.total()) {
        throw std::invalid_argument("matrix shape does not match index map");
    }
    return M.block(map.offset(i), map.offset(j), map.features(i), map.features(j));
}

/// Overwrites the (i, j) block of M with `value`.
inline void set_block(Eigen::MatrixXd& M, const FeatureIndexMap& map, int i, int j,
                      const Eigen::MatrixXd& value) {
    auto block = get_block(M, map, i, j);
    if (value.rows() != block.rows() || value.cols() != block.cols()) {
        throw std::invalid_argument("block value has wrong shape");
    }
    block = value;
}

}  // namespace matchals
