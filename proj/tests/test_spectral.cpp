#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "matchals/metrics.hpp"
#include "matchals/rng.hpp"
#include "matchals/spectral.hpp"

using namespace matchals;

namespace {

/// Every image sees the whole universe; image i's feature f is universe
/// point (f + i) % universe.
AffinityInput clean_input(int images, int universe) {
    const std::vector<int> counts(images, universe);
    auto in = AffinityInput::zeros(FeatureIndexMap::from_counts(counts));
    in.set_all_observed();
    for (int i = 0; i < images; ++i) {
        for (int j = 0; j < images; ++j) {
            if (i == j) continue;
            for (int f = 0; f < universe; ++f) {
                for (int g = 0; g < universe; ++g) {
                    if ((f + i) % universe == (g + j) % universe) {
                        in.scores(in.index.global_index(i, f),
                                  in.index.global_index(j, g)) = 1.0;
                    }
                }
            }
        }
    }
    return in;
}

Eigen::MatrixXd clean_truth(int images, int universe) {
    const int m = images * universe;
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < images; ++i) {
        for (int j = 0; j < images; ++j) {
            for (int f = 0; f < universe; ++f) {
                for (int g = 0; g < universe; ++g) {
                    if ((f + i) % universe == (g + j) % universe) {
                        X(i * universe + f, j * universe + g) = 1.0;
                    }
                }
            }
        }
    }
    return X;
}

/// Three images each seeing two of three universe points: image 0 sees
/// {0, 1}, image 1 sees {0, 2}, image 2 sees {1, 2}.
const std::vector<std::vector<int>> kPartialPoints{{0, 1}, {0, 2}, {1, 2}};

AffinityInput partial_input() {
    auto in = AffinityInput::zeros(FeatureIndexMap::from_counts({2, 2, 2}));
    in.set_all_observed();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (i == j) continue;
            for (int f = 0; f < 2; ++f) {
                for (int g = 0; g < 2; ++g) {
                    if (kPartialPoints[i][f] == kPartialPoints[j][g]) {
                        in.scores(in.index.global_index(i, f),
                                  in.index.global_index(j, g)) = 1.0;
                    }
                }
            }
        }
    }
    return in;
}

JointMatchMatrix partial_truth() {
    auto X = JointMatchMatrix::zeros(FeatureIndexMap::from_counts({2, 2, 2}));
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            for (int f = 0; f < 2; ++f) {
                for (int g = 0; g < 2; ++g) {
                    if (kPartialPoints[i][f] == kPartialPoints[j][g]) {
                        X.entries(X.index.global_index(i, f),
                                  X.index.global_index(j, g)) = 1.0;
                    }
                }
            }
        }
    }
    return X;
}

}  // namespace

TEST_CASE("a clean fully observed problem is recovered exactly") {
    const AffinityInput in = clean_input(4, 3);
    SpectralConfig cfg;
    cfg.r = 3;
    const JointMatchMatrix X = spectral_solve(in, cfg);
    CHECK((X.entries - clean_truth(4, 3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(cycle_consistency_rate(X) == 1.0);
    CHECK_NOTHROW(X.validate());
}

TEST_CASE("embedding columns are eigenvalue-scaled and ordered") {
    const AffinityInput in = clean_input(4, 3);
    const Eigen::MatrixXd U = spectral_embed(in, 3);
    REQUIRE(U.cols() == 3);
    // the score matrix is a rank-3 projector scaled by 4 minus the identity,
    // so each embedding column has squared norm 3
    for (int c = 0; c < 3; ++c) {
        CHECK(U.col(c).squaredNorm() == Catch::Approx(3.0).margin(1e-9));
    }
}

TEST_CASE("an eigenvector sign flip cannot change the rounding") {
    auto in = AffinityInput::zeros(FeatureIndexMap::from_counts({1, 1}));
    in.set_all_observed();
    in.scores(0, 1) = in.scores(1, 0) = 1.0;
    SpectralConfig cfg;
    cfg.r = 1;
    const JointMatchMatrix X = spectral_solve(in, cfg);
    CHECK((X.entries.array() == 1.0).all());
}

TEST_CASE("a negative eigenvalue among the top r is degenerate") {
    auto in = AffinityInput::zeros(FeatureIndexMap::from_counts({1, 1}));
    in.set_all_observed();
    in.scores(0, 1) = in.scores(1, 0) = 1.0;
    SpectralConfig cfg;
    cfg.r = 2;
    CHECK_THROWS_AS(spectral_solve(in, cfg), DegenerateSpectrumError);

    SpectralConfig wide;
    wide.r = 4;
    CHECK_THROWS_AS(spectral_solve(clean_input(4, 3), wide), DegenerateSpectrumError);
}

TEST_CASE("orthogonal mixing of the embedding does not change the rounding") {
    const AffinityInput in = clean_input(4, 3);
    const Eigen::MatrixXd U = spectral_embed(in, 3);
    const int anchor = default_anchor(in.index);

    Rng rng(4242);
    Eigen::MatrixXd noise(3, 3);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) noise(r, c) = rng.normal();
    }
    const Eigen::MatrixXd Q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(noise).householderQ();

    const JointMatchMatrix base = assemble_from_embedding(U, in.index, anchor);
    const JointMatchMatrix mixed = assemble_from_embedding(U * Q, in.index, anchor);
    CHECK((base.entries - mixed.entries).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("points the anchor never saw stay unmatched") {
    // exact embedding: stacked partial permutations over sqrt(2)
    const auto index = FeatureIndexMap::from_counts({2, 2, 2});
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(6, 3);
    for (int i = 0; i < 3; ++i) {
        for (int f = 0; f < 2; ++f) {
            U(index.global_index(i, f), kPartialPoints[i][f]) = 1.0 / std::sqrt(2.0);
        }
    }
    const JointMatchMatrix X = assemble_from_embedding(U, index, 0);

    // images 1 and 2 share universe point 2, which anchor image 0 never saw
    CHECK((get_block(X.entries, index, 1, 2).array() == 0.0).all());
    CHECK(get_block(X.entries, index, 0, 1)(0, 0) == 1.0);
    CHECK(get_block(X.entries, index, 0, 2)(1, 0) == 1.0);
    CHECK(error_rate(X, partial_truth()) == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("partial observation leaves the baseline short of the truth") {
    SpectralConfig cfg;
    cfg.r = 3;
    const JointMatchMatrix X = spectral_solve(partial_input(), cfg);
    CHECK_NOTHROW(X.validate());
    CHECK(error_rate(X, partial_truth()) >= 1.0 / 3.0 - 1e-9);
}

TEST_CASE("the default anchor is the widest image with ties to the first") {
    CHECK(default_anchor(FeatureIndexMap::from_counts({2, 3, 3})) == 1);
    CHECK(default_anchor(FeatureIndexMap::from_counts({2, 2})) == 0);
    CHECK(default_anchor(FeatureIndexMap::from_counts({1})) == 0);
}

TEST_CASE("spectral configuration and shapes are validated") {
    const auto index = FeatureIndexMap::from_counts({2, 2});
    SpectralConfig cfg;
    CHECK_THROWS_AS(cfg.validate(index), std::invalid_argument);  // r = 0
    cfg.r = 5;
    CHECK_THROWS_AS(cfg.validate(index), std::invalid_argument);
    cfg.r = 2;
    CHECK_NOTHROW(cfg.validate(index));
    cfg.anchor = -1;
    CHECK_THROWS_AS(cfg.validate(index), std::invalid_argument);
    cfg.anchor = 2;
    CHECK_THROWS_AS(cfg.validate(index), std::invalid_argument);
    cfg.anchor = 1;
    CHECK_NOTHROW(cfg.validate(index));

    const Eigen::MatrixXd U = Eigen::MatrixXd::Zero(3, 2);
    CHECK_THROWS_AS(assemble_from_embedding(U, index, 0), std::invalid_argument);
    const Eigen::MatrixXd U4 = Eigen::MatrixXd::Zero(4, 2);
    CHECK_THROWS_AS(assemble_from_embedding(U4, index, 7), std::invalid_argument);
}
