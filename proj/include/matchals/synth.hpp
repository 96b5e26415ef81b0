#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "matchals/index_map.hpp"
#include "matchals/metrics.hpp"
#include "matchals/rng.hpp"
#include "matchals/solver.hpp"
#include "matchals/spectral.hpp"
#include "matchals/types.hpp"

namespace matchals {

struct SimSpec {
    int universe_size = 20;
    int images = 20;
    double rho_o = 0.6;  // probability each image observes a universe point
    double rho_e = 0.4;  // target input error rate (intersection over union)
    std::uint64_t seed = 0;

    void validate() const {
        if (universe_size < 1) throw std::invalid_argument("universe_size must be >= 1");
        if (images < 2) throw std::invalid_argument("images must be >= 2");
        if (!(rho_o > 0.0 && rho_o <= 1.0)) throw std::invalid_argument("rho_o must be in (0, 1]");
        if (!(rho_e >= 0.0 && rho_e < 1.0)) throw std::invalid_argument("rho_e must be in [0, 1)");
    }
};

struct SimInstance {
    AffinityInput input;      // corrupted pairwise matches, diagonal blocks zero
    JointMatchMatrix truth;   // consistent ground truth with identity diagonal blocks
    std::vector<std::vector<int>> points;  // universe point behind each (image, feature)
    double input_error = 0.0;  // measured error of the corrupted input vs truth
};

/// Draws an instance: each image observes each universe point independently
/// with probability rho_o (redrawn until nonempty), ground truth pairs
/// features observing the same point, and each pair's matches are corrupted
/// independently toward a measured error near rho_e.
///
/// Corruption picks a subset of a pair's c true matches and deranges the
/// selected column targets, so each selected match trades a removal for a
/// false addition. The subset size is drawn around rho_e*c/(2-rho_e), the
/// value at which the union-based error of the pair comes out at rho_e. A
/// singleton selection, which no derangement can move, is redirected to a
/// random unmatched column instead, or dropped when the block has none.
inline SimInstance generate_instance(const SimSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    SimInstance inst;
    inst.points.resize(spec.images);
    std::vector<int> counts(spec.images);
    for (int i = 0; i < spec.images; ++i) {
        auto& pts = inst.points[i];
        do {
            pts.clear();
            for (int u = 0; u < spec.universe_size; ++u) {
                if (rng.uniform() < spec.rho_o) pts.push_back(u);
            }
        } while (pts.empty());
        counts[i] = static_cast<int>(pts.size());
    }
    FeatureIndexMap index = FeatureIndexMap::from_counts(counts);

    inst.truth = JointMatchMatrix::zeros(index);
    for (int i = 0; i < spec.images; ++i) {
        for (int j = 0; j < spec.images; ++j) {
            auto block = get_block(inst.truth.entries, index, i, j);
            for (int a = 0; a < counts[i]; ++a) {
                for (int b = 0; b < counts[j]; ++b) {
                    if (inst.points[i][a] == inst.points[j][b]) block(a, b) = 1.0;
                }
            }
        }
    }

    inst.input = AffinityInput::zeros(index);
    inst.input.set_all_observed();
    for (int i = 0; i < spec.images; ++i) {
        for (int j = i + 1; j < spec.images; ++j) {
            Eigen::MatrixXd block = get_block(inst.truth.entries, index, i, j);
            std::vector<std::pair<int, int>> true_matches;
            for (int a = 0; a < counts[i]; ++a) {
                for (int b = 0; b < counts[j]; ++b) {
                    if (block(a, b) > 0.5) true_matches.emplace_back(a, b);
                }
            }
            const int c = static_cast<int>(true_matches.size());
            if (c > 0 && spec.rho_e > 0.0) {
                const double x = spec.rho_e * c / (2.0 - spec.rho_e);
                int s = static_cast<int>(std::floor(x));
                if (rng.uniform() < x - std::floor(x)) ++s;
                s = std::min(s, c);
                if (s >= 2) {
                    std::vector<int> chosen(c);
                    std::iota(chosen.begin(), chosen.end(), 0);
                    rng.shuffle(chosen);
                    chosen.resize(s);
                    std::vector<int> perm(s);
                    std::iota(perm.begin(), perm.end(), 0);
                    bool has_fixed_point = true;
                    while (has_fixed_point) {
                        rng.shuffle(perm);
                        has_fixed_point = false;
                        for (int t = 0; t < s; ++t) {
                            if (perm[t] == t) {
                                has_fixed_point = true;
                                break;
                            }
                        }
                    }
                    for (int t = 0; t < s; ++t) {
                        const auto [row, col] = true_matches[chosen[t]];
                        block(row, col) = 0.0;
                        block(row, true_matches[chosen[perm[t]]].second) = 1.0;
                    }
                } else if (s == 1) {
                    const auto [row, col] =
                        true_matches[static_cast<int>(rng.uniform_below(c))];
                    std::vector<char> used_col(counts[j], 0);
                    for (const auto& [a, b] : true_matches) used_col[b] = 1;
                    std::vector<int> free_cols;
                    for (int b = 0; b < counts[j]; ++b) {
                        if (!used_col[b]) free_cols.push_back(b);
                    }
                    block(row, col) = 0.0;
                    if (!free_cols.empty()) {
                        block(row, free_cols[rng.uniform_below(free_cols.size())]) = 1.0;
                    }
                }
            }
            set_block(inst.input.scores, index, i, j, block);
            set_block(inst.input.scores, index, j, i, block.transpose());
        }
    }
    inst.input_error =
        error_rate(JointMatchMatrix{index, inst.input.scores}, inst.truth);
    return inst;
}

struct SweepAxis {
    std::string name;  // one of: universe, images, rho-o, rho-e
    std::vector<double> values;
};

struct SweepGrid {
    SweepAxis axis1;
    SweepAxis axis2;
    SimSpec base;  // fixed parameters; base.seed is the grid seed
    int repeats = 5;
};

struct SweepCellResult {
    double axis1_value = 0.0;
    double axis2_value = 0.0;
    std::string solver;
    int repeats = 0;
    double mean_error = 0.0;
    double std_error = 0.0;
    double mean_input_error = 0.0;
    double mean_iterations = 0.0;
    double mean_seconds = 0.0;
};

namespace detail {

inline void apply_axis(SimSpec& spec, const std::string& name, double value) {
    const auto as_int = [&](const char* what) {
        const int v = static_cast<int>(std::llround(value));
        if (std::abs(value - v) > 1e-9) {
            throw std::invalid_argument(std::string(what) + " axis requires integer values");
        }
        return v;
    };
    if (name == "universe") {
        spec.universe_size = as_int("universe");
    } else if (name == "images" || name == "n") {
        spec.images = as_int("images");
    } else if (name == "rho-o" || name == "rho_o") {
        spec.rho_o = value;
    } else if (name == "rho-e" || name == "rho_e") {
        spec.rho_e = value;
    } else {
        throw std::invalid_argument("unknown sweep axis: " + name);
    }
}

inline std::uint64_t axis_seed(std::uint64_t seed, const std::string& name, double value) {
    return mix_seed(seed, hash_tag(name) ^ std::bit_cast<std::uint64_t>(value));
}

struct SolverOutcome {
    double error = 0.0;
    double iterations = 0.0;
    double seconds = 0.0;
};

inline SolverOutcome run_solver(const std::string& solver, const SimInstance& inst,
                                const SimSpec& spec, std::uint64_t seed) {
    SolverOutcome out;
    const int m = inst.input.index.total();
    if (solver == "matchals") {
        SolverConfig config;
        config.k = std::min(2 * spec.universe_size, m);
        config.seed = seed;
        const SolveResult result = solve(inst.input, config);
        out.error = error_rate(result.quantized, inst.truth);
        out.iterations = result.diagnostics.iterations;
        out.seconds = result.diagnostics.total_seconds;
    } else if (solver == "spectral") {
        SpectralConfig config;
        config.r = std::min(spec.universe_size, m);
        const auto start = std::chrono::steady_clock::now();
        const JointMatchMatrix X = spectral_solve(inst.input, config);
        out.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.error = error_rate(X, inst.truth);
    } else if (solver == "input-passthrough") {
        out.error = inst.input_error;
    } else {
        throw std::invalid_argument("unknown solver identifier: " + solver);
    }
    return out;
}

}  // namespace detail

/// Runs every solver on every grid cell. Each repeat's instance seed derives
/// from the grid seed, the axis values, and the repeat index alone, so cell
/// order and concurrency never change results, and a single-cell grid
/// reproduces the matching cell of a larger grid exactly.
inline std::vector<SweepCellResult> run_sweep(const SweepGrid& grid,
                                              const std::vector<std::string>& solvers) {
    if (grid.repeats < 1) throw std::invalid_argument("repeats must be >= 1");
    std::vector<SweepCellResult> results;
    for (double v1 : grid.axis1.values) {
        for (double v2 : grid.axis2.values) {
            SimSpec spec = grid.base;
            detail::apply_axis(spec, grid.axis1.name, v1);
            detail::apply_axis(spec, grid.axis2.name, v2);
            const std::uint64_t cell_seed = detail::axis_seed(
                detail::axis_seed(grid.base.seed, grid.axis1.name, v1), grid.axis2.name, v2);

            std::vector<std::vector<detail::SolverOutcome>> outcomes(solvers.size());
            double input_error_sum = 0.0;
            for (int rep = 0; rep < grid.repeats; ++rep) {
                SimSpec rep_spec = spec;
                rep_spec.seed = mix_seed(cell_seed, static_cast<std::uint64_t>(rep));
                const SimInstance inst = generate_instance(rep_spec);
                input_error_sum += inst.input_error;
                for (std::size_t s = 0; s < solvers.size(); ++s) {
                    outcomes[s].push_back(detail::run_solver(
                        solvers[s], inst, rep_spec, mix_seed(rep_spec.seed, hash_tag(solvers[s]))));
                }
            }
            for (std::size_t s = 0; s < solvers.size(); ++s) {
                SweepCellResult cell;
                cell.axis1_value = v1;
                cell.axis2_value = v2;
                cell.solver = solvers[s];
                cell.repeats = grid.repeats;
                cell.mean_input_error = input_error_sum / grid.repeats;
                double sum = 0.0;
                for (const auto& o : outcomes[s]) {
                    sum += o.error;
                    cell.mean_iterations += o.iterations;
                    cell.mean_seconds += o.seconds;
                }
                cell.mean_error = sum / grid.repeats;
                cell.mean_iterations /= grid.repeats;
                cell.mean_seconds /= grid.repeats;
                if (grid.repeats > 1) {
                    double sq = 0.0;
                    for (const auto& o : outcomes[s]) {
                        sq += (o.error - cell.mean_error) * (o.error - cell.mean_error);
                    }
                    cell.std_error = std::sqrt(sq / (grid.repeats - 1));
                }
                results.push_back(std::move(cell));
            }
        }
    }
    return results;
}

struct SensitivityResult {
    std::vector<int> k_values;
    std::vector<double> k_errors;  // mean error per k, lambda at its default
    std::vector<double> lambda_values;
    std::vector<double> lambda_errors;  // mean error per lambda, k = 2 * universe
};

/// Error curves over k and over lambda on shared instances: all settings
/// see the same generated inputs so the curves differ only through the
/// solver parameters.
inline SensitivityResult sensitivity_sweep(const SimSpec& base, const std::vector<int>& k_values,
                                           const std::vector<double>& lambda_values,
                                           int repeats = 5) {
    if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
    SensitivityResult result;
    result.k_values = k_values;
    result.lambda_values = lambda_values;
    result.k_errors.assign(k_values.size(), 0.0);
    result.lambda_errors.assign(lambda_values.size(), 0.0);
    for (int rep = 0; rep < repeats; ++rep) {
        SimSpec spec = base;
        spec.seed = mix_seed(base.seed, static_cast<std::uint64_t>(rep));
        const SimInstance inst = generate_instance(spec);
        const int m = inst.input.index.total();
        for (std::size_t i = 0; i < k_values.size(); ++i) {
            SolverConfig config;
            config.k = std::min(k_values[i], m);
            config.seed = mix_seed(spec.seed, hash_tag("k") ^ static_cast<std::uint64_t>(i));
            const SolveResult r = solve(inst.input, config);
            result.k_errors[i] += error_rate(r.quantized, inst.truth);
        }
        for (std::size_t i = 0; i < lambda_values.size(); ++i) {
            SolverConfig config;
            config.k = std::min(2 * spec.universe_size, m);
            config.lambda = lambda_values[i];
            config.seed = mix_seed(spec.seed, hash_tag("lambda") ^ static_cast<std::uint64_t>(i));
            const SolveResult r = solve(inst.input, config);
            result.lambda_errors[i] += error_rate(r.quantized, inst.truth);
        }
    }
    for (auto& e : result.k_errors) e /= repeats;
    for (auto& e : result.lambda_errors) e /= repeats;
    return result;
}

}  // namespace matchals
