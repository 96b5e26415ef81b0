#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "matchals.hpp"

namespace {

using nlohmann::json;

std::vector<std::string> split_list(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
        if (c == sep) {
            out.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    out.push_back(current);
    return out;
}

matchals::SweepAxis parse_axis(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
        throw std::invalid_argument("axis must have the form name:v1,v2,...");
    }
    matchals::SweepAxis axis;
    axis.name = text.substr(0, colon);
    for (const auto& tok : split_list(text.substr(colon + 1), ',')) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(tok, &pos);
            if (pos != tok.size()) throw std::invalid_argument(tok);
            axis.values.push_back(v);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad axis value '" + tok + "' in '" + text + "'");
        }
    }
    return axis;
}

struct SolveArgs {
    std::string input, output, diagnostics, m_prime = "auto";
    matchals::SolverConfig config;
    bool cleanup = false;
};

int run_solve(const SolveArgs& args) {
    const matchals::AffinityFile file = matchals::load_affinity_file(args.input);
    const int m = file.input.index.total();
    matchals::SolverConfig config = args.config;
    if (args.m_prime == "auto") {
        config.m_prime = file.simulated ? static_cast<double>(m) : 0.7 * m;
    } else {
        try {
            std::size_t pos = 0;
            config.m_prime = std::stod(args.m_prime, &pos);
            if (pos != args.m_prime.size()) throw std::invalid_argument(args.m_prime);
        } catch (const std::exception&) {
            throw std::invalid_argument("--m-prime must be a real number or 'auto'");
        }
    }
    const matchals::SolveResult result = matchals::solve(file.input, config);
    matchals::JointMatchMatrix quantized = result.quantized;
    if (args.cleanup) {
        quantized = matchals::cleanup_assignments(quantized, result.continuous);
    }
    matchals::save_matches(args.output, quantized.index, matchals::extract_matches(quantized));
    if (!args.diagnostics.empty()) {
        const auto& d = result.diagnostics;
        json j;
        j["iterations"] = d.iterations;
        j["converged"] = d.converged;
        j["primal_residual"] = d.primal_residual;
        j["change_residual"] = d.change_residual;
        j["residual_trace"] = d.residual_trace;
        j["objective_trace"] = d.objective_trace;
        j["iteration_seconds"] = d.iteration_seconds;
        j["total_seconds"] = d.total_seconds;
        j["nuclear_norm"] = d.nuclear_norm;
        j["psd_gap"] = matchals::psd_gap(result.continuous);
        j["binarity"] = matchals::binarity(result.continuous);
        j["m"] = m;
        j["m_prime"] = config.resolved_m_prime(m);
        j["k"] = config.k;
        matchals::atomic_write_text(args.diagnostics, j.dump(2) + "\n");
    }
    if (!result.diagnostics.converged) {
        std::cerr << "warning: stopped at max-iter without reaching tolerance (primal residual "
                  << result.diagnostics.primal_residual << ")\n";
    }
    return 0;
}

struct SimulateArgs {
    matchals::SimSpec spec;
    std::string output, truth;
};

int run_simulate(const SimulateArgs& args) {
    const matchals::SimInstance inst = matchals::generate_instance(args.spec);
    matchals::save_affinity(args.output, inst.input, /*simulated=*/true);
    matchals::save_matches(args.truth, inst.truth.index,
                           matchals::extract_matches(inst.truth));
    std::fprintf(stderr, "generated %d images, %d features, input error %.6f\n",
                 inst.truth.index.images(), inst.truth.index.total(), inst.input_error);
    return 0;
}

struct SweepArgs {
    std::string axis1, axis2, solvers = "matchals,spectral", output;
    matchals::SweepGrid grid;
};

int run_sweep_cmd(const SweepArgs& args) {
    matchals::SweepGrid grid = args.grid;
    grid.axis1 = parse_axis(args.axis1);
    grid.axis2 = parse_axis(args.axis2);
    const auto results = matchals::run_sweep(grid, split_list(args.solvers, ','));
    matchals::save_sweep_csv(args.output, results);
    return 0;
}

int run_eval(const std::string& pred_path, const std::string& truth_path) {
    const matchals::MatchesFile pred = matchals::load_matches(pred_path);
    const matchals::MatchesFile truth = matchals::load_matches(truth_path);
    if (!(pred.index == truth.index)) {
        throw std::runtime_error("matches files disagree on image or feature counts");
    }
    std::printf("%.6f\n", matchals::error_rate(pred.matches, truth.matches));
    return 0;
}

struct PairwiseArgs {
    std::string descriptors, output;
    double score_threshold = 0.7;
    double ratio_threshold = 1.1;
};

int run_pairwise(const PairwiseArgs& args) {
    if (args.score_threshold < 0.0) {
        throw std::invalid_argument("--score-threshold must be nonnegative");
    }
    const auto sets = matchals::load_descriptor_dir(args.descriptors);
    std::vector<int> counts;
    for (const auto& s : sets) counts.push_back(s.size());
    auto input = matchals::AffinityInput::zeros(matchals::FeatureIndexMap::from_counts(counts));
    const int n = static_cast<int>(sets.size());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            Eigen::MatrixXd S = matchals::compute_affinity(sets[i], sets[j],
                                                           args.score_threshold,
                                                           args.ratio_threshold);
            S = S.cwiseMin(1.0);  // inner products can exceed 1 by roundoff
            matchals::set_block(input.scores, input.index, i, j, S);
            matchals::set_block(input.scores, input.index, j, i, S.transpose());
            input.set_observed(i, j, true);
        }
    }
    const matchals::PruneResult pruned = matchals::prune_isolated(input);
    matchals::save_affinity(args.output, pruned.input);
    std::fprintf(stderr, "kept %d of %d features across %d of %d images\n",
                 pruned.input.index.total(), input.index.total(),
                 pruned.input.index.images(), n);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint multi-image feature matching via low-rank alternating minimization"};
    app.require_subcommand(1);

    SolveArgs solve_args;
    auto* solve = app.add_subcommand("solve", "Jointly match features from an affinity file");
    solve->add_option("--input", solve_args.input, "Affinity file")->required();
    solve->add_option("--lambda", solve_args.config.lambda, "Rank penalty weight")->capture_default_str();
    solve->add_option("--alpha", solve_args.config.alpha, "Sparsity weight")->capture_default_str();
    solve->add_option("--mu", solve_args.config.mu, "ADMM step parameter")->capture_default_str();
    solve->add_option("--k", solve_args.config.k, "Factor dimension")->required();
    solve->add_option("--m-prime", solve_args.m_prime,
                      "Trace target, or 'auto' (m for simulated inputs, 0.7*m otherwise)")->capture_default_str();
    solve->add_option("--tol", solve_args.config.tol, "Convergence tolerance")->capture_default_str();
    solve->add_option("--max-iter", solve_args.config.max_iter, "Iteration cap")->capture_default_str();
    solve->add_option("--seed", solve_args.config.seed, "Factor initialization seed")->capture_default_str();
    solve->add_option("--output", solve_args.output, "Matches file to write")->required();
    solve->add_option("--diagnostics", solve_args.diagnostics, "Diagnostics JSON to write");
    solve->add_flag("--cleanup-hungarian", solve_args.cleanup,
                    "Re-assign blocks that violate row/column uniqueness");

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Generate a corrupted synthetic instance");
    simulate->add_option("--universe", sim_args.spec.universe_size, "Universe size")->capture_default_str();
    simulate->add_option("--images", sim_args.spec.images, "Number of images")->capture_default_str();
    simulate->add_option("--rho-o", sim_args.spec.rho_o, "Observation probability")->capture_default_str();
    simulate->add_option("--rho-e", sim_args.spec.rho_e, "Target input error rate")->capture_default_str();
    simulate->add_option("--seed", sim_args.spec.seed, "Instance seed")->capture_default_str();
    simulate->add_option("--output", sim_args.output, "Affinity file to write")->required();
    simulate->add_option("--truth", sim_args.truth, "Ground-truth matches file to write")
        ->required();

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "Run solvers over a 2D parameter grid");
    sweep->add_option("--axis1", sweep_args.axis1, "First axis, name:v1,v2,...")->required();
    sweep->add_option("--axis2", sweep_args.axis2, "Second axis, name:v1,v2,...")->required();
    sweep->add_option("--repeats", sweep_args.grid.repeats, "Instances per cell")->capture_default_str();
    sweep->add_option("--solvers", sweep_args.solvers,
                      "Comma-separated: matchals, spectral, input-passthrough")->capture_default_str();
    sweep->add_option("--universe", sweep_args.grid.base.universe_size, "Base universe size")
        ->capture_default_str();
    sweep->add_option("--images", sweep_args.grid.base.images, "Base image count")->capture_default_str();
    sweep->add_option("--rho-o", sweep_args.grid.base.rho_o, "Base observation probability")
        ->capture_default_str();
    sweep->add_option("--rho-e", sweep_args.grid.base.rho_e, "Base input error rate")->capture_default_str();
    sweep->add_option("--seed", sweep_args.grid.base.seed, "Grid seed")->capture_default_str();
    sweep->add_option("--output", sweep_args.output, "CSV file to write")->required();

    std::string eval_pred, eval_truth;
    auto* eval = app.add_subcommand("eval", "Print the IoU error between two matches files");
    eval->add_option("--pred", eval_pred, "Predicted matches file")->required();
    eval->add_option("--truth", eval_truth, "Ground-truth matches file")->required();

    PairwiseArgs pair_args;
    auto* pairwise =
        app.add_subcommand("pairwise", "Build an affinity file from descriptor files");
    pairwise->add_option("--descriptors", pair_args.descriptors, "Directory of descriptor files")
        ->required();
    pairwise->add_option("--score-threshold", pair_args.score_threshold,
                         "Minimum kept inner product")->capture_default_str();
    pairwise->add_option("--ratio-threshold", pair_args.ratio_threshold,
                         "Minimum best-to-second-best ratio")->capture_default_str();
    pairwise->add_option("--output", pair_args.output, "Affinity file to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (solve->parsed()) return run_solve(solve_args);
        if (simulate->parsed()) return run_simulate(sim_args);
        if (sweep->parsed()) return run_sweep_cmd(sweep_args);
        if (eval->parsed()) return run_eval(eval_pred, eval_truth);
        if (pairwise->parsed()) return run_pairwise(pair_args);
    } catch (const matchals::NumericError& e) {
        std::cerr << "numeric error: " << e.what();
        if (e.iteration() >= 0) std::cerr << " (iteration " << e.iteration() << ")";
        std::cerr << "\n";
        return 3;
    } catch (const matchals::DegenerateSpectrumError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
