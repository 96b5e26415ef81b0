#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <utility>
#include <vector>

#include "matchals/errors.hpp"
#include "matchals/hungarian.hpp"
#include "matchals/index_map.hpp"
#include "matchals/projection.hpp"
#include "matchals/rng.hpp"
#include "matchals/types.hpp"

namespace matchals {

/// Cost matrix of the linearized objective: alpha everywhere minus the
/// scores, so high-affinity entries pull X up and the rest decay to zero.
inline Eigen::MatrixXd build_W(const AffinityInput& S, double alpha) {
    return Eigen::MatrixXd::Constant(S.scores.rows(), S.scores.cols(), alpha) - S.scores;
}

/// Closed-form minimizer G of ||T - G F^T||_F^2 + ridge ||G||_F^2, namely
/// T F (F^T F + ridge I)^{-1}. The ridge keeps the k x k system positive
/// definite, so a Cholesky solve replaces the pseudo-inverse.
inline Eigen::MatrixXd update_factor(const Eigen::MatrixXd& T, const Eigen::MatrixXd& F,
                                     double ridge) {
    if (ridge <= 0.0) {
        throw std::invalid_argument("ridge must be positive");
    }
    if (!T.allFinite() || !F.allFinite()) {
        throw NumericError("non-finite input to factor update");
    }
    Eigen::MatrixXd gram = F.transpose() * F;
    gram.diagonal().array() += ridge;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    return llt.solve((T * F).transpose()).transpose();
}

/// One ADMM iterate: primal X, factors, scaled dual Y, and the residuals
/// used by the stopping rule.
struct AdmmState {
    JointMatchMatrix X;
    UniverseFactor factor;
    Eigen::MatrixXd Y;
    int iter = 0;
    double primal_residual = 0.0;  // ||X - AB^T||_F / max(1, ||X||_F)
    double change_residual = 0.0;  // relative Frobenius change of X
};

struct SolveDiagnostics {
    int iterations = 0;
    bool converged = false;
    double primal_residual = 0.0;
    double change_residual = 0.0;
    std::vector<double> objective_trace;   // <W, X> + (lambda/2)(||A||_F^2 + ||B||_F^2)
    std::vector<double> residual_trace;    // primal residual per iteration
    std::vector<double> iteration_seconds;
    double nuclear_norm = 0.0;  // exact value for the final continuous X
    double total_seconds = 0.0;
};

struct SolveResult {
    JointMatchMatrix quantized;
    JointMatchMatrix continuous;
    UniverseFactor factor;
    SolveDiagnostics diagnostics;
};

/// Alternating-minimization solve of the low-rank joint matching program:
/// X is driven toward A B^T by the dual Y while staying in the constraint
/// set, and the factors absorb the rank penalty. Runs until both residuals
/// drop below config.tol or max_iter is hit (reported, not an error).
inline SolveResult solve(const AffinityInput& S, const SolverConfig& config) {
    S.validate();
    const auto& index = S.index;
    const int m = index.total();
    config.validate(m);
    const double m_prime = config.resolved_m_prime(m);
    const double mu = config.mu;
    const double ridge = config.lambda / mu;

    const Eigen::MatrixXd W = build_W(S, config.alpha);

    AdmmState state;
    state.X = JointMatchMatrix{index, project_to_constraints(S.scores, index, m_prime)};
    state.Y = Eigen::MatrixXd::Zero(m, m);
    state.factor.k = config.k;
    const double scale = 1.0 / std::sqrt(static_cast<double>(config.k));
    Rng rng(config.seed);
    auto init = [&](Eigen::MatrixXd& F) {
        F.resize(m, config.k);
        for (int r = 0; r < m; ++r) {
            for (int c = 0; c < config.k; ++c) {
                F(r, c) = rng.normal() * scale;
            }
        }
    };
    init(state.factor.A);
    init(state.factor.B);

    SolveDiagnostics diag;
    const auto start = std::chrono::steady_clock::now();
    auto iter_start = start;
    for (state.iter = 1; state.iter <= config.max_iter; ++state.iter) {
        Eigen::MatrixXd& A = state.factor.A;
        Eigen::MatrixXd& B = state.factor.B;
        const Eigen::MatrixXd M = state.X.entries + state.Y / mu;
        A = update_factor(M, B, ridge);
        B = update_factor(M.transpose(), A, ridge);
        const Eigen::MatrixXd AB = A * B.transpose();
        Eigen::MatrixXd X_new = project_to_constraints(AB - (W + state.Y) / mu, index, m_prime);
        state.Y += mu * (X_new - AB);

        state.primal_residual = (X_new - AB).norm() / std::max(1.0, X_new.norm());
        state.change_residual =
            (X_new - state.X.entries).norm() / std::max(1.0, state.X.entries.norm());
        state.X.entries = std::move(X_new);

        const double objective = W.cwiseProduct(state.X.entries).sum() +
                                 0.5 * config.lambda * (A.squaredNorm() + B.squaredNorm());
        if (!std::isfinite(objective) || !std::isfinite(state.primal_residual) ||
            !std::isfinite(state.change_residual) || !state.X.entries.allFinite() ||
            !state.Y.allFinite()) {
            throw NumericError("solver produced non-finite values", state.iter);
        }
        diag.objective_trace.push_back(objective);
        diag.residual_trace.push_back(state.primal_residual);
        const auto now = std::chrono::steady_clock::now();
        diag.iteration_seconds.push_back(std::chrono::duration<double>(now - iter_start).count());
        iter_start = now;
        diag.iterations = state.iter;
        if (state.primal_residual < config.tol && state.change_residual < config.tol) {
            diag.converged = true;
            break;
        }
    }
    diag.primal_residual = state.primal_residual;
    diag.change_residual = state.change_residual;
    diag.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(state.X.entries,
                                                             Eigen::EigenvaluesOnly);
    diag.nuclear_norm = eig.eigenvalues().cwiseAbs().sum();

    SolveResult result;
    result.continuous = state.X;
    result.quantized = JointMatchMatrix{
        index, (state.X.entries.array() > config.quantize_threshold).cast<double>().matrix()};
    result.factor = std::move(state.factor);
    result.diagnostics = std::move(diag);
    return result;
}

/// Re-solves any off-diagonal block of the quantized output that violates
/// row or column uniqueness, running an assignment over the continuous
/// values restricted to that block's selected entries. Valid blocks are
/// kept bit-identical.
inline JointMatchMatrix cleanup_assignments(const JointMatchMatrix& quantized,
                                            const JointMatchMatrix& continuous) {
    if (!(quantized.index == continuous.index)) {
        throw std::invalid_argument("quantized and continuous index maps differ");
    }
    const auto& index = quantized.index;
    JointMatchMatrix result = quantized;
    for (int i = 0; i < index.images(); ++i) {
        for (int j = i + 1; j < index.images(); ++j) {
            const auto Q = get_block(quantized.entries, index, i, j);
            const bool rows_ok = (Q.rowwise().sum().array() <= 1.5).all();
            const bool cols_ok = (Q.colwise().sum().array() <= 1.5).all();
            if (rows_ok && cols_ok) continue;
            const auto C = get_block(continuous.entries, index, i, j);
            const Eigen::MatrixXd masked = (Q.array() > 0.5).select(C, 0.0);
            const Eigen::MatrixXd fixed = hungarian_assign(masked).to_matrix();
            set_block(result.entries, index, i, j, fixed);
            set_block(result.entries, index, j, i, fixed.transpose());
        }
    }
    return result;
}

}  // namespace matchals
