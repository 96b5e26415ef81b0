#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace matchals {

/// Binary matching between two feature sets: at most one match per row and
/// per column. Rows or columns may stay unmatched.
struct PartialPermutation {
    int rows = 0;
    int cols = 0;
    std::vector<std::pair<int, int>> matches;  // sorted by (row, col)

    void validate() const {
        std::vector<char> row_used(rows, 0), col_used(cols, 0);
        for (const auto& [r, c] : matches) {
            if (r < 0 || r >= rows || c < 0 || c >= cols) {
                throw std::invalid_argument("match index out of range");
            }
            if (row_used[r]++ || col_used[c]++) {
                throw std::invalid_argument("row or column matched more than once");
            }
        }
    }

    Eigen::MatrixXd to_matrix() const {
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(rows, cols);
        for (const auto& [r, c] : matches) M(r, c) = 1.0;
        return M;
    }

    /// Sum of scores over the matched pairs, accumulated in (row, col) order.
    double objective(const Eigen::MatrixXd& S) const {
        double total = 0.0;
        for (const auto& [r, c] : matches) total += S(r, c);
        return total;
    }
};

namespace detail {

/// Minimum-cost perfect assignment on a square cost matrix via the
/// potentials (shortest augmenting path) method, O(n^3).
/// Returns col_of_row.
inline std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> col_of_row(n, -1);
    for (int j = 1; j <= n; ++j) col_of_row[p[j] - 1] = j - 1;
    return col_of_row;
}

/// Maximum total weight of a partial matching on a rectangular weight
/// matrix whose unusable entries are exactly the non-positive ones.
inline double max_matching_value(const Eigen::MatrixXd& W) {
    const int p = static_cast<int>(W.rows());
    const int q = static_cast<int>(W.cols());
    const int n = std::max(p, q);
    if (n == 0) return 0.0;
    Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n, n);
    cost.topLeftCorner(p, q) = -W.cwiseMax(0.0);
    const auto col_of_row = min_cost_assignment(cost);
    double value = 0.0;
    for (int r = 0; r < p; ++r) {
        const int c = col_of_row[r];
        if (c < q && W(r, c) > 0.0) value += W(r, c);
    }
    return value;
}

}  // namespace detail

/// Maximum-score linear assignment. Only pairs with S(row, col) > min_score
/// are eligible; leaving a row or column unmatched contributes zero, so
/// pairs with non-positive score are never matched. Among all
/// maximum-objective assignments, returns the one whose sorted (row, col)
/// pair list is lexicographically smallest.
inline PartialPermutation hungarian_assign(const Eigen::MatrixXd& S, double min_score = 0.0) {
    if (!S.allFinite()) {
        throw std::invalid_argument("scores must be finite");
    }
    const int p = static_cast<int>(S.rows());
    const int q = static_cast<int>(S.cols());

    // Eligible entries keep their score; everything else becomes 0, which
    // max_matching_value treats as unusable.
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(p, q);
    for (int r = 0; r < p; ++r) {
        for (int c = 0; c < q; ++c) {
            if (S(r, c) > min_score && S(r, c) > 0.0) W(r, c) = S(r, c);
        }
    }

    const double best = detail::max_matching_value(W);
    const double tol = 1e-9 * std::max(1.0, std::abs(best));

    // Fix pairs row by row, smallest eligible column first, keeping only
    // choices under which the remaining subproblem can still reach the
    // optimum. Rows with no optimality-preserving column stay unmatched.
    PartialPermutation result{p, q, {}};
    std::vector<char> col_used(q, 0);
    double fixed_value = 0.0;
    for (int r = 0; r < p; ++r) {
        for (int c = 0; c < q; ++c) {
            if (col_used[c] || W(r, c) <= 0.0) continue;
            std::vector<int> free_cols;
            for (int j = 0; j < q; ++j) {
                if (!col_used[j] && j != c) free_cols.push_back(j);
            }
            Eigen::MatrixXd sub(p - r - 1, static_cast<int>(free_cols.size()));
            for (int rr = r + 1; rr < p; ++rr) {
                for (std::size_t jj = 0; jj < free_cols.size(); ++jj) {
                    sub(rr - r - 1, static_cast<int>(jj)) = W(rr, free_cols[jj]);
                }
            }
            const double completion = detail::max_matching_value(sub);
            if (fixed_value + W(r, c) + completion >= best - tol) {
                result.matches.emplace_back(r, c);
                col_used[c] = 1;
                fixed_value += W(r, c);
                break;
            }
        }
    }
    return result;
}

}  // namespace matchals
