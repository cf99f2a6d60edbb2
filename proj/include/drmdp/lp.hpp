#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace drmdp::lp {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
    LpStatus status = LpStatus::optimal;
    double objective = 0.0;
    std::vector<double> x;
    long pivots = 0;
};

/**
 * Dense two-phase primal simplex for
 *
 *     minimize c.x   subject to   A x = b,  x >= 0.
 *
 * Pivoting follows Bland's anti-cycling rule: the entering column is the
 * lowest-index one with negative reduced cost, and ratio-test ties go to the
 * row whose basic variable has the lowest index. That guarantees termination
 * on the highly degenerate transport polytopes this solver exists for. Sized
 * for small oracle instances, not production-scale LPs.
 */
class Simplex {
public:
    Simplex(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double> c)
        : m_(a.size()), n_(c.size()), cost_(std::move(c)) {
        if (b.size() != m_) throw std::invalid_argument("Simplex: b size mismatch");
        for (const auto& row : a)
            if (row.size() != n_) throw std::invalid_argument("Simplex: A row size mismatch");

        // Tableau columns: n structural, m artificial, then the rhs.
        width_ = n_ + m_ + 1;
        tab_.assign(m_, std::vector<double>(width_, 0.0));
        basis_.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) {
            const double sign = b[i] < 0.0 ? -1.0 : 1.0;
            for (std::size_t j = 0; j < n_; ++j) tab_[i][j] = sign * a[i][j];
            tab_[i][n_ + i] = 1.0;
            tab_[i][width_ - 1] = sign * b[i];
            basis_[i] = n_ + i;
        }
    }

    LpResult solve() {
        LpResult res;

        // Phase 1: minimize the sum of artificials.
        std::vector<double> phase1(width_ - 1, 0.0);
        for (std::size_t j = n_; j < n_ + m_; ++j) phase1[j] = 1.0;
        build_cost_row(phase1);
        run(/*allow_artificial=*/true, res.pivots);
        if (objective_value() > kFeasTol) {
            res.status = LpStatus::infeasible;
            return res;
        }
        purge_artificials(res.pivots);

        // Phase 2: the real objective over the feasible basis.
        build_cost_row(cost_);
        if (!run(/*allow_artificial=*/false, res.pivots)) {
            res.status = LpStatus::unbounded;
            return res;
        }

        res.status = LpStatus::optimal;
        res.objective = objective_value();
        res.x.assign(n_, 0.0);
        for (std::size_t i = 0; i < m_; ++i)
            if (row_live_[i] && basis_[i] < n_) res.x[basis_[i]] = tab_[i][width_ - 1];
        return res;
    }

private:
    static constexpr double kPivotTol = 1e-9;
    static constexpr double kFeasTol = 1e-8;

    void build_cost_row(const std::vector<double>& c) {
        cost_row_.assign(width_, 0.0);
        for (std::size_t j = 0; j < c.size(); ++j) cost_row_[j] = c[j];
        if (row_live_.size() != m_) row_live_.assign(m_, true);
        for (std::size_t i = 0; i < m_; ++i) {
            if (!row_live_[i]) continue;
            const double cb = cost_row_at_init(c, basis_[i]);
            if (cb == 0.0) continue;
            for (std::size_t j = 0; j < width_; ++j) cost_row_[j] -= cb * tab_[i][j];
        }
    }

    static double cost_row_at_init(const std::vector<double>& c, std::size_t j) {
        return j < c.size() ? c[j] : 0.0;
    }

    double objective_value() const { return -cost_row_[width_ - 1]; }

    /// Returns false on unboundedness.
    bool run(bool allow_artificial, long& pivots) {
        const std::size_t limit = n_ + (allow_artificial ? m_ : 0);
        const long pivot_cap = 2000 + 200 * static_cast<long>(m_ + n_);
        for (;;) {
            std::size_t enter = width_;
            for (std::size_t j = 0; j < limit; ++j) {
                if (cost_row_[j] < -kPivotTol) {
                    enter = j;
                    break;
                }
            }
            if (enter == width_) return true;

            std::size_t leave = m_;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m_; ++i) {
                if (!row_live_[i]) continue;
                const double piv = tab_[i][enter];
                if (piv <= kPivotTol) continue;
                const double ratio = tab_[i][width_ - 1] / piv;
                if (ratio < best_ratio - 1e-12 ||
                    (ratio < best_ratio + 1e-12 && (leave == m_ || basis_[i] < basis_[leave]))) {
                    best_ratio = ratio;
                    leave = i;
                }
            }
            if (leave == m_) return false;

            pivot(leave, enter);
            if (++pivots > pivot_cap)
                throw std::runtime_error("Simplex: pivot cap exceeded");
        }
    }

    void pivot(std::size_t row, std::size_t col) {
        const double piv = tab_[row][col];
        for (std::size_t j = 0; j < width_; ++j) tab_[row][j] /= piv;
        tab_[row][col] = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == row || !row_live_[i]) continue;
            const double factor = tab_[i][col];
            if (factor == 0.0) continue;
            for (std::size_t j = 0; j < width_; ++j) tab_[i][j] -= factor * tab_[row][j];
            tab_[i][col] = 0.0;
        }
        const double cf = cost_row_[col];
        if (cf != 0.0) {
            for (std::size_t j = 0; j < width_; ++j) cost_row_[j] -= cf * tab_[row][j];
            cost_row_[col] = 0.0;
        }
        basis_[row] = col;
    }

    /// Pivot leftover artificial basics onto structural columns, or retire
    /// their rows as redundant constraints.
    void purge_artificials(long& pivots) {
        for (std::size_t i = 0; i < m_; ++i) {
            if (!row_live_[i] || basis_[i] < n_) continue;
            std::size_t col = width_;
            for (std::size_t j = 0; j < n_; ++j) {
                if (std::abs(tab_[i][j]) > kPivotTol) {
                    col = j;
                    break;
                }
            }
            if (col == width_) {
                row_live_[i] = false;
            } else {
                pivot(i, col);
                ++pivots;
            }
        }
    }

    std::size_t m_ = 0, n_ = 0, width_ = 0;
    std::vector<double> cost_;
    std::vector<std::vector<double>> tab_;
    std::vector<double> cost_row_;
    std::vector<std::size_t> basis_;
    std::vector<bool> row_live_;
};

inline LpResult solve_equality_form(std::vector<std::vector<double>> a, std::vector<double> b,
                                    std::vector<double> c) {
    return Simplex(std::move(a), std::move(b), std::move(c)).solve();
}

}  // namespace drmdp::lp
