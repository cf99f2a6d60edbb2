#pragma once

// Test-side oracles, independent of the library paths they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "drmdp/cost.hpp"
#include "drmdp/dual.hpp"
#include "drmdp/mdp.hpp"
#include "drmdp/rng.hpp"

namespace oracles {

using drmdp::CostMatrix;
using drmdp::Distribution;
using drmdp::DualInstance;
using drmdp::Point;
using drmdp::Rng;
using drmdp::StateSpace;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Gaussian elimination with partial pivoting; false when singular.
inline bool solve_square(std::vector<std::vector<double>> a, std::vector<double> b,
                         std::vector<double>& x) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-10) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double factor = a[r][col] / a[col][col];
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
            b[r] -= factor * b[col];
        }
    }
    x.resize(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
    return true;
}

/**
 * Exhaustive vertex enumeration of the transport polytope: every basic
 * feasible solution is inspected, so the minimum over vertices is the exact
 * LP optimum. Only finite-cost cells participate. Returns infinity when no
 * feasible vertex exists.
 */
inline double transport_min_by_vertex_enumeration(const Distribution& p, const Distribution& r,
                                                  const CostMatrix& cost) {
    const int n = cost.size();
    std::vector<std::pair<int, int>> cells;
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            if (cost.is_finite(x, y)) cells.emplace_back(x, y);

    const std::size_t m = static_cast<std::size_t>(2 * n - 1);
    const std::size_t nv = cells.size();
    if (nv < m) return kInf;

    std::vector<double> b(m);
    for (int x = 0; x < n; ++x) b[static_cast<std::size_t>(x)] = p.weight(x);
    for (int y = 0; y + 1 < n; ++y) b[static_cast<std::size_t>(n + y)] = r.weight(y);

    double best = kInf;
    std::vector<std::size_t> pick(m);
    for (std::size_t i = 0; i < m; ++i) pick[i] = i;

    auto eval_basis = [&]() {
        std::vector<std::vector<double>> a(m, std::vector<double>(m, 0.0));
        for (std::size_t k = 0; k < m; ++k) {
            const auto [x, y] = cells[pick[k]];
            a[static_cast<std::size_t>(x)][k] = 1.0;
            if (y < n - 1) a[static_cast<std::size_t>(n + y)][k] = 1.0;
        }
        std::vector<double> sol;
        if (!solve_square(std::move(a), b, sol)) return;
        double obj = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            if (sol[k] < -1e-9) return;  // infeasible vertex
            const auto [x, y] = cells[pick[k]];
            obj += sol[k] * cost(x, y);
        }
        best = std::min(best, obj);
    };

    // Enumerate all m-subsets of the cells in lexicographic order.
    for (;;) {
        eval_basis();
        std::size_t i = m;
        while (i > 0 && pick[i - 1] == nv - m + (i - 1)) --i;
        if (i == 0) break;
        ++pick[i - 1];
        for (std::size_t j = i; j < m; ++j) pick[j] = pick[j - 1] + 1;
    }
    return best;
}

/// Random weight vector, occasionally sparse, normalized to the simplex.
inline std::vector<double> random_simplex(int n, Rng& rng, bool allow_zeros = true) {
    std::vector<double> w(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (double& v : w) {
        v = rng.next_double();
        if (allow_zeros && rng.next_double() < 0.2) v = 0.0;
        sum += v;
    }
    if (sum == 0.0) {
        w[0] = 1.0;
        sum = 1.0;
    }
    for (double& v : w) v /= sum;
    // force exact unit sum so the checked constructor accepts the row
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) acc += w[i];
    w.back() = 1.0 - acc;
    if (w.back() < 0.0) w.back() = 0.0;
    return w;
}

struct RandomInstance {
    StateSpace states;
    CostMatrix cost;
    std::vector<double> f;
    Distribution reference;
    double epsilon;
    int q;

    DualInstance view() const { return DualInstance{f, &cost, &reference, epsilon, q}; }
};

/// Random scalar-support instance with ground cost |x-y|^q.
inline RandomInstance random_c1_instance(Rng& rng, double epsilon, int q) {
    const int n = 2 + rng.next_index(5);  // 2..6 states
    std::vector<double> raw(static_cast<std::size_t>(n));
    for (double& v : raw) v = 10.0 * rng.next_double();
    std::sort(raw.begin(), raw.end());
    for (std::size_t i = 1; i < raw.size(); ++i)
        if (raw[i] - raw[i - 1] < 1e-3) raw[i] = raw[i - 1] + 1e-3 + rng.next_double();
    std::vector<Point> pts;
    for (double v : raw) pts.push_back({v});
    StateSpace states(std::move(pts));
    CostMatrix cost = drmdp::cost_c1(states, q);
    std::vector<double> f(static_cast<std::size_t>(n));
    for (double& v : f) v = 2.0 * rng.next_double() - 1.0;
    Distribution ref(random_simplex(n, rng));
    return RandomInstance{std::move(states), std::move(cost), std::move(f), std::move(ref),
                          epsilon, q};
}

/// Random history-state instance on T^2 with T = {0,1}: 4 states, two
/// prefix classes separated by infinite cost.
inline RandomInstance random_c2_instance(Rng& rng, double epsilon, int q) {
    std::vector<Point> pts = {{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}};
    StateSpace states(std::move(pts));
    CostMatrix cost = drmdp::cost_c2(states, 2, q);
    std::vector<double> f(4);
    for (double& v : f) v = 2.0 * rng.next_double() - 1.0;
    // Either an arbitrary reference or one confined to a prefix class, the
    // shape the history-state kernels produce.
    std::vector<double> w;
    if (rng.next_double() < 0.5) {
        w = random_simplex(4, rng);
    } else {
        w.assign(4, 0.0);
        const int cls = rng.next_index(2);
        const double u = rng.next_double();
        w[static_cast<std::size_t>(2 * cls)] = u;
        w[static_cast<std::size_t>(2 * cls + 1)] = 1.0 - u;
    }
    Distribution ref(std::move(w));
    return RandomInstance{std::move(states), std::move(cost), std::move(f), std::move(ref),
                          epsilon, q};
}

/// Best value of the literal dual objective over a uniform lambda grid.
inline double dual_grid_search(const DualInstance& inst, int points) {
    double fmin = kInf, fmax = -kInf;
    for (double v : inst.f) {
        fmin = std::min(fmin, v);
        fmax = std::max(fmax, v);
    }
    const double min_cost = inst.cost->min_positive_finite();
    double lambda_max = min_cost == kInf ? 1.0 : 2.0 * (fmax - fmin) / min_cost;
    if (!(lambda_max > 0.0)) lambda_max = 1.0;
    double best = -kInf;
    for (int i = 0; i <= points; ++i) {
        const double lam = lambda_max * static_cast<double>(i) / static_cast<double>(points);
        best = std::max(best, drmdp::dual_objective(inst, lam));
    }
    return best;
}

/// Simulate an order-(h-1) Markov chain over the return alphabet.
struct SyntheticChain {
    int h = 3;
    std::vector<std::array<double, 4>> rows;  // transition row per prefix index

    static SyntheticChain make(int h, Rng& rng) {
        SyntheticChain c;
        c.h = h;
        int n_prefix = 1;
        for (int i = 0; i + 1 < h; ++i) n_prefix *= 4;
        c.rows.resize(static_cast<std::size_t>(n_prefix));
        for (auto& row : c.rows) {
            double sum = 0.0;
            for (double& v : row) {
                v = 0.1 + 0.9 * rng.next_double();  // bounded away from 0
                sum += v;
            }
            for (double& v : row) v /= sum;
        }
        return c;
    }

    std::vector<int> simulate(std::size_t length, Rng& rng) const {
        std::vector<int> symbols;
        symbols.reserve(length);
        for (int i = 0; i + 1 < h; ++i)
            symbols.push_back(drmdp::kReturnAlphabet[static_cast<std::size_t>(rng.next_index(4))]);
        while (symbols.size() < length) {
            int prefix = 0;
            for (int i = h - 1; i >= 1; --i)
                prefix = prefix * 4 +
                         drmdp::symbol_index(symbols[symbols.size() - static_cast<std::size_t>(i)]);
            const auto& row = rows[static_cast<std::size_t>(prefix)];
            const int next = drmdp::sample_weights(
                std::span<const double>(row.data(), row.size()), rng);
            symbols.push_back(drmdp::kReturnAlphabet[static_cast<std::size_t>(next)]);
        }
        return symbols;
    }
};

/// Independent window counter for cross-checking the empirical kernel.
inline std::vector<std::array<double, 4>> count_windows(const std::vector<int>& symbols, int h) {
    int n_prefix = 1;
    for (int i = 0; i + 1 < h; ++i) n_prefix *= 4;
    std::vector<std::array<double, 4>> counts(static_cast<std::size_t>(n_prefix),
                                              {0.0, 0.0, 0.0, 0.0});
    for (std::size_t j = 0; j + static_cast<std::size_t>(h) <= symbols.size(); ++j) {
        int prefix = 0;
        for (int i = 0; i + 1 < h; ++i)
            prefix = prefix * 4 + drmdp::symbol_index(symbols[j + static_cast<std::size_t>(i)]);
        counts[static_cast<std::size_t>(prefix)]
              [static_cast<std::size_t>(drmdp::symbol_index(
                  symbols[j + static_cast<std::size_t>(h) - 1]))] += 1.0;
    }
    return counts;
}

}  // namespace oracles
