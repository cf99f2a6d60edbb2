#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "drmdp/cost.hpp"
#include "drmdp/lp.hpp"
#include "drmdp/mdp.hpp"

namespace drmdp {

/// Joint distribution over X x X with prescribed marginals.
struct Coupling {
    int n = 0;
    std::vector<double> plan;  // row-major

    double operator()(int x, int y) const {
        return plan[static_cast<std::size_t>(x) * static_cast<std::size_t>(n) +
                    static_cast<std::size_t>(y)];
    }

    /// Marginal defect against the prescribed pair, in sup norm.
    double marginal_error(const Distribution& first, const Distribution& second) const {
        double err = 0.0;
        for (int x = 0; x < n; ++x) {
            double row = 0.0, col = 0.0;
            for (int y = 0; y < n; ++y) {
                row += (*this)(x, y);
                col += (*this)(y, x);
            }
            err = std::max(err, std::abs(row - first.weight(x)));
            err = std::max(err, std::abs(col - second.weight(x)));
        }
        return err;
    }
};

struct TransportResult {
    double cost = 0.0;  // optimal coupling cost, before the 1/q root
    Coupling plan;
};

/**
 * Exact optimal transport between two distributions on the same indexed
 * support. Cells with infinite cost are excluded from the plan; if they choke
 * off every coupling the instance is infeasible.
 */
inline TransportResult w_distance_lp(const Distribution& p, const Distribution& r,
                                     const CostMatrix& cost) {
    const int n = cost.size();
    if (p.size() != n || r.size() != n)
        throw std::invalid_argument("w_distance_lp: distributions do not match the cost support");
    if (n > kLpSupportCap)
        throw std::invalid_argument("w_distance_lp: support exceeds the dense LP cap");

    // Variables: finite-cost cells (x,y). Constraints: n row sums = p, and the
    // first n-1 column sums = r (the last one is implied by mass balance).
    std::vector<std::pair<int, int>> cells;
    cells.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x)
        for (int y : cost.finite_targets(x)) cells.emplace_back(x, y);

    const std::size_t nv = cells.size();
    const std::size_t m = static_cast<std::size_t>(2 * n - 1);
    std::vector<std::vector<double>> a(m, std::vector<double>(nv, 0.0));
    std::vector<double> b(m, 0.0), obj(nv, 0.0);
    for (std::size_t k = 0; k < nv; ++k) {
        const auto [x, y] = cells[k];
        a[static_cast<std::size_t>(x)][k] = 1.0;
        if (y < n - 1) a[static_cast<std::size_t>(n + y)][k] = 1.0;
        obj[k] = cost(x, y);
    }
    for (int x = 0; x < n; ++x) b[static_cast<std::size_t>(x)] = p.weight(x);
    for (int y = 0; y + 1 < n; ++y) b[static_cast<std::size_t>(n + y)] = r.weight(y);

    const lp::LpResult res = lp::solve_equality_form(std::move(a), std::move(b), std::move(obj));
    if (res.status == lp::LpStatus::infeasible)
        throw std::runtime_error("w_distance_lp: no finite-cost coupling exists");
    if (res.status != lp::LpStatus::optimal)
        throw std::runtime_error("w_distance_lp: solver failure");

    TransportResult out;
    out.cost = res.objective;
    out.plan.n = n;
    out.plan.plan.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    for (std::size_t k = 0; k < nv; ++k) {
        const auto [x, y] = cells[k];
        out.plan.plan[static_cast<std::size_t>(x) * static_cast<std::size_t>(n) +
                      static_cast<std::size_t>(y)] = res.x[k];
    }
    if (out.plan.marginal_error(p, r) > 1e-9)
        throw std::runtime_error("w_distance_lp: coupling violates its marginals");
    return out;
}

/**
 * 1-Wasserstein distance between distributions on a common sorted scalar
 * support, via the CDF-difference formula
 *     W1 = sum_k |F_p(s_k) - F_r(s_k)| (s_{k+1} - s_k).
 * Orders q > 1 are routed through the coupling LP.
 */
inline double w_distance_1d(const Distribution& p, const Distribution& r,
                            std::span<const double> support, int q = 1) {
    const int n = static_cast<int>(support.size());
    if (p.size() != n || r.size() != n)
        throw std::invalid_argument("w_distance_1d: support size mismatch");
    for (int k = 0; k + 1 < n; ++k)
        if (!(support[static_cast<std::size_t>(k)] < support[static_cast<std::size_t>(k + 1)]))
            throw std::invalid_argument("w_distance_1d: support must be strictly increasing");
    if (q < 1) throw std::invalid_argument("w_distance_1d: q must be a positive integer");

    if (q != 1) {
        std::vector<Point> pts;
        pts.reserve(static_cast<std::size_t>(n));
        for (double s : support) pts.push_back({s});
        const StateSpace states(std::move(pts));
        const double cost = w_distance_lp(p, r, cost_c1(states, q)).cost;
        return std::pow(cost, 1.0 / static_cast<double>(q));
    }

    double w = 0.0, fp = 0.0, fr = 0.0;
    for (int k = 0; k + 1 < n; ++k) {
        fp += p.weight(k);
        fr += r.weight(k);
        w += std::abs(fp - fr) *
             (support[static_cast<std::size_t>(k + 1)] - support[static_cast<std::size_t>(k)]);
    }
    return w;
}

}  // namespace drmdp
