#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "drmdp/cost.hpp"
#include "drmdp/lp.hpp"
#include "drmdp/mdp.hpp"

namespace drmdp {

/**
 * One worst-case expectation problem: the integrand f over the state space,
 * the transport cost, one reference kernel row, and the ball parameters.
 * Views are non-owning; the caller keeps f, cost and reference alive.
 */
struct DualInstance {
    std::span<const double> f;
    const CostMatrix* cost = nullptr;
    const Distribution* reference = nullptr;
    double epsilon = 0.0;
    int q = 1;

    double epsilon_pow() const { return std::pow(epsilon, q); }
};

struct DualSolution {
    double lambda_star = 0.0;  // +inf sentinel when epsilon = 0 (unconstrained)
    double value = 0.0;
    long candidates_evaluated = 0;
};

/// (f)^{lambda c}(x) = max_y { f(y) - lambda c(x,y) }, with 0 * inf := 0.
inline double lambda_c_transform(std::span<const double> f, double lambda, const CostMatrix& cost,
                                 int x) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda_c_transform: lambda must be >= 0");
    double best = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < cost.size(); ++y) {
        const double penalty = lambda_cost(lambda, cost(x, y));
        if (penalty == kInfiniteCost) continue;
        best = std::max(best, f[static_cast<std::size_t>(y)] - penalty);
    }
    return best;
}

namespace detail {

/// min_y { f(y) + lambda c(x,y) } restricted to finite-cost targets. For
/// lambda > 0 this equals the unrestricted minimum under 0 * inf := 0; at
/// lambda = 0 it is the right-limit that makes the dual objective continuous,
/// which is the value strong duality needs.
inline double min_transform_finite(std::span<const double> f, double lambda,
                                   const CostMatrix& cost, int x) {
    double best = std::numeric_limits<double>::infinity();
    for (int y : cost.finite_targets(x)) {
        const double v = f[static_cast<std::size_t>(y)] + lambda * cost(x, y);
        best = std::min(best, v);
    }
    return best;
}

inline double dual_objective_closed(const DualInstance& inst, double lambda) {
    const Distribution& ref = *inst.reference;
    double s = 0.0;
    for (int x = 0; x < ref.size(); ++x) {
        const double w = ref.weight(x);
        if (w <= 0.0) continue;
        s += w * min_transform_finite(inst.f, lambda, *inst.cost, x);
    }
    return s - inst.epsilon_pow() * lambda;
}

}  // namespace detail

/**
 * G(lambda) = E_ref[ min_y { f(y) + lambda c(X,y) } ] - eps^q lambda, using
 * the identity -(-f)^{lambda c}(x) = min_y { f(y) + lambda c(x,y) } and the
 * convention 0 * inf := 0. Concave piecewise-linear in lambda on (0, inf).
 */
inline double dual_objective(const DualInstance& inst, double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("dual_objective: lambda must be >= 0");
    const Distribution& ref = *inst.reference;
    const CostMatrix& cost = *inst.cost;
    double s = 0.0;
    for (int x = 0; x < ref.size(); ++x) {
        const double w = ref.weight(x);
        if (w <= 0.0) continue;
        double best = std::numeric_limits<double>::infinity();
        for (int y = 0; y < cost.size(); ++y) {
            const double penalty = lambda_cost(lambda, cost(x, y));
            if (penalty == kInfiniteCost) continue;
            best = std::min(best, inst.f[static_cast<std::size_t>(y)] + penalty);
        }
        s += w * best;
    }
    return s - inst.epsilon_pow() * lambda;
}

namespace detail {

/// Kinks of G can only sit where two finite-cost lines of one row cross.
inline void collect_breakpoints(const DualInstance& inst, std::vector<double>& out) {
    const Distribution& ref = *inst.reference;
    const CostMatrix& cost = *inst.cost;
    out.clear();
    out.push_back(0.0);
    for (int x = 0; x < ref.size(); ++x) {
        if (ref.weight(x) <= 0.0) continue;
        const std::span<const int> targets = cost.finite_targets(x);
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const int yi = targets[i];
            const double ci = cost(x, yi);
            const double fi = inst.f[static_cast<std::size_t>(yi)];
            for (std::size_t j = i + 1; j < targets.size(); ++j) {
                const int yj = targets[j];
                const double cj = cost(x, yj);
                if (cj == ci) continue;
                const double lam = (fi - inst.f[static_cast<std::size_t>(yj)]) / (cj - ci);
                if (lam > 0.0 && std::isfinite(lam)) out.push_back(lam);
            }
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
}

/// Fallback for large inner supports where pair enumeration is too wide:
/// ternary search on the concave objective over [0, lambda_max].
inline DualSolution maximize_dual_ternary(const DualInstance& inst) {
    double fmin = std::numeric_limits<double>::infinity();
    double fmax = -fmin;
    for (double v : inst.f) {
        fmin = std::min(fmin, v);
        fmax = std::max(fmax, v);
    }
    const double min_cost = inst.cost->min_positive_finite();
    double hi = min_cost == kInfiniteCost ? 1.0 : 2.0 * (fmax - fmin) / min_cost;
    if (!(hi > 0.0)) hi = 1.0;

    double lo = 0.0;
    long evals = 2;
    for (int it = 0; it < 300; ++it) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (dual_objective_closed(inst, m1) < dual_objective_closed(inst, m2))
            lo = m1;
        else
            hi = m2;
        evals += 2;
    }
    DualSolution best{0.0, dual_objective_closed(inst, 0.0), evals};
    const double mid = 0.5 * (lo + hi);
    const double v = dual_objective_closed(inst, mid);
    if (v > best.value) {
        best.lambda_star = mid;
        best.value = v;
    }
    return best;
}

}  // namespace detail

/**
 * Global maximizer of G over [0, inf), by exact breakpoint enumeration: G is
 * concave piecewise-linear, so its maximum sits at 0 or at a crossing of two
 * finite-cost lines within one reference row. Ties resolve to the smallest
 * lambda. With epsilon = 0 the supremum is only approached as lambda -> inf;
 * that case returns E_ref[f] with an infinite lambda sentinel.
 */
inline DualSolution maximize_dual(const DualInstance& inst) {
    const Distribution& ref = *inst.reference;
    if (inst.epsilon == 0.0) {
        return DualSolution{std::numeric_limits<double>::infinity(), ref.expectation(inst.f), 0};
    }

    std::size_t widest = 0;
    for (int x = 0; x < ref.size(); ++x)
        if (ref.weight(x) > 0.0)
            widest = std::max(widest, inst.cost->finite_targets(x).size());
    if (widest > 512) return detail::maximize_dual_ternary(inst);

    std::vector<double> candidates;
    detail::collect_breakpoints(inst, candidates);

    DualSolution best{0.0, -std::numeric_limits<double>::infinity(), 0};
    for (double lam : candidates) {
        const double v = detail::dual_objective_closed(inst, lam);
        ++best.candidates_evaluated;
        if (v > best.value) {
            best.value = v;
            best.lambda_star = lam;
        }
    }
    return best;
}

/**
 * inf over the Wasserstein ball of E_P[f], evaluated through the dual. For
 * history-state instances the reference row and c2 cost are laid out on the
 * full state space; infinite entries confine the inner minimum to the states
 * sharing the reference prefix.
 */
inline double worst_case_expectation(const DualInstance& inst) {
    return maximize_dual(inst).value;
}

/**
 * Primal oracle: minimize sum pi(x,y) f(y) over plans pi >= 0 whose first
 * marginal is the reference row, subject to sum pi c <= eps^q. Exact via the
 * dense simplex; scales to oracle-sized supports only.
 */
inline double primal_worst_case_lp(const DualInstance& inst) {
    const Distribution& ref = *inst.reference;
    const CostMatrix& cost = *inst.cost;
    const int n = cost.size();
    if (ref.size() != n)
        throw std::invalid_argument("primal_worst_case_lp: reference does not match cost support");
    if (n > kLpSupportCap)
        throw std::invalid_argument("primal_worst_case_lp: support exceeds the dense LP cap");

    std::vector<int> support;
    for (int x = 0; x < n; ++x)
        if (ref.weight(x) > 0.0) support.push_back(x);

    std::vector<std::pair<int, int>> cells;
    for (std::size_t i = 0; i < support.size(); ++i)
        for (int y : cost.finite_targets(support[i]))
            cells.emplace_back(static_cast<int>(i), y);

    // Rows: one mass-balance row per support state, then the budget row with
    // its slack appended as the last variable.
    const std::size_t nv = cells.size() + 1;
    const std::size_t m = support.size() + 1;
    std::vector<std::vector<double>> a(m, std::vector<double>(nv, 0.0));
    std::vector<double> b(m, 0.0), obj(nv, 0.0);
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto [i, y] = cells[k];
        a[static_cast<std::size_t>(i)][k] = 1.0;
        a[m - 1][k] = cost(support[static_cast<std::size_t>(i)], y);
        obj[k] = inst.f[static_cast<std::size_t>(y)];
    }
    a[m - 1][nv - 1] = 1.0;  // slack
    for (std::size_t i = 0; i < support.size(); ++i)
        b[i] = ref.weight(support[i]);
    b[m - 1] = inst.epsilon_pow();

    const lp::LpResult res = lp::solve_equality_form(std::move(a), std::move(b), std::move(obj));
    if (res.status == lp::LpStatus::infeasible)
        throw std::runtime_error("primal_worst_case_lp: infeasible instance");
    if (res.status != lp::LpStatus::optimal)
        throw std::runtime_error("primal_worst_case_lp: solver failure");
    return res.objective;
}

}  // namespace drmdp
