#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "drmdp/dp.hpp"
#include "drmdp/dual.hpp"
#include "drmdp/envs.hpp"
#include "drmdp/rng.hpp"

namespace drmdp {

/**
 * Visit-indexed learning rates rate(n) = 1/(1+n)^beta with beta in (0.5, 1],
 * the range where sum rate(n) diverges and sum rate(n)^2 converges. The n-th
 * update of a pair uses rate(n), counting from n = 0.
 */
struct Schedule {
    double beta = 1.0;

    explicit Schedule(double beta_ = 1.0) : beta(beta_) {
        if (!(beta > 0.5 && beta <= 1.0))
            throw std::invalid_argument("Schedule: beta must lie in (0.5, 1]");
    }

    double rate(long n) const {
        return beta == 1.0 ? 1.0 / static_cast<double>(1 + n)
                           : std::pow(1.0 + static_cast<double>(n), -beta);
    }
};

/// Exploration probability, constant or exponentially decayed per step.
struct Exploration {
    double eps0 = 0.1;
    double decay = 1.0;

    double at(long t) const { return decay == 1.0 ? eps0 : eps0 * std::pow(decay, t); }
};

/// Mutable learner state: the table, per-pair visit counts, and the step index.
struct LearnerState {
    QTable q;
    std::vector<long> visits;
    long step = 0;
    Schedule schedule;
    Exploration exploration;

    LearnerState(int n_states, int n_actions, Schedule s = Schedule(1.0), Exploration e = {})
        : q(n_states, n_actions, 0.0),
          visits(static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions), 0),
          schedule(s), exploration(e) {}

    long visit_count(int x, int a) const {
        return visits[static_cast<std::size_t>(x) * static_cast<std::size_t>(q.n_actions()) +
                      static_cast<std::size_t>(a)];
    }

    long& visit_ref(int x, int a) {
        return visits[static_cast<std::size_t>(x) * static_cast<std::size_t>(q.n_actions()) +
                      static_cast<std::size_t>(a)];
    }
};

/**
 * Greedy action with probability 1 - eps_tilde (smallest index on ties),
 * otherwise uniform over all actions. Consumes one draw for the explore
 * decision and one more only when exploring.
 */
inline int select_action(const QTable& q, int x, double eps_tilde, Rng& rng) {
    const double u = rng.next_double();
    if (u < eps_tilde) return rng.next_index(q.n_actions());
    std::vector<double> row(static_cast<std::size_t>(q.n_actions()));
    for (int a = 0; a < q.n_actions(); ++a) row[static_cast<std::size_t>(a)] = q(x, a);
    return argmax_smallest(row);
}

namespace detail {

inline void bootstrap_integrand(const LearnerState& ls, int x, int a, const Environment& env,
                                std::vector<double>& f) {
    const int nx = env.n_states();
    f.resize(static_cast<std::size_t>(nx));
    const double alpha = env.spec.alpha;
    for (int y = 0; y < nx; ++y)
        f[static_cast<std::size_t>(y)] = env.reward(x, a, y) + alpha * ls.q.row_max(y);
}

inline void apply_target(LearnerState& ls, int x, int a, double target) {
    long& visits = ls.visit_ref(x, a);
    visits += 1;
    const double gamma = ls.schedule.rate(visits - 1);
    ls.q.at(x, a) += gamma * (target - ls.q(x, a));
    ls.step += 1;
}

}  // namespace detail

/**
 * One robust update at the realized transition (x, a, x_next):
 * build f(y) = r(x,a,y) + alpha max_b Q(y,b), pick the dual maximizer
 * lambda for the (x,a) ball, and move the (x,a) cell toward
 *     min_y { f(y) + lambda c(x_next, y) } - eps^q lambda.
 * With eps = 0 the ball is a point and the target is plain f(x_next).
 * No other cell changes. Returns the lambda used (unconstrained sentinel
 * for eps = 0) so callers can cache it.
 */
inline double robust_update(LearnerState& ls, int x, int a, int x_next, const Environment& env,
                            std::optional<double> cached_lambda = std::nullopt) {
    std::vector<double> f;
    detail::bootstrap_integrand(ls, x, a, env, f);

    double lambda, target;
    if (env.spec.epsilon == 0.0) {
        lambda = std::numeric_limits<double>::infinity();
        target = f[static_cast<std::size_t>(x_next)];
    } else {
        const DualInstance inst{f, &env.cost, &env.reference.row(x, a), env.spec.epsilon,
                                env.spec.q};
        lambda = cached_lambda ? *cached_lambda : maximize_dual(inst).lambda_star;
        target = detail::min_transform_finite(f, lambda, env.cost, x_next) -
                 inst.epsilon_pow() * lambda;
    }
    detail::apply_target(ls, x, a, target);
    return lambda;
}

/// Classical Watkins update: target r(x,a,x_next) + alpha max_b Q(x_next,b).
inline void classical_update(LearnerState& ls, int x, int a, int x_next, const Environment& env) {
    const double target =
        env.reward(x, a, x_next) + env.spec.alpha * ls.q.row_max(x_next);
    detail::apply_target(ls, x, a, target);
}

struct Snapshot {
    long t = 0;
    double sup_norm_error = 0.0;
    double eps_tilde = 0.0;
    std::uint64_t seed = 0;
};

struct TrainConfig {
    long steps = 50000;
    std::uint64_t seed = 1;
    int x0 = 0;
    Schedule schedule = Schedule(1.0);
    Exploration exploration = {};
    bool robust = true;
    /// Reuse each pair's dual maximizer for `lambda_cache_refresh` updates
    /// instead of recomputing it every step. Off by default: stale maximizers
    /// make the targets approximate.
    bool lambda_cache = false;
    int lambda_cache_refresh = 25;
    long snapshot_interval = 1000;
};

struct TrainResult {
    QTable q;
    std::vector<Snapshot> snapshots;
    std::vector<long> visits;  // per (x,a), row-major
    long steps = 0;

    long visit_count(int x, int a) const {
        return visits[static_cast<std::size_t>(x) * static_cast<std::size_t>(q.n_actions()) +
                      static_cast<std::size_t>(a)];
    }
};

/**
 * Run the learner for cfg.steps transitions simulated from the reference
 * kernel, starting at cfg.x0. When an exact table is supplied, the sup-norm
 * distance to it is recorded every snapshot_interval steps (and at the end).
 */
inline TrainResult train(const Environment& env, const TrainConfig& cfg,
                         const QTable* q_exact = nullptr) {
    env.spec.validate();
    if (cfg.steps < 0) throw std::invalid_argument("train: steps must be >= 0");
    if (cfg.x0 < 0 || cfg.x0 >= env.n_states())
        throw std::invalid_argument("train: x0 out of range");

    const int nx = env.n_states(), na = env.n_actions();
    LearnerState ls(nx, na, cfg.schedule, cfg.exploration);
    Rng rng(cfg.seed);

    std::vector<double> cached_lambda;
    std::vector<long> cache_age;
    if (cfg.lambda_cache) {
        cached_lambda.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(na), 0.0);
        cache_age.assign(cached_lambda.size(), -1);
    }

    TrainResult out;
    auto snapshot = [&](long t) {
        if (!q_exact) return;
        out.snapshots.push_back(
            Snapshot{t, ls.q.sup_norm_diff(*q_exact), cfg.exploration.at(t), cfg.seed});
    };

    snapshot(0);
    int x = cfg.x0;
    for (long t = 0; t < cfg.steps; ++t) {
        const int a = select_action(ls.q, x, cfg.exploration.at(t), rng);
        const int y = sample_next(env.reference, x, a, rng);
        if (!cfg.robust || env.spec.epsilon == 0.0) {
            classical_update(ls, x, a, y, env);
        } else if (cfg.lambda_cache) {
            const std::size_t cell = static_cast<std::size_t>(x) * static_cast<std::size_t>(na) +
                                     static_cast<std::size_t>(a);
            std::optional<double> reuse;
            if (cache_age[cell] >= 0 && cache_age[cell] < cfg.lambda_cache_refresh)
                reuse = cached_lambda[cell];
            const double lambda = robust_update(ls, x, a, y, env, reuse);
            if (reuse) {
                cache_age[cell] += 1;
            } else {
                cached_lambda[cell] = lambda;
                cache_age[cell] = 0;
            }
        } else {
            robust_update(ls, x, a, y, env);
        }
        x = y;
        const long done = t + 1;
        if (done < cfg.steps && cfg.snapshot_interval > 0 && done % cfg.snapshot_interval == 0)
            snapshot(done);
    }
    if (cfg.steps > 0) snapshot(cfg.steps);

    out.q = std::move(ls.q);
    out.visits = std::move(ls.visits);
    out.steps = cfg.steps;
    return out;
}

}  // namespace drmdp
