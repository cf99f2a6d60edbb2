#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "drmdp/dual.hpp"
#include "drmdp/envs.hpp"
#include "drmdp/mdp.hpp"

namespace drmdp {

/// |X| x |A| table of state-action values.
class QTable {
public:
    QTable() = default;
    QTable(int n_states, int n_actions, double init = 0.0)
        : nx_(n_states), na_(n_actions),
          values_(static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions), init) {}

    int n_states() const { return nx_; }
    int n_actions() const { return na_; }

    double operator()(int x, int a) const { return values_[flat(x, a)]; }
    double& at(int x, int a) { return values_[flat(x, a)]; }

    std::span<const double> flat_values() const { return values_; }

    double row_max(int x) const {
        double m = values_[flat(x, 0)];
        for (int a = 1; a < na_; ++a) m = std::max(m, values_[flat(x, a)]);
        return m;
    }

    double sup_norm_diff(const QTable& other) const {
        double d = 0.0;
        for (std::size_t i = 0; i < values_.size(); ++i)
            d = std::max(d, std::abs(values_[i] - other.values_[i]));
        return d;
    }

    bool identical(const QTable& other) const { return values_ == other.values_; }

private:
    std::size_t flat(int x, int a) const {
        return static_cast<std::size_t>(x) * static_cast<std::size_t>(na_) +
               static_cast<std::size_t>(a);
    }

    int nx_ = 0, na_ = 0;
    std::vector<double> values_;
};

/// Lowest index among the maximal entries; the shared greedy tie-break.
inline int argmax_smallest(std::span<const double> values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

/**
 * One application of the robust Bellman operator: for every (x,a), the
 * worst-case expectation over the ambiguity ball of
 *     y -> r(x,a,y) + alpha max_b q(y,b).
 * Cells are independent; with threads > 1 they are computed in parallel and
 * written to disjoint slots, so the result does not depend on the schedule.
 */
inline QTable bellman_H(const QTable& q_in, const Environment& env, int threads = 1) {
    const int nx = env.n_states(), na = env.n_actions();
    if (q_in.n_states() != nx || q_in.n_actions() != na)
        throw std::invalid_argument("bellman_H: table shape mismatch");

    std::vector<double> v(static_cast<std::size_t>(nx));
    for (int y = 0; y < nx; ++y) v[static_cast<std::size_t>(y)] = q_in.row_max(y);

    QTable out(nx, na);
    const double alpha = env.spec.alpha;
    auto worker = [&](int begin, int end) {
        std::vector<double> f(static_cast<std::size_t>(nx));
        for (int cell = begin; cell < end; ++cell) {
            const int x = cell / na;
            const int a = cell % na;
            for (int y = 0; y < nx; ++y)
                f[static_cast<std::size_t>(y)] =
                    env.reward(x, a, y) + alpha * v[static_cast<std::size_t>(y)];
            const DualInstance inst{f, &env.cost, &env.reference.row(x, a), env.spec.epsilon,
                                    env.spec.q};
            out.at(x, a) = worst_case_expectation(inst);
        }
    };

    const int cells = nx * na;
    if (threads <= 1 || cells < 2 * threads) {
        worker(0, cells);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (cells + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const int begin = t * chunk;
            const int end = std::min(cells, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    return out;
}

struct ViResult {
    QTable q;
    int iterations = 0;
    double residual = 0.0;
};

/**
 * Robust value iteration from Q = 0 until the Bellman residual drops to tol.
 * H contracts at rate alpha, so the returned table is within
 * tol * alpha / (1 - alpha) of the fixed point.
 */
inline ViResult value_iteration(const Environment& env, double tol = 1e-10, int max_iter = 10000,
                                int threads = 1) {
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be > 0");
    env.spec.validate();
    QTable q(env.n_states(), env.n_actions(), 0.0);
    double residual = kInfiniteCost;
    for (int it = 1; it <= max_iter; ++it) {
        QTable next = bellman_H(q, env, threads);
        residual = next.sup_norm_diff(q);
        q = std::move(next);
        if (residual <= tol) return ViResult{std::move(q), it, residual};
    }
    std::ostringstream os;
    os << "value_iteration: residual " << residual << " after " << max_iter << " iterations";
    throw std::runtime_error(os.str());
}

/// Per state, the action of maximal value; ties go to the smallest index.
inline Policy greedy_policy(const QTable& q) {
    Policy pi;
    pi.action.resize(static_cast<std::size_t>(q.n_states()));
    std::vector<double> row(static_cast<std::size_t>(q.n_actions()));
    for (int x = 0; x < q.n_states(); ++x) {
        for (int a = 0; a < q.n_actions(); ++a) row[static_cast<std::size_t>(a)] = q(x, a);
        pi.action[static_cast<std::size_t>(x)] = argmax_smallest(row);
    }
    return pi;
}

/// V(x) = max_a q(x,a).
inline std::vector<double> value_from_q(const QTable& q) {
    std::vector<double> v(static_cast<std::size_t>(q.n_states()));
    for (int x = 0; x < q.n_states(); ++x) v[static_cast<std::size_t>(x)] = q.row_max(x);
    return v;
}

}  // namespace drmdp
