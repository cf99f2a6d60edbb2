#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "drmdp/rng.hpp"

namespace drmdp {

/// A state or action is a point in R^d; everything else addresses it by index.
using Point = std::vector<double>;

inline double euclidean_distance(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/**
 * Finite ordered state space. Points are kept only to build cost matrices and
 * rewards; all computation addresses states through their index.
 */
class StateSpace {
public:
    explicit StateSpace(std::vector<Point> points) : points_(std::move(points)) {
        if (points_.empty()) throw std::invalid_argument("StateSpace: empty point set");
        const std::size_t d = points_[0].size();
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (points_[i].size() != d)
                throw std::invalid_argument("StateSpace: points of mixed dimension");
            if (!index_.emplace(points_[i], static_cast<int>(i)).second)
                throw std::invalid_argument("StateSpace: duplicate point");
        }
    }

    int size() const { return static_cast<int>(points_.size()); }
    int dim() const { return static_cast<int>(points_[0].size()); }
    const Point& point(int i) const { return points_.at(static_cast<std::size_t>(i)); }
    const std::vector<Point>& points() const { return points_; }

    /// Exact-match lookup; -1 when the point is not in the space.
    int index_of(const Point& p) const {
        auto it = index_.find(p);
        return it == index_.end() ? -1 : it->second;
    }

private:
    std::vector<Point> points_;
    std::map<Point, int> index_;
};

class ActionSpace {
public:
    explicit ActionSpace(std::vector<Point> actions) : actions_(std::move(actions)) {
        if (actions_.empty()) throw std::invalid_argument("ActionSpace: empty action set");
        const std::size_t m = actions_[0].size();
        for (std::size_t i = 0; i < actions_.size(); ++i) {
            if (actions_[i].size() != m)
                throw std::invalid_argument("ActionSpace: actions of mixed dimension");
            if (!index_.emplace(actions_[i], static_cast<int>(i)).second)
                throw std::invalid_argument("ActionSpace: duplicate action");
        }
    }

    int size() const { return static_cast<int>(actions_.size()); }
    int dim() const { return static_cast<int>(actions_[0].size()); }
    const Point& action(int i) const { return actions_.at(static_cast<std::size_t>(i)); }
    const std::vector<Point>& actions() const { return actions_; }

    int index_of(const Point& a) const {
        auto it = index_.find(a);
        return it == index_.end() ? -1 : it->second;
    }

private:
    std::vector<Point> actions_;
    std::map<Point, int> index_;
};

inline constexpr double kDistributionTolerance = 1e-12;

/**
 * Probability vector over an indexed finite support.
 *
 * The checked constructor enforces nonnegative weights summing to 1 within
 * 1e-12. unchecked() exists so that invalid rows can be represented and then
 * reported by validate_kernel, which must diagnose rather than throw.
 */
class Distribution {
public:
    Distribution() = default;

    explicit Distribution(std::vector<double> weights) : weights_(std::move(weights)) {
        std::string err;
        if (!check(weights_, &err)) throw std::invalid_argument("Distribution: " + err);
    }

    static Distribution unchecked(std::vector<double> weights) {
        Distribution d;
        d.weights_ = std::move(weights);
        return d;
    }

    static Distribution point_mass(int i, int support_size) {
        std::vector<double> w(static_cast<std::size_t>(support_size), 0.0);
        w.at(static_cast<std::size_t>(i)) = 1.0;
        return Distribution(std::move(w));
    }

    static bool check(std::span<const double> w, std::string* why = nullptr) {
        if (w.empty()) {
            if (why) *why = "empty weight vector";
            return false;
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!(w[i] >= 0.0)) {  // also catches NaN
                if (why) {
                    std::ostringstream os;
                    os << "negative weight " << w[i] << " at index " << i;
                    *why = os.str();
                }
                return false;
            }
            sum += w[i];
        }
        if (std::abs(sum - 1.0) > kDistributionTolerance) {
            if (why) {
                std::ostringstream os;
                os.precision(17);
                os << "row sum " << sum;
                *why = os.str();
            }
            return false;
        }
        return true;
    }

    int size() const { return static_cast<int>(weights_.size()); }
    double weight(int i) const { return weights_[static_cast<std::size_t>(i)]; }
    std::span<const double> weights() const { return weights_; }

    double expectation(std::span<const double> f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i)
            if (weights_[i] > 0.0) s += weights_[i] * f[i];
        return s;
    }

private:
    std::vector<double> weights_;
};

/// Transition kernel: one next-state distribution per (state, action) pair.
class Kernel {
public:
    Kernel(int n_states, int n_actions)
        : nx_(n_states), na_(n_actions),
          rows_(static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions)) {
        if (n_states <= 0 || n_actions <= 0)
            throw std::invalid_argument("Kernel: state and action counts must be positive");
    }

    int n_states() const { return nx_; }
    int n_actions() const { return na_; }

    void set_row(int x, int a, Distribution d) {
        if (d.size() != nx_) throw std::invalid_argument("Kernel::set_row: row length mismatch");
        rows_[flat(x, a)] = std::move(d);
    }

    const Distribution& row(int x, int a) const { return rows_[flat(x, a)]; }

private:
    std::size_t flat(int x, int a) const {
        if (x < 0 || x >= nx_ || a < 0 || a >= na_)
            throw std::out_of_range("Kernel: state or action index out of range");
        return static_cast<std::size_t>(x) * static_cast<std::size_t>(na_) + static_cast<std::size_t>(a);
    }

    int nx_ = 0, na_ = 0;
    std::vector<Distribution> rows_;
};

/// Dense reward tensor r(x, a, x').
class RewardTable {
public:
    RewardTable(int n_states, int n_actions)
        : nx_(n_states), na_(n_actions),
          values_(static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions) *
                      static_cast<std::size_t>(n_states),
                  0.0) {}

    double operator()(int x, int a, int y) const { return values_[flat(x, a, y)]; }
    double& at(int x, int a, int y) { return values_[flat(x, a, y)]; }

    int n_states() const { return nx_; }
    int n_actions() const { return na_; }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::size_t flat(int x, int a, int y) const {
        return (static_cast<std::size_t>(x) * static_cast<std::size_t>(na_) +
                static_cast<std::size_t>(a)) *
                   static_cast<std::size_t>(nx_) +
               static_cast<std::size_t>(y);
    }

    int nx_ = 0, na_ = 0;
    std::vector<double> values_;
};

/// Stationary deterministic policy: one action index per state index.
struct Policy {
    std::vector<int> action;

    void validate(int n_states, int n_actions) const {
        if (static_cast<int>(action.size()) != n_states)
            throw std::invalid_argument("Policy: wrong number of states");
        for (int a : action)
            if (a < 0 || a >= n_actions)
                throw std::invalid_argument("Policy: action index out of range");
    }
};

enum class Setting { none, setting1, setting2 };

inline std::string setting_to_string(Setting s, int h) {
    switch (s) {
        case Setting::none: return "none";
        case Setting::setting1: return "setting1";
        case Setting::setting2: {
            std::ostringstream os;
            os << "setting2(" << h << ")";
            return os.str();
        }
    }
    return "none";
}

inline std::pair<Setting, int> setting_from_string(const std::string& s) {
    if (s == "none") return {Setting::none, 0};
    if (s == "setting1") return {Setting::setting1, 0};
    if (s.rfind("setting2(", 0) == 0 && s.back() == ')') {
        const int h = std::stoi(s.substr(9, s.size() - 10));
        return {Setting::setting2, h};
    }
    throw std::invalid_argument("unknown setting string: " + s);
}

/// Discount, ambiguity radius, transport order and ambiguity-set selector.
struct ProblemSpec {
    double alpha = 0.45;
    double epsilon = 0.0;
    int q = 1;
    Setting setting = Setting::setting1;
    int h = 0;  // history length, meaningful for setting2 only

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("ProblemSpec: alpha must lie in (0,1)");
        if (!(epsilon >= 0.0)) throw std::invalid_argument("ProblemSpec: epsilon must be >= 0");
        if (q < 1) throw std::invalid_argument("ProblemSpec: q must be a positive integer");
        if (setting == Setting::setting2 && h < 2)
            throw std::invalid_argument("ProblemSpec: setting2 requires history length h >= 2");
    }

    double epsilon_pow() const { return std::pow(epsilon, q); }
};

/// Diagnostic kernel check. Returns human-readable violations, never throws.
inline std::vector<std::string> validate_kernel(const Kernel& kernel) {
    std::vector<std::string> violations;
    for (int x = 0; x < kernel.n_states(); ++x) {
        for (int a = 0; a < kernel.n_actions(); ++a) {
            const Distribution& row = kernel.row(x, a);
            std::string why;
            if (row.size() == 0) {
                why = "row not set";
            } else if (row.size() != kernel.n_states()) {
                why = "row length mismatch";
            } else if (Distribution::check(row.weights(), &why)) {
                continue;
            }
            std::ostringstream os;
            os << "kernel row (x=" << x << ",a=" << a << "): " << why;
            violations.push_back(os.str());
        }
    }
    return violations;
}

/// One step of the chain under the kernel; pure in (kernel, x, a, rng state).
inline int sample_next(const Kernel& kernel, int x, int a, Rng& rng) {
    const Distribution& row = kernel.row(x, a);  // throws out_of_range on bad indices
    return sample_weights(row.weights(), rng);
}

/**
 * Exact discounted policy evaluation under a fixed kernel: the unique V with
 * V(x) = sum_y P(x,pi(x))(y) [r(x,pi(x),y) + alpha V(y)], found by fixed-point
 * iteration until the residual drops to `tol`.
 */
inline std::vector<double> evaluate_policy_exact(const Kernel& kernel, const RewardTable& reward,
                                                 const Policy& policy, double alpha,
                                                 double tol = 1e-12, long max_iter = 200000) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("evaluate_policy_exact: alpha must lie in (0,1)");
    const int n = kernel.n_states();
    policy.validate(n, kernel.n_actions());

    std::vector<double> mean_reward(static_cast<std::size_t>(n), 0.0);
    for (int x = 0; x < n; ++x) {
        const Distribution& row = kernel.row(x, policy.action[x]);
        double s = 0.0;
        for (int y = 0; y < n; ++y)
            if (row.weight(y) > 0.0) s += row.weight(y) * reward(x, policy.action[x], y);
        mean_reward[static_cast<std::size_t>(x)] = s;
    }

    std::vector<double> v(static_cast<std::size_t>(n), 0.0), next(static_cast<std::size_t>(n));
    for (long it = 0; it < max_iter; ++it) {
        double residual = 0.0;
        for (int x = 0; x < n; ++x) {
            const Distribution& row = kernel.row(x, policy.action[x]);
            double s = mean_reward[static_cast<std::size_t>(x)];
            s += alpha * row.expectation(v);
            next[static_cast<std::size_t>(x)] = s;
            residual = std::max(residual, std::abs(s - v[static_cast<std::size_t>(x)]));
        }
        v.swap(next);
        if (residual <= tol) return v;
    }
    throw std::runtime_error("evaluate_policy_exact: no convergence within iteration cap");
}

/**
 * Exact long-run average reward of a fixed policy under a fixed kernel,
 * computed by propagating the state distribution from x0 and taking the
 * Cesaro mean of the one-step expected rewards. Deterministic; used to rank
 * policies under misspecified kernels without Monte Carlo noise.
 */
inline double average_reward_exact(const Kernel& kernel, const RewardTable& reward,
                                   const Policy& policy, int x0, long horizon = 1 << 20) {
    const int n = kernel.n_states();
    policy.validate(n, kernel.n_actions());
    if (x0 < 0 || x0 >= n) throw std::out_of_range("average_reward_exact: x0 out of range");

    std::vector<double> mean_reward(static_cast<std::size_t>(n), 0.0);
    for (int x = 0; x < n; ++x) {
        const Distribution& row = kernel.row(x, policy.action[x]);
        double s = 0.0;
        for (int y = 0; y < n; ++y)
            if (row.weight(y) > 0.0) s += row.weight(y) * reward(x, policy.action[x], y);
        mean_reward[static_cast<std::size_t>(x)] = s;
    }

    std::vector<double> mu(static_cast<std::size_t>(n), 0.0), next(static_cast<std::size_t>(n));
    mu[static_cast<std::size_t>(x0)] = 1.0;
    double total = 0.0;
    for (long t = 0; t < horizon; ++t) {
        double step = 0.0;
        std::fill(next.begin(), next.end(), 0.0);
        for (int x = 0; x < n; ++x) {
            const double m = mu[static_cast<std::size_t>(x)];
            if (m <= 0.0) continue;
            step += m * mean_reward[static_cast<std::size_t>(x)];
            const Distribution& row = kernel.row(x, policy.action[x]);
            for (int y = 0; y < n; ++y)
                if (row.weight(y) > 0.0) next[static_cast<std::size_t>(y)] += m * row.weight(y);
        }
        total += step;
        mu.swap(next);
    }
    return total / static_cast<double>(horizon);
}

}  // namespace drmdp
