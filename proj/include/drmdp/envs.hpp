#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "drmdp/cost.hpp"
#include "drmdp/mdp.hpp"
#include "drmdp/rng.hpp"

namespace drmdp {

/// A fully assembled robust control problem.
struct Environment {
    StateSpace states;
    ActionSpace actions;
    RewardTable reward;
    Kernel reference;
    ProblemSpec spec;
    CostMatrix cost;

    int n_states() const { return states.size(); }
    int n_actions() const { return actions.size(); }

    void validate() const {
        spec.validate();
        if (!reward.all_finite()) throw std::invalid_argument("Environment: non-finite reward");
        const auto violations = validate_kernel(reference);
        if (!violations.empty())
            throw std::invalid_argument("Environment: invalid reference kernel: " + violations[0]);
        if (cost.size() != states.size())
            throw std::invalid_argument("Environment: cost matrix size mismatch");
        if (spec.setting == Setting::setting2 && cost.all_finite())
            throw std::invalid_argument("Environment: setting2 requires the history-state cost");
    }
};

/// Bin(n, p) as a weight vector over {0,...,n}.
inline Distribution binomial_pmf(int n, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial_pmf: p outside [0,1]");
    std::vector<double> w(static_cast<std::size_t>(n) + 1, 0.0);
    double coeff = 1.0;  // C(n,k), exact in double for the sizes used here
    for (int k = 0; k <= n; ++k) {
        w[static_cast<std::size_t>(k)] =
            coeff * std::pow(p, k) * std::pow(1.0 - p, n - k);
        coeff = coeff * static_cast<double>(n - k) / static_cast<double>(k + 1);
    }
    return Distribution(std::move(w));
}

namespace coin {

inline StateSpace states() {
    std::vector<Point> pts;
    for (int k = 0; k <= 10; ++k) pts.push_back({static_cast<double>(k)});
    return StateSpace(std::move(pts));
}

inline ActionSpace actions() { return ActionSpace({{-1.0}, {0.0}, {1.0}}); }

/// All kernel rows identical: the next sum of heads is Bin(10, p).
inline Kernel kernel(double p) {
    Kernel k(11, 3);
    const Distribution row = binomial_pmf(10, p);
    for (int x = 0; x < 11; ++x)
        for (int a = 0; a < 3; ++a) k.set_row(x, a, row);
    return k;
}

}  // namespace coin

/**
 * Betting game on the sum of 10 coin flips: states {0,...,10}, actions
 * {-1,0,1}, reward a 1{x<x'} - a 1{x>x'} - |a| 1{x=x'}, reference row
 * Bin(10, 0.5) everywhere, ground cost |x-y|^q with q = 1.
 */
inline Environment coin_toss_env(double epsilon, double alpha = 0.45) {
    StateSpace states = coin::states();
    ActionSpace actions = coin::actions();
    RewardTable reward(11, 3);
    for (int x = 0; x < 11; ++x) {
        for (int a = 0; a < 3; ++a) {
            const double bet = actions.action(a)[0];
            for (int y = 0; y < 11; ++y) {
                double r = 0.0;
                if (x < y) r = bet;
                else if (x > y) r = -bet;
                else r = -std::abs(bet);
                reward.at(x, a, y) = r;
            }
        }
    }
    CostMatrix cost = cost_c1(states, 1);
    Environment env{std::move(states), std::move(actions), std::move(reward), coin::kernel(0.5),
                    ProblemSpec{alpha, epsilon, 1, Setting::setting1, 0}, std::move(cost)};
    env.validate();
    return env;
}

/**
 * Two slot machines with a self-excitement effect: playing the same machine
 * as last round shifts its success probability by +/- lambda_excite depending
 * on whether the last round was a win. States (return, machine), actions
 * (stake, machine), reward = realized return.
 */
inline Environment bandit_env(std::array<double, 2> p_hat = {0.4, 0.6},
                              double lambda_excite = 0.1, double epsilon = 0.5,
                              double alpha = 0.45) {
    for (double p : p_hat)
        for (double shift : {-lambda_excite, 0.0, lambda_excite})
            if (!(p + shift >= 0.0 && p + shift <= 1.0))
                throw std::invalid_argument("bandit_env: success probability leaves [0,1]");

    std::vector<Point> spts;
    for (int x1 = -5; x1 <= 5; ++x1) {
        if (x1 == 0) continue;
        for (int x2 = 1; x2 <= 2; ++x2)
            spts.push_back({static_cast<double>(x1), static_cast<double>(x2)});
    }
    StateSpace states(std::move(spts));

    std::vector<Point> apts;
    for (int a1 = 1; a1 <= 5; ++a1)
        for (int a2 = 1; a2 <= 2; ++a2)
            apts.push_back({static_cast<double>(a1), static_cast<double>(a2)});
    ActionSpace actions(std::move(apts));

    const int nx = states.size(), na = actions.size();
    RewardTable reward(nx, na);
    for (int x = 0; x < nx; ++x)
        for (int a = 0; a < na; ++a)
            for (int y = 0; y < nx; ++y) reward.at(x, a, y) = states.point(y)[0];

    Kernel kernel(nx, na);
    for (int x = 0; x < nx; ++x) {
        const double x1 = states.point(x)[0];
        const int x2 = static_cast<int>(states.point(x)[1]);
        for (int a = 0; a < na; ++a) {
            const double a1 = actions.action(a)[0];
            const int a2 = static_cast<int>(actions.action(a)[1]);
            const double sign = x1 > 0 ? 1.0 : -1.0;
            const double p = p_hat[static_cast<std::size_t>(a2 - 1)] +
                             (x2 == a2 ? lambda_excite * sign : 0.0);
            std::vector<double> w(static_cast<std::size_t>(nx), 0.0);
            const int win = states.index_of({a1, static_cast<double>(a2)});
            const int loss = states.index_of({-a1, static_cast<double>(a2)});
            w[static_cast<std::size_t>(win)] += p;
            w[static_cast<std::size_t>(loss)] += 1.0 - p;
            kernel.set_row(x, a, Distribution(std::move(w)));
        }
    }

    CostMatrix cost = cost_c1(states, 1);
    Environment env{std::move(states), std::move(actions), std::move(reward), std::move(kernel),
                    ProblemSpec{alpha, epsilon, 1, Setting::setting1, 0}, std::move(cost)};
    env.validate();
    return env;
}

/// The four movement classes a daily return is encoded into.
inline constexpr std::array<int, 4> kReturnAlphabet = {-2, -1, 1, 2};

inline int symbol_index(int symbol) {
    for (std::size_t i = 0; i < kReturnAlphabet.size(); ++i)
        if (kReturnAlphabet[i] == symbol) return static_cast<int>(i);
    throw std::invalid_argument("symbol_index: symbol not in the return alphabet");
}

/// Encoded return series plus the raw data it came from, when available.
struct ReturnSeries {
    std::vector<int> encoded;
    std::optional<std::vector<double>> raw;
    double threshold = 0.01;

    static ReturnSeries from_encoded(std::vector<int> symbols, double threshold = 0.01) {
        for (int s : symbols) symbol_index(s);
        return ReturnSeries{std::move(symbols), std::nullopt, threshold};
    }

    std::size_t size() const { return encoded.size(); }
};

/**
 * Classify raw returns: above the threshold -> 2, in [0, threshold] -> 1,
 * in [-threshold, 0) -> -1, below -threshold -> -2. A return of exactly 0
 * counts as slightly positive.
 */
inline ReturnSeries encode_returns(std::span<const double> raw, double threshold = 0.01) {
    if (!(threshold > 0.0)) throw std::invalid_argument("encode_returns: threshold must be > 0");
    std::vector<int> symbols;
    symbols.reserve(raw.size());
    for (double r : raw) {
        if (!std::isfinite(r)) throw std::invalid_argument("encode_returns: non-finite return");
        int s;
        if (r > threshold) s = 2;
        else if (r >= 0.0) s = 1;
        else if (r >= -threshold) s = -1;
        else s = -2;
        symbols.push_back(s);
    }
    ReturnSeries out;
    out.encoded = std::move(symbols);
    out.raw = std::vector<double>(raw.begin(), raw.end());
    out.threshold = threshold;
    return out;
}

/// A raw return that encodes back to the given symbol.
inline double representative_return(int symbol, double threshold = 0.01) {
    switch (symbol) {
        case 2: return 2.0 * threshold;
        case 1: return 0.5 * threshold;
        case -1: return -0.5 * threshold;
        case -2: return -2.0 * threshold;
    }
    throw std::invalid_argument("representative_return: symbol not in the return alphabet");
}

namespace stock {

/// All h-tuples over the return alphabet, first component most significant.
inline StateSpace states(int h) {
    if (h < 2) throw std::invalid_argument("stock states: h must be >= 2");
    int n = 1;
    for (int i = 0; i < h; ++i) n *= static_cast<int>(kReturnAlphabet.size());
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int idx = 0; idx < n; ++idx) {
        Point p(static_cast<std::size_t>(h));
        int rem = idx;
        for (int i = h - 1; i >= 0; --i) {
            p[static_cast<std::size_t>(i)] =
                static_cast<double>(kReturnAlphabet[static_cast<std::size_t>(rem % 4)]);
            rem /= 4;
        }
        pts.push_back(std::move(p));
    }
    return StateSpace(std::move(pts));
}

inline ActionSpace actions() {
    std::vector<Point> a;
    for (int s : kReturnAlphabet) a.push_back({static_cast<double>(s)});
    return ActionSpace(std::move(a));
}

inline int tuple_index(std::span<const int> symbols) {
    int idx = 0;
    for (int s : symbols) idx = idx * 4 + symbol_index(s);
    return idx;
}

}  // namespace stock

/**
 * Smoothed empirical history-state kernel. For each state x = (x_1,...,x_h),
 * count the windows of the series equal to (x_2,...,x_h, i) for each symbol
 * i, then convert counts to probabilities with additive smoothing kappa. The
 * next state is (x_2,...,x_h, i); the row does not depend on the action.
 */
inline Kernel empirical_kernel(const ReturnSeries& series, int h, double kappa) {
    if (h < 2) throw std::invalid_argument("empirical_kernel: h must be >= 2");
    if (!(kappa > 0.0)) throw std::invalid_argument("empirical_kernel: kappa must be > 0");
    if (series.size() < static_cast<std::size_t>(h))
        throw std::invalid_argument("empirical_kernel: series shorter than the window length");

    const int t_size = static_cast<int>(kReturnAlphabet.size());
    int n_prefix = 1;
    for (int i = 0; i + 1 < h; ++i) n_prefix *= t_size;
    const int n = n_prefix * t_size;

    // window_counts[prefix][i] = number of series windows equal to (prefix, i)
    std::vector<std::array<double, 4>> window_counts(static_cast<std::size_t>(n_prefix),
                                                     {0.0, 0.0, 0.0, 0.0});
    for (std::size_t j = 0; j + static_cast<std::size_t>(h) <= series.size(); ++j) {
        int prefix = 0;
        for (int i = 0; i + 1 < h; ++i)
            prefix = prefix * 4 + symbol_index(series.encoded[j + static_cast<std::size_t>(i)]);
        const int last = symbol_index(series.encoded[j + static_cast<std::size_t>(h) - 1]);
        window_counts[static_cast<std::size_t>(prefix)][static_cast<std::size_t>(last)] += 1.0;
    }

    Kernel kernel(n, t_size);
    for (int x = 0; x < n; ++x) {
        // The carried-over prefix of the next state is (x_2,...,x_h).
        const int next_prefix = x % n_prefix;
        const auto& counts = window_counts[static_cast<std::size_t>(next_prefix)];
        double total = kappa;
        for (double c : counts) total += c;
        std::vector<double> w(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < t_size; ++i) {
            const double p = (counts[static_cast<std::size_t>(i)] + kappa / t_size) / total;
            w[static_cast<std::size_t>(next_prefix * t_size + i)] = p;
        }
        Distribution row(std::move(w));
        for (int a = 0; a < t_size; ++a) kernel.set_row(x, a, row);
    }
    return kernel;
}

/**
 * Movement-prediction problem on history states T^h: predict the next
 * symbol, earn 1 when right. Ambiguity only touches the newest symbol, which
 * the history-state cost enforces through infinite off-prefix entries.
 */
inline Environment stock_env(const ReturnSeries& series, int h, double kappa, double epsilon,
                             double alpha = 0.45) {
    StateSpace states = stock::states(h);
    ActionSpace actions = stock::actions();
    const int n = states.size(), na = actions.size();

    RewardTable reward(n, na);
    for (int x = 0; x < n; ++x)
        for (int a = 0; a < na; ++a) {
            const double predicted = actions.action(a)[0];
            for (int y = 0; y < n; ++y)
                reward.at(x, a, y) =
                    states.point(y)[static_cast<std::size_t>(h - 1)] == predicted ? 1.0 : 0.0;
        }

    Kernel kernel = empirical_kernel(series, h, kappa);
    CostMatrix cost = cost_c2(states, h, 1);
    Environment env{std::move(states), std::move(actions), std::move(reward), std::move(kernel),
                    ProblemSpec{alpha, epsilon, 1, Setting::setting2, h}, std::move(cost)};
    env.validate();
    return env;
}

struct RolloutStep {
    long t;
    int x;
    int a;
    int x_next;
    double reward;
};

/**
 * Play a fixed policy for `steps` rounds under a (possibly misspecified)
 * kernel and accumulate the realized rewards. Deterministic per seed.
 */
inline double rollout(const Policy& policy, const Kernel& true_kernel, const RewardTable& reward,
                      long steps, std::uint64_t seed, int x0 = 0,
                      std::vector<RolloutStep>* log = nullptr) {
    policy.validate(true_kernel.n_states(), true_kernel.n_actions());
    if (x0 < 0 || x0 >= true_kernel.n_states())
        throw std::out_of_range("rollout: x0 out of range");
    Rng rng(seed);
    double total = 0.0;
    int x = x0;
    for (long t = 0; t < steps; ++t) {
        const int a = policy.action[static_cast<std::size_t>(x)];
        const int y = sample_next(true_kernel, x, a, rng);
        const double r = reward(x, a, y);
        total += r;
        if (log) log->push_back({t, x, a, y, r});
        x = y;
    }
    return total;
}

/**
 * Exact moments of the per-round reward when every kernel row is the same
 * distribution, so states are i.i.d. from round 1 on. Consecutive rewards
 * share the middle state and are 1-dependent; the lag-1 covariance feeds the
 * variance of the cumulative reward.
 */
struct RoundMoments {
    double mean = 0.0;
    double variance = 0.0;
    double lag1_cov = 0.0;

    double total_mean(long rounds) const { return static_cast<double>(rounds) * mean; }

    double total_std(long rounds) const {
        const double var = static_cast<double>(rounds) * variance +
                           2.0 * static_cast<double>(rounds - 1) * lag1_cov;
        return std::sqrt(std::max(0.0, var));
    }
};

inline RoundMoments iid_round_moments(const Policy& policy, const Kernel& kernel,
                                      const RewardTable& reward) {
    const int n = kernel.n_states();
    policy.validate(n, kernel.n_actions());
    const Distribution& rho = kernel.row(0, 0);
    for (int x = 0; x < n; ++x)
        for (int a = 0; a < kernel.n_actions(); ++a)
            for (int y = 0; y < n; ++y)
                if (kernel.row(x, a).weight(y) != rho.weight(y))
                    throw std::invalid_argument(
                        "iid_round_moments: kernel rows are not identical");

    double mean = 0.0, second = 0.0;
    for (int x = 0; x < n; ++x) {
        if (rho.weight(x) <= 0.0) continue;
        for (int y = 0; y < n; ++y) {
            if (rho.weight(y) <= 0.0) continue;
            const double r = reward(x, policy.action[static_cast<std::size_t>(x)], y);
            mean += rho.weight(x) * rho.weight(y) * r;
            second += rho.weight(x) * rho.weight(y) * r * r;
        }
    }
    double cross = 0.0;
    for (int x = 0; x < n; ++x) {
        if (rho.weight(x) <= 0.0) continue;
        for (int y = 0; y < n; ++y) {
            if (rho.weight(y) <= 0.0) continue;
            const double rxy = reward(x, policy.action[static_cast<std::size_t>(x)], y);
            if (rxy == 0.0) continue;
            for (int z = 0; z < n; ++z) {
                if (rho.weight(z) <= 0.0) continue;
                cross += rho.weight(x) * rho.weight(y) * rho.weight(z) * rxy *
                         reward(y, policy.action[static_cast<std::size_t>(y)], z);
            }
        }
    }
    RoundMoments m;
    m.mean = mean;
    m.variance = second - mean * mean;
    m.lag1_cov = cross - mean * mean;
    return m;
}

}  // namespace drmdp
