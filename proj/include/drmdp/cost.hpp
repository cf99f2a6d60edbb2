#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "drmdp/mdp.hpp"

namespace drmdp {

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

/// Supports beyond this size are out of scope for the dense LP oracle path.
inline constexpr int kLpSupportCap = 256;

/**
 * lambda * c with the transport-duality convention 0 * inf := 0, so that the
 * lambda = 0 endpoint of the dual reduces to the unconstrained extremum.
 */
inline double lambda_cost(double lambda, double c) {
    if (c == kInfiniteCost) return lambda > 0.0 ? kInfiniteCost : 0.0;
    return lambda * c;
}

/**
 * Pairwise transport cost over a state space. Entries live in [0, inf]; the
 * infinite value is IEEE infinity, never a large finite surrogate. Every row
 * keeps a zero on the diagonal, the hypothesis the dual maximizer relies on.
 *
 * finite_targets(x) lists the y with c(x,y) < inf; for costs without infinite
 * entries the list is the whole index range (shared, built once).
 */
class CostMatrix {
public:
    CostMatrix(int n, std::vector<double> entries) : n_(n), entries_(std::move(entries)) {
        if (n <= 0 || entries_.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
            throw std::invalid_argument("CostMatrix: bad dimensions");
        bool any_infinite = false;
        for (int x = 0; x < n_; ++x) {
            double row_min = kInfiniteCost;
            for (int y = 0; y < n_; ++y) {
                const double c = entries_[flat(x, y)];
                if (std::isnan(c) || c < 0.0)
                    throw std::invalid_argument("CostMatrix: entries must lie in [0, inf]");
                if (c == kInfiniteCost) any_infinite = true;
                row_min = std::min(row_min, c);
            }
            if (entries_[flat(x, x)] != 0.0)
                throw std::invalid_argument("CostMatrix: diagonal must be exactly 0");
            if (row_min != 0.0)
                throw std::invalid_argument("CostMatrix: every row needs a zero entry");
        }
        all_finite_ = !any_infinite;
        if (all_finite_) {
            full_range_.resize(static_cast<std::size_t>(n_));
            std::iota(full_range_.begin(), full_range_.end(), 0);
        } else {
            finite_.resize(static_cast<std::size_t>(n_));
            for (int x = 0; x < n_; ++x)
                for (int y = 0; y < n_; ++y)
                    if (entries_[flat(x, y)] < kInfiniteCost)
                        finite_[static_cast<std::size_t>(x)].push_back(y);
        }
        min_positive_finite_ = kInfiniteCost;
        for (double c : entries_)
            if (c > 0.0 && c < kInfiniteCost) min_positive_finite_ = std::min(min_positive_finite_, c);
    }

    int size() const { return n_; }
    double operator()(int x, int y) const { return entries_[flat(x, y)]; }
    bool is_finite(int x, int y) const { return entries_[flat(x, y)] < kInfiniteCost; }
    bool all_finite() const { return all_finite_; }

    std::span<const int> finite_targets(int x) const {
        if (all_finite_) return full_range_;
        return finite_[static_cast<std::size_t>(x)];
    }

    /// Smallest strictly positive finite entry; inf when the matrix is all zero.
    double min_positive_finite() const { return min_positive_finite_; }

    double max_finite() const {
        double m = 0.0;
        for (double c : entries_)
            if (c < kInfiniteCost) m = std::max(m, c);
        return m;
    }

private:
    std::size_t flat(int x, int y) const {
        return static_cast<std::size_t>(x) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(y);
    }

    int n_ = 0;
    bool all_finite_ = true;
    std::vector<double> entries_;
    std::vector<std::vector<int>> finite_;
    std::vector<int> full_range_;
    double min_positive_finite_ = kInfiniteCost;
};

/// c1(x,y) = ||x - y||^q on the embedded points.
inline CostMatrix cost_c1(const StateSpace& states, int q) {
    if (q < 1) throw std::invalid_argument("cost_c1: q must be a positive integer");
    const int n = states.size();
    std::vector<double> entries(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    for (int x = 0; x < n; ++x) {
        for (int y = x; y < n; ++y) {
            const double d = euclidean_distance(states.point(x), states.point(y));
            const double c = q == 1 ? d : std::pow(d, q);
            entries[static_cast<std::size_t>(x) * n + y] = c;
            entries[static_cast<std::size_t>(y) * n + x] = c;
        }
    }
    return CostMatrix(n, std::move(entries));
}

/**
 * History-state cost: infinite whenever the first h-1 components differ,
 * otherwise |x_h - y_h|^q. States must form the full tuple space T^h for a
 * scalar alphabet T.
 */
inline CostMatrix cost_c2(const StateSpace& states, int h, int q) {
    if (q < 1) throw std::invalid_argument("cost_c2: q must be a positive integer");
    if (h < 2) throw std::invalid_argument("cost_c2: history length h must be >= 2");
    const int n = states.size();
    if (states.dim() != h)
        throw std::invalid_argument("cost_c2: states are not h-tuples");
    std::set<double> alphabet;
    for (const Point& p : states.points())
        for (double v : p) alphabet.insert(v);
    double expected = 1.0;
    for (int i = 0; i < h; ++i) expected *= static_cast<double>(alphabet.size());
    if (static_cast<double>(n) != expected)
        throw std::invalid_argument("cost_c2: states do not enumerate the full tuple space T^h");

    std::vector<double> entries(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    for (int x = 0; x < n; ++x) {
        const Point& px = states.point(x);
        for (int y = 0; y < n; ++y) {
            const Point& py = states.point(y);
            bool same_prefix = true;
            for (int i = 0; i + 1 < h; ++i)
                if (px[static_cast<std::size_t>(i)] != py[static_cast<std::size_t>(i)]) {
                    same_prefix = false;
                    break;
                }
            double c;
            if (!same_prefix) {
                c = kInfiniteCost;
            } else {
                const double d = std::abs(px[static_cast<std::size_t>(h - 1)] -
                                          py[static_cast<std::size_t>(h - 1)]);
                c = q == 1 ? d : std::pow(d, q);
            }
            entries[static_cast<std::size_t>(x) * n + y] = c;
        }
    }
    return CostMatrix(n, std::move(entries));
}

}  // namespace drmdp
