#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace drmdp {

/**
 * Deterministic 64-bit generator for reproducible experiments.
 *
 * std::mt19937_64 is fully specified by the standard, so a given seed yields
 * the same raw stream on every platform. The distribution helpers below avoid
 * std::uniform_*_distribution, whose mapping from raw bits to values is
 * implementation-defined.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0,1), built from the top 53 bits of one raw draw.
    double next_double() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Uniform index in {0,...,n-1}. Consumes exactly one raw draw.
    int next_index(int n) {
        if (n <= 0) throw std::invalid_argument("Rng::next_index: n must be positive");
        const int k = static_cast<int>(next_double() * static_cast<double>(n));
        return k < n ? k : n - 1;
    }

private:
    std::mt19937_64 gen_;
};

/**
 * Inverse-CDF draw over a weight vector. Cumulative sums are accumulated
 * left-to-right so the mapping from the uniform draw to an index is
 * bit-reproducible. Consumes exactly one raw draw.
 */
inline int sample_weights(std::span<const double> weights, Rng& rng) {
    const double u = rng.next_double();
    double cum = 0.0;
    int last_positive = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double w = weights[i];
        if (w <= 0.0) continue;
        cum += w;
        last_positive = static_cast<int>(i);
        if (u < cum) return last_positive;
    }
    if (last_positive < 0)
        throw std::invalid_argument("sample_weights: weight vector has no positive entry");
    return last_positive;  // u fell into the rounding dust past the last weight
}

}  // namespace drmdp
