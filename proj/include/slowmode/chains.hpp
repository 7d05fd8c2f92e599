#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>

#include "slowmode/rng.hpp"

namespace slowmode {

// Two independent two-state (+-1) chains with per-step flip probabilities
// chosen so each hits a target autocorrelation at the given lag, emitted as
// exactly mean-free two-component features (sigma_i * state_i).
struct BinaryChainSpec {
    double sigma1 = 1.0, sigma2 = 4.0;
    double a1 = 0.9, a2 = 0.5;  // target autocorrelations at `lag`
    std::size_t lag = 5;

    void validate() const {
        if (!(sigma1 > 0) || !(sigma2 > 0))
            throw std::invalid_argument("emission scales must be positive");
        if (!(a1 > 0 && a1 <= 1) || !(a2 > 0 && a2 <= 1))
            throw std::invalid_argument("target autocorrelations must be in (0,1]");
        if (lag < 1) throw std::invalid_argument("lag must be >= 1");
    }
};

// A +-1 chain flipping with probability p has one-step autocorrelation
// (1-2p), so (1-2p)^lag = a pins p.
inline double flip_probability(double a, std::size_t lag) {
    if (!(a > 0 && a <= 1)) throw std::invalid_argument("autocorrelation must be in (0,1]");
    if (lag < 1) throw std::invalid_argument("lag must be >= 1");
    return 0.5 * (1.0 - std::pow(a, 1.0 / static_cast<double>(lag)));
}

// out: n x 2 row-major features
inline void sample_binary_chains(const BinaryChainSpec& spec, std::size_t n,
                                 std::uint64_t seed, double* out) {
    spec.validate();
    if (n == 0) return;
    const double p1 = flip_probability(spec.a1, spec.lag);
    const double p2 = flip_probability(spec.a2, spec.lag);
    Rng rng(seed);
    double s1 = rng.next_double() < 0.5 ? -1.0 : 1.0;
    double s2 = rng.next_double() < 0.5 ? -1.0 : 1.0;
    for (std::size_t t = 0; t < n; ++t) {
        out[2 * t] = spec.sigma1 * s1;
        out[2 * t + 1] = spec.sigma2 * s2;
        if (rng.next_double() < p1) s1 = -s1;
        if (rng.next_double() < p2) s2 = -s2;
    }
}

}  // namespace slowmode
