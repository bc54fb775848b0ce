// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

#include "rdlab/dense.hpp"

namespace rdlab {

namespace detail {

/// SplitMix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Counter-based splittable generator. Output i of stream (key) is
/// mix64(key + i * golden); forks derive an unrelated key from a label,
/// so independent streams never share state. Everything is a pure
/// function of (seed, fork labels, counter).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : key_(detail::mix64(seed)), counter_(0) {}

    /// Independent child stream addressed by label.
    CounterRng fork(std::uint64_t label) const {
        CounterRng child(0);
        child.key_ = detail::mix64(key_ ^ detail::mix64(label + 0x632be59bd9b4e019ULL));
        child.counter_ = 0;
        return child;
    }

    std::uint64_t next_u64() {
        const std::uint64_t z = key_ + (counter_++) * 0x9e3779b97f4a7c15ULL;
        return detail::mix64(z);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; consumes exactly two uniforms,
    /// keeping the stream position independent of call pairing.
    double next_gaussian() {
        double u1 = next_uniform();
        const double u2 = next_uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

/// Deterministic sub-seed for a (label, index) slot of a base seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label,
                                 std::uint64_t index = 0) {
    return detail::mix64(detail::mix64(seed ^ detail::mix64(label)) ^
                         detail::mix64(index + 0x2545f4914f6cdd1dULL));
}

inline DenseMatrix random_gaussian(CounterRng& rng, std::size_t rows, std::size_t cols,
                                   double scale = 1.0) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.next_gaussian();
    return m;
}

}  // namespace rdlab
