// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace babc {

/**
 * Deterministic random stream.
 *
 * The engine (std::mt19937_64) is fully specified by the C++ standard, and
 * all distribution transforms are implemented explicitly here, so a stream
 * produces the same draws on every platform and standard library.  Streams
 * are cheap; derive one per logical task with substream() so that parallel
 * and serial schedules consume identical randomness.
 */
class Rng {
public:
    explicit Rng(std::uint64_t stream_seed) : engine_(stream_seed) {}

    /// Next raw 64-bit word.
    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1]; safe as a log() argument.
    double uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal draw (Box-Muller, cosine branch; two words per draw).
    double normal();

    /// Uniform integer in [0, n), n >= 1.  Rejection sampling, no modulo bias.
    std::uint64_t uniform_int(std::uint64_t n);

    /// Index draw from nonnegative weights w[0..n) with precomputed sum.
    /// The last strictly positive weight absorbs any floating-point slack.
    int categorical(const double* w, int n, double w_sum);

private:
    std::mt19937_64 engine_;
};

/**
 * Collision-resistant stream id for (master seed, purpose tag, indices).
 *
 * Tags name the consumer ("mutate", "resample", ...); the two indices carry
 * loop coordinates such as (sampler step, particle).  Streams for distinct
 * inputs are statistically independent for Monte Carlo purposes.
 */
std::uint64_t stream_id(std::uint64_t master_seed, std::string_view tag,
                        std::uint64_t a = 0, std::uint64_t b = 0);

/// Convenience: an Rng seeded with stream_id(...).
inline Rng substream(std::uint64_t master_seed, std::string_view tag,
                     std::uint64_t a = 0, std::uint64_t b = 0) {
    return Rng(stream_id(master_seed, tag, a, b));
}

} // namespace babc
