// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <cstddef>
#include <cstdint>

namespace babc {

/**
 * Data-parallel primitives behind the sampler's hot loops: particle
 * log-weight transforms, effective-sample-size reductions, leapfrog vector
 * updates, and the oracle's Monte-Carlo half-space counting.
 *
 * Every operation has a scalar reference implementation and, where the build
 * target supports it, an AVX2 (x86-64) or NEON (aarch64) variant.  The
 * active variant is chosen once per process at first use; variants agree
 * with the reference to tight relative tolerance (vectorized exponentials
 * and reordered accumulation are not bit-identical to libm/serial order).
 */
struct Kernels {
    const char* name;

    /// y[i] = exp(x[i]).  -inf maps to 0, NaN propagates.
    void (*vexp)(const double* x, double* y, std::size_t n);

    /// sum of x[0..n)
    double (*sum)(const double* x, std::size_t n);

    /// dot product of x and y
    double (*dot)(const double* x, const double* y, std::size_t n);

    /// y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);

    /// sum of (x[i] - y[i])^2
    double (*sum_sq_diff)(const double* x, const double* y, std::size_t n);

    /**
     * Exponential-weight reduction under a shift: with e_i = exp(x[i] - m),
     * stores sum(e_i) in *s1 and sum(e_i^2) in *s2.  The shift m is the
     * caller-supplied maximum, so every e_i is in [0, 1] and the reduction
     * cannot overflow.
     */
    void (*exp_shift_sums)(const double* x, std::size_t n, double m,
                           double* s1, double* s2);

    /// mask[i] &= (a[i] > b[i]); mask entries are 0 or 1.
    void (*and_gt)(const double* a, const double* b, std::uint8_t* mask,
                   std::size_t n);

    /// number of nonzero mask entries
    std::size_t (*count_nonzero)(const std::uint8_t* mask, std::size_t n);
};

/**
 * The active kernel set.  Selection order: the BELLMAN_ABC_SIMD environment
 * variable ("scalar", "avx2", "neon", or "auto"), then CPU capability.
 * Requesting an unsupported variant falls back to scalar with a warning on
 * stderr.
 */
const Kernels& kernels();

/// The scalar reference set, regardless of dispatch.
const Kernels& scalar_kernels();

/// The AVX2 set, or nullptr when the build or CPU lacks AVX2.
const Kernels* avx2_kernels();

/// The NEON set, or nullptr when the build target is not aarch64.
const Kernels* neon_kernels();

} // namespace babc
