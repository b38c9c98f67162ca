// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT
//
// NEON kernel variants for aarch64, where Advanced SIMD is always
// available.  The exponential stays scalar (libm); the arithmetic
// reductions and element-wise updates use 128-bit double lanes.

#include "babc/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>
#include <cstddef>

namespace babc {
namespace detail {

namespace {

void neon_vexp(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

double neon_sum(const double* x, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
        acc1 = vaddq_f64(acc1, vld1q_f64(x + i + 2));
    }
    double s = vaddvq_f64(acc0) + vaddvq_f64(acc1);
    for (; i < n; ++i) s += x[i];
    return s;
}

double neon_dot(const double* x, const double* y, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
    }
    double s = vaddvq_f64(acc0) + vaddvq_f64(acc1);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void neon_axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t av = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), av, vld1q_f64(x + i)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

double neon_sum_sq_diff(const double* x, const double* y, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
        acc = vfmaq_f64(acc, d, d);
    }
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

void neon_exp_shift_sums(const double* x, std::size_t n, double m,
                         double* s1, double* s2) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(x[i] - m);
        a += e;
        b += e * e;
    }
    *s1 = a;
    *s2 = b;
}

void neon_and_gt(const double* a, const double* b, std::uint8_t* mask,
                 std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const uint64x2_t gt = vcgtq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        mask[i] &= static_cast<std::uint8_t>(vgetq_lane_u64(gt, 0) & 1u);
        mask[i + 1] &= static_cast<std::uint8_t>(vgetq_lane_u64(gt, 1) & 1u);
    }
    for (; i < n; ++i) {
        mask[i] = static_cast<std::uint8_t>(mask[i] & (a[i] > b[i] ? 1u : 0u));
    }
}

std::size_t neon_count_nonzero(const std::uint8_t* mask, std::size_t n) {
    std::size_t c = 0;
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        const uint8x16_t v = vld1q_u8(mask + i);
        const uint8x16_t ones = vminq_u8(v, vdupq_n_u8(1));
        c += vaddvq_u8(ones);
    }
    for (; i < n; ++i) c += mask[i] != 0;
    return c;
}

const Kernels neon_set = {
    "neon",          neon_vexp,           neon_sum,
    neon_dot,        neon_axpy,           neon_sum_sq_diff,
    neon_exp_shift_sums, neon_and_gt,     neon_count_nonzero,
};

} // namespace

const Kernels* neon_table() { return &neon_set; }

} // namespace detail
} // namespace babc

#endif // aarch64
