// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT
//
// Scalar reference kernels and runtime variant dispatch.

#include "babc/kernels.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace babc {

namespace {

void scalar_vexp(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

double scalar_sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double scalar_dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

void scalar_axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double scalar_sum_sq_diff(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

void scalar_exp_shift_sums(const double* x, std::size_t n, double m,
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

void scalar_and_gt(const double* a, const double* b, std::uint8_t* mask,
                   std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        mask[i] = static_cast<std::uint8_t>(mask[i] & (a[i] > b[i] ? 1u : 0u));
    }
}

std::size_t scalar_count_nonzero(const std::uint8_t* mask, std::size_t n) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += mask[i] != 0;
    return c;
}

const Kernels scalar_set = {
    "scalar",          scalar_vexp,           scalar_sum,
    scalar_dot,        scalar_axpy,           scalar_sum_sq_diff,
    scalar_exp_shift_sums, scalar_and_gt,     scalar_count_nonzero,
};

const Kernels& select() {
    const char* req = std::getenv("BELLMAN_ABC_SIMD");
    const bool is_auto = (req == nullptr) || std::strcmp(req, "auto") == 0 ||
                         std::strcmp(req, "") == 0;
    if (!is_auto && std::strcmp(req, "scalar") == 0) return scalar_set;
    if (!is_auto && std::strcmp(req, "avx2") == 0) {
        if (const Kernels* k = avx2_kernels()) return *k;
        std::fprintf(stderr,
                     "bellman-abc: BELLMAN_ABC_SIMD=avx2 unavailable on this "
                     "CPU/build, using scalar kernels\n");
        return scalar_set;
    }
    if (!is_auto && std::strcmp(req, "neon") == 0) {
        if (const Kernels* k = neon_kernels()) return *k;
        std::fprintf(stderr,
                     "bellman-abc: BELLMAN_ABC_SIMD=neon unavailable on this "
                     "build, using scalar kernels\n");
        return scalar_set;
    }
    if (!is_auto) {
        std::fprintf(stderr,
                     "bellman-abc: unknown BELLMAN_ABC_SIMD value '%s', "
                     "using auto selection\n",
                     req);
    }
    if (const Kernels* k = avx2_kernels()) return *k;
    if (const Kernels* k = neon_kernels()) return *k;
    return scalar_set;
}

} // namespace

const Kernels& kernels() {
    static const Kernels& active = select();
    return active;
}

const Kernels& scalar_kernels() { return scalar_set; }

#if defined(__x86_64__) || defined(_M_X64)
namespace detail {
const Kernels* avx2_table();
} // namespace detail

// The capability check lives in this TU, which is compiled without -mavx2,
// so no AVX instruction is reachable before the check passes.
const Kernels* avx2_kernels() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")
               ? detail::avx2_table()
               : nullptr;
}
#else
const Kernels* avx2_kernels() { return nullptr; }
#endif

#if defined(__aarch64__)
namespace detail {
const Kernels* neon_table();
} // namespace detail

// NEON is architecturally guaranteed on aarch64.
const Kernels* neon_kernels() { return detail::neon_table(); }
#else
const Kernels* neon_kernels() { return nullptr; }
#endif

} // namespace babc
