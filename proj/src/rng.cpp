// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#include "babc/rng.hpp"

#include <cmath>

namespace babc {

namespace {

/// splitmix64 finalizer; a strong 64-bit mixer.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over the tag bytes.
std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

} // namespace

double Rng::normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n <= 1) return 0;
    // Largest multiple of n that fits in 64 bits; reject words above it.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

int Rng::categorical(const double* w, int n, double w_sum) {
    const double u = uniform() * w_sum;
    double acc = 0.0;
    int last_positive = 0;
    for (int i = 0; i < n; ++i) {
        if (w[i] > 0.0) last_positive = i;
        acc += w[i];
        if (u < acc) return i;
    }
    return last_positive;
}

std::uint64_t stream_id(std::uint64_t master_seed, std::string_view tag,
                        std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = mix64(master_seed);
    h = mix64(h ^ hash_tag(tag));
    h = mix64(h ^ a);
    h = mix64(h ^ b);
    return h;
}

} // namespace babc
