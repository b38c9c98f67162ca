// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <cstddef>
#include <functional>

namespace babc {

/// Worker-thread cap: min(BELLMAN_ABC_THREADS, hardware concurrency), at
/// least 1.  The environment variable is read once per process.
int max_threads();

/**
 * Run fn(i) for i in [0, n) on a shared persistent thread pool.
 *
 * Iterations are partitioned into contiguous blocks.  fn must confine its
 * writes to iteration-owned slots; under that contract results are
 * bit-identical for every thread count.  Falls back to a serial loop when
 * only one worker is available or n is small.  Nested calls run serially.
 */
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace babc
