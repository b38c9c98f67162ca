// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#include "babc/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace babc {

namespace {

int read_thread_cap() {
    int cap = static_cast<int>(std::thread::hardware_concurrency());
    if (cap < 1) cap = 1;
    if (const char* env = std::getenv("BELLMAN_ABC_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) cap = static_cast<int>(v);
    }
    return cap;
}

/// Minimal persistent pool: one job at a time, blocks the caller until done.
class Pool {
public:
    explicit Pool(int workers) {
        for (int i = 0; i < workers; ++i) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    Pool(const Pool&) = delete;
    Pool& operator=(const Pool&) = delete;

    ~Pool() {
        {
            std::unique_lock<std::mutex> lock(mu_);
            shutdown_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void run(std::size_t n, const std::function<void(std::size_t)>& fn) {
        {
            std::unique_lock<std::mutex> lock(mu_);
            job_fn_ = &fn;
            job_size_ = n;
            next_index_.store(0, std::memory_order_relaxed);
            pending_ = static_cast<int>(threads_.size());
            ++job_generation_;
        }
        cv_.notify_all();
        help(); // the caller participates
        std::unique_lock<std::mutex> lock(mu_);
        done_cv_.wait(lock, [this] { return pending_ == 0; });
        job_fn_ = nullptr;
        if (error_) {
            auto e = error_;
            error_ = nullptr;
            std::rethrow_exception(e);
        }
    }

private:
    void help() {
        const std::function<void(std::size_t)>* fn;
        std::size_t n;
        {
            std::unique_lock<std::mutex> lock(mu_);
            fn = job_fn_;
            n = job_size_;
        }
        work(*fn, n);
    }

    void work(const std::function<void(std::size_t)>& fn, std::size_t n) {
        constexpr std::size_t kChunk = 8;
        for (;;) {
            const std::size_t begin =
                next_index_.fetch_add(kChunk, std::memory_order_relaxed);
            if (begin >= n) break;
            const std::size_t end = std::min(begin + kChunk, n);
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::unique_lock<std::mutex> lock(mu_);
                if (!error_) error_ = std::current_exception();
                // keep draining indices so other workers finish promptly
            }
        }
    }

    void worker_loop() {
        std::uint64_t seen_generation = 0;
        for (;;) {
            const std::function<void(std::size_t)>* fn;
            std::size_t n;
            {
                std::unique_lock<std::mutex> lock(mu_);
                cv_.wait(lock, [&] {
                    return shutdown_ || job_generation_ != seen_generation;
                });
                if (shutdown_) return;
                seen_generation = job_generation_;
                fn = job_fn_;
                n = job_size_;
            }
            work(*fn, n);
            std::unique_lock<std::mutex> lock(mu_);
            if (--pending_ == 0) done_cv_.notify_all();
        }
    }

    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::vector<std::thread> threads_;
    const std::function<void(std::size_t)>* job_fn_ = nullptr;
    std::size_t job_size_ = 0;
    std::atomic<std::size_t> next_index_{0};
    std::uint64_t job_generation_ = 0;
    int pending_ = 0;
    bool shutdown_ = false;
    std::exception_ptr error_ = nullptr;
};

thread_local bool in_parallel_region = false;

} // namespace

int max_threads() {
    static const int cap = read_thread_cap();
    return cap;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int workers = max_threads();
    if (workers <= 1 || n < 2 || in_parallel_region) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    // Workers beyond the caller; the caller helps, so pool size is cap - 1.
    static Pool pool(max_threads() - 1);
    in_parallel_region = true;
    std::function<void(std::size_t)> guarded = [&fn](std::size_t i) {
        in_parallel_region = true;
        fn(i);
    };
    try {
        pool.run(n, guarded);
    } catch (...) {
        in_parallel_region = false;
        throw;
    }
    in_parallel_region = false;
}

} // namespace babc
