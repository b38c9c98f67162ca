// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "babc/mdp.hpp"
#include "babc/model.hpp"
#include "babc/rng.hpp"
#include "babc/smc.hpp"

namespace babc {

/// One episode's outcome and the posterior state it left behind.
struct EpisodeLog {
    int episode = 0;  ///< 1-based
    int steps = 0;
    double ret = 0.0;  ///< episode return (sum of rewards)
    double regret = 0.0;
    double cumulative_regret = 0.0;
    double tolerance_at_end = 0.0;
    double ess_at_end = 0.0;
    double bellman_error_at_end = 0.0;
};

/**
 * Argmax action at state s under the value parameters, exact ties broken
 * uniformly at random.  s must not be a goal state.
 */
int greedy_action(const double* theta, const QIndex& idx,
                  const TabularMdp& mdp, int s, Rng& rng);

/// Everything the online loop needs; the CLI builds this from its config.
struct OnlineConfig {
    int n_particles = 20;
    PriorSpec prior;
    double eps_target = 0.05;
    int episodes = 100;
    int step_cap = 0;  ///< 0: ten times the state count
    SmcConfig smc;
    HmcPlan plan;
    std::uint64_t seed = 0;
};

/// Online learning outcome; `aborted` marks a degeneracy cut short with
/// the logs collected so far.
struct OnlineResult {
    std::vector<EpisodeLog> logs;
    ParticleSet particles;
    std::vector<TraceRow> trace;
    Dataset data{Dataset::Dedup::UniquePairs};
    bool aborted = false;
    std::string abort_reason;
};

/**
 * Posterior-sampling exploration: starting from prior particles, each
 * episode samples one particle by weight, rolls out its greedy policy
 * (fixed for the whole episode) until a goal state or the step cap, adds
 * the episode's previously unseen transitions to the dataset (every
 * transition, under stochastic rewards), and reanneals the posterior to
 * the target bandwidth.  The optional observer sees the particle set
 * after each episode's update.
 */
OnlineResult run_online(
    const TabularMdp& mdp, const OnlineConfig& cfg,
    const std::function<void(int, const ParticleSet&)>& observer = {});

/// Per-episode regret: optimal value of the episode's start state minus
/// the achieved return.
double episode_regret(double v_star_start, double episode_return);

/**
 * First episode count E >= 2 whose average regret is at most 0.5, or
 * nullopt if none within the logs.
 */
std::optional<int> learning_time(const std::vector<EpisodeLog>& logs);

} // namespace babc
