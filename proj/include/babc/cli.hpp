// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <cstdint>
#include <string>

#include "babc/mdp.hpp"

namespace babc {

/**
 * Run parameters shared by every subcommand.  A config file is a single
 * flat JSON object whose keys are exactly these field names; command-line
 * flags override file values.
 */
struct RunConfig {
    std::string env = "deep_sea:5";
    int n_particles = 20;
    double prior_sigma = 4.0;
    double alpha = 0.9;
    double eps_target = 0.1;
    double gr_threshold = 2.2;
    double gr_majority = 0.5;
    int n_m = 3;
    int n_b = 5;
    int hmc_max_steps = 30;
    double delta_star0 = 0.5;
    int l_star0 = 60;
    int episodes = 300;
    std::uint64_t seed = 0;
    std::string mode = "non_adaptive";
};

/// Loads and validates a JSON config file; unknown keys are errors.
RunConfig load_config(const std::string& path);

/// Throws ConfigError when any field is out of range.
void validate_config(const RunConfig& cfg);

/**
 * Reads a transition dataset from a CSV file with header `s,a,r,s_next`;
 * `#` starts a comment line.  Errors carry 1-based line numbers.  Records
 * are checked against the environment (admissible pairs, valid states).
 */
Dataset load_dataset(const std::string& path, const TabularMdp& mdp);

/// The complete dataset: one record per non-goal admissible pair with the
/// pair's mean reward (deterministic environments only).
Dataset complete_dataset(const TabularMdp& mdp);

/**
 * Entry point behind main(): parses the subcommand (`offline`, `online`,
 * `oracle`, `benchmark`) and flags, runs it, and maps errors to exit
 * codes 2 (configuration), 3 (numerical), 4 (degeneracy).
 */
int run_cli(int argc, const char* const* argv);

} // namespace babc
