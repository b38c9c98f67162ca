// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "babc/rng.hpp"

namespace babc {

/**
 * A finite, undiscounted MDP with absorbing zero-reward goal states.
 *
 * States are dense integers 0..n_states()-1 with display labels kept in a
 * side table.  Actions are positional per state: action `a` of state `s` is
 * the a-th entry of that state's admissible list, whose display label may
 * differ from its position (some states expose only a subset of the global
 * action alphabet).
 *
 * Every goal state has exactly one action, a self-loop with zero reward, so
 * episode returns are well-defined without discounting.  Instances are
 * immutable after construction and safe to share across threads.
 */
class TabularMdp {
public:
    /// One admissible action of one state.
    struct Action {
        int label = 0;                  ///< display label (global alphabet)
        double mean_reward = 0.0;
        /// categorical successor distribution as (state, probability) pairs
        std::vector<std::pair<int, double>> successors;
    };

    TabularMdp(std::vector<std::vector<Action>> actions,
               std::vector<bool> is_goal,
               std::vector<std::pair<int, double>> initial_dist,
               std::vector<std::string> state_labels,
               std::optional<double> reward_noise_sd = std::nullopt);

    int n_states() const { return static_cast<int>(actions_.size()); }
    int n_actions(int s) const { return static_cast<int>(actions_[s].size()); }
    bool is_goal(int s) const { return is_goal_[s]; }
    const Action& action(int s, int a) const { return actions_[s][a]; }
    const std::string& state_label(int s) const { return state_labels_[s]; }
    const std::vector<std::pair<int, double>>& initial_dist() const {
        return initial_dist_;
    }
    const std::optional<double>& reward_noise_sd() const {
        return reward_noise_sd_;
    }

    /// Draws an initial state.
    int sample_initial(Rng& rng) const;

    /**
     * Simulates one interaction from (s, a): the successor is drawn from the
     * transition distribution and the reward is the mean reward plus
     * Gaussian noise when a reward noise scale is configured (exactly the
     * mean otherwise).  Throws ConfigError if `a` is not admissible at `s`.
     */
    std::pair<double, int> step(int s, int a, Rng& rng) const;

    /// Finds the position of a display label in a state's admissible list,
    /// or -1 when the label is not admissible there.
    int action_position(int s, int label) const;

private:
    void validate() const;

    std::vector<std::vector<Action>> actions_;
    std::vector<bool> is_goal_;
    std::vector<std::pair<int, double>> initial_dist_;
    std::vector<std::string> state_labels_;
    std::optional<double> reward_noise_sd_;
};

/**
 * The coordinate layout of the tabular value parametrization: a bijection
 * from state-action pairs to parameter indices.  Non-goal pairs occupy
 * 0..d_theta()-1 with each state's actions contiguous; goal pairs follow at
 * d_theta() and above, and the value at any goal pair is identically zero
 * by convention (callers never store parameters for them).
 */
class QIndex {
public:
    explicit QIndex(const TabularMdp& mdp);

    /// Number of non-goal state-action pairs (the parameter dimension).
    int d_theta() const { return d_theta_; }

    /// Parameter index of (s, a); >= d_theta() exactly for goal pairs.
    int operator()(int s, int a) const { return offset_[s] + a; }

    /// First parameter index of state s's action block.
    int state_offset(int s) const { return offset_[s]; }

    /// Inverse map: the (s, a) pair owning parameter index k.
    std::pair<int, int> state_action(int k) const;

private:
    std::vector<int> offset_;
    std::vector<std::pair<int, int>> inverse_;
    int d_theta_ = 0;
};

/// One observed interaction (s, a, r, s_next).
struct Transition {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;
};

/**
 * A growing collection of observed transitions.
 *
 * With deterministic rewards (UniquePairs) repeated visits to a state-action
 * pair carry no new information, so at most one record per pair is kept;
 * with stochastic rewards (Multiset) every observation is retained.
 */
class Dataset {
public:
    enum class Dedup { UniquePairs, Multiset };

    explicit Dataset(Dedup mode = Dedup::UniquePairs) : mode_(mode) {}

    /// Appends a record; returns false when UniquePairs drops a duplicate.
    bool add(const Transition& t);

    /// Appends every record of `other` under this dataset's dedup rule;
    /// returns the number actually added.
    std::size_t merge(const Dataset& other);

    bool contains(int s, int a) const;
    const std::vector<Transition>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    Dedup mode() const { return mode_; }

private:
    Dedup mode_;
    std::vector<Transition> records_;
    std::vector<std::pair<int, int>> seen_;  // sorted (s,a) keys (UniquePairs)
};

/**
 * Solves for the optimal action values by synchronous fixed-point sweeps,
 * returning a vector over the QIndex layout (goal pairs are implicitly
 * zero).  Sweeps stop when the sup-norm update falls below `tol`; if that
 * does not happen within `max_sweeps`, a NumericalError is thrown, which on
 * these undiscounted problems signals that no policy reaches a goal.
 */
std::vector<double> value_iteration(const TabularMdp& mdp, const QIndex& idx,
                                    double tol, int max_sweeps = 10000);

/// Optimal value of a state under a QIndex-layout value vector: the maximum
/// over its actions, or zero at goal states.
double state_value(const std::vector<double>& q, const QIndex& idx,
                   const TabularMdp& mdp, int s);

// ---------------------------------------------------------------------------
// Built-in environments
// ---------------------------------------------------------------------------

/**
 * Two-state chain: at the start state, action 0 self-loops and action 1
 * moves to the goal, both with reward -1.  The optimal values are (-2, -1),
 * so action 1 is optimal.  The self-loop makes the start state recurrent
 * under the suboptimal policy, the smallest instance with an unidentifiable
 * value direction under partial data.
 */
TabularMdp two_state_example();

/**
 * Five-state tree: the start state chooses between two two-step corridors,
 * earning r1 then r3 on one and r2 then r4 on the other; both corridors end
 * in (separate) goals.  All four non-goal pairs are observable, the optimal
 * values are (r1+r3, r2+r4, r3, r4), and the posterior under a Gaussian
 * prior is exactly Gaussian, which makes this the standard closed-form
 * verification instance.
 */
TabularMdp five_state_example(double r1, double r2, double r3, double r4);

/**
 * Deep Sea exploration grid of the given depth d: cells (row, col) with
 * 0 <= col <= row < d, start at (0,0), bottom row absorbing.  Action 0
 * descends right with reward -1/(100d), action 1 descends left (clamped at
 * the left edge) with reward +1/(100d), and entering the bottom-right
 * treasure cell adds +1.  The lone rewarding strategy, always descending
 * right, must be found against d-1 small penalties, which makes dithering
 * exploration exponentially slow in d.
 */
TabularMdp deep_sea(int depth);

/**
 * Parses an environment name: "two_state", "five_state:<r1>,<r2>,<r3>,<r4>",
 * or "deep_sea:<depth>".  Throws ConfigError on anything else.
 */
TabularMdp from_env_spec(const std::string& spec);

} // namespace babc
