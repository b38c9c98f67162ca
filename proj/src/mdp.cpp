// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#include "babc/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "babc/errors.hpp"

namespace babc {

namespace {

constexpr double kProbTol = 1e-12;

} // namespace

// ---------------------------------------------------------------------------
// TabularMdp
// ---------------------------------------------------------------------------

TabularMdp::TabularMdp(std::vector<std::vector<Action>> actions,
                       std::vector<bool> is_goal,
                       std::vector<std::pair<int, double>> initial_dist,
                       std::vector<std::string> state_labels,
                       std::optional<double> reward_noise_sd)
    : actions_(std::move(actions)),
      is_goal_(std::move(is_goal)),
      initial_dist_(std::move(initial_dist)),
      state_labels_(std::move(state_labels)),
      reward_noise_sd_(std::move(reward_noise_sd)) {
    validate();
}

void TabularMdp::validate() const {
    const int n = n_states();
    if (n == 0) throw ConfigError("MDP has no states");
    if (static_cast<int>(is_goal_.size()) != n ||
        static_cast<int>(state_labels_.size()) != n) {
        throw ConfigError("MDP field sizes disagree");
    }
    if (reward_noise_sd_ && *reward_noise_sd_ < 0.0) {
        throw ConfigError("reward noise sd must be nonnegative");
    }
    bool any_goal = false;
    for (int s = 0; s < n; ++s) {
        if (actions_[s].empty()) {
            throw ConfigError("state " + state_labels_[s] + " has no actions");
        }
        for (const Action& act : actions_[s]) {
            double total = 0.0;
            for (const auto& [s2, p] : act.successors) {
                if (s2 < 0 || s2 >= n) {
                    throw ConfigError("successor state out of range");
                }
                if (p < 0.0) throw ConfigError("negative transition probability");
                total += p;
            }
            if (std::abs(total - 1.0) > kProbTol) {
                throw ConfigError("transition distribution of state " +
                                  state_labels_[s] + " does not sum to 1");
            }
        }
        if (is_goal_[s]) {
            any_goal = true;
            const bool absorbing =
                actions_[s].size() == 1 && actions_[s][0].mean_reward == 0.0 &&
                actions_[s][0].successors.size() == 1 &&
                actions_[s][0].successors[0] == std::pair<int, double>{s, 1.0};
            if (!absorbing) {
                throw ConfigError("goal state " + state_labels_[s] +
                                  " is not a zero-reward self-loop");
            }
        }
    }
    if (!any_goal) throw ConfigError("MDP has no goal state");
    double init_total = 0.0;
    for (const auto& [s, p] : initial_dist_) {
        if (s < 0 || s >= n) throw ConfigError("initial state out of range");
        if (p < 0.0) throw ConfigError("negative initial probability");
        init_total += p;
    }
    if (std::abs(init_total - 1.0) > kProbTol) {
        throw ConfigError("initial distribution does not sum to 1");
    }
}

int TabularMdp::sample_initial(Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    int last = initial_dist_.front().first;
    for (const auto& [s, p] : initial_dist_) {
        if (p <= 0.0) continue;
        acc += p;
        last = s;
        if (u < acc) return s;
    }
    return last;
}

std::pair<double, int> TabularMdp::step(int s, int a, Rng& rng) const {
    if (s < 0 || s >= n_states() || a < 0 || a >= n_actions(s)) {
        throw ConfigError("inadmissible action " + std::to_string(a) +
                          " at state " + std::to_string(s));
    }
    const Action& act = actions_[s][a];
    int s_next = act.successors.front().first;
    if (act.successors.size() > 1) {
        const double u = rng.uniform();
        double acc = 0.0;
        for (const auto& [s2, p] : act.successors) {
            if (p <= 0.0) continue;
            acc += p;
            s_next = s2;
            if (u < acc) break;
        }
    }
    double r = act.mean_reward;
    if (reward_noise_sd_ && *reward_noise_sd_ > 0.0) {
        r += *reward_noise_sd_ * rng.normal();
    }
    return {r, s_next};
}

int TabularMdp::action_position(int s, int label) const {
    for (int a = 0; a < n_actions(s); ++a) {
        if (actions_[s][a].label == label) return a;
    }
    return -1;
}

// ---------------------------------------------------------------------------
// QIndex
// ---------------------------------------------------------------------------

QIndex::QIndex(const TabularMdp& mdp) {
    const int n = mdp.n_states();
    offset_.assign(n, 0);
    int next = 0;
    for (int s = 0; s < n; ++s) {
        if (mdp.is_goal(s)) continue;
        offset_[s] = next;
        next += mdp.n_actions(s);
    }
    d_theta_ = next;
    for (int s = 0; s < n; ++s) {
        if (!mdp.is_goal(s)) continue;
        offset_[s] = next;
        next += mdp.n_actions(s);
    }
    inverse_.assign(next, {0, 0});
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < mdp.n_actions(s); ++a) {
            inverse_[offset_[s] + a] = {s, a};
        }
    }
}

std::pair<int, int> QIndex::state_action(int k) const { return inverse_[k]; }

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

bool Dataset::add(const Transition& t) {
    if (mode_ == Dedup::UniquePairs) {
        const std::pair<int, int> key{t.s, t.a};
        const auto it = std::lower_bound(seen_.begin(), seen_.end(), key);
        if (it != seen_.end() && *it == key) return false;
        seen_.insert(it, key);
    }
    records_.push_back(t);
    return true;
}

std::size_t Dataset::merge(const Dataset& other) {
    std::size_t added = 0;
    for (const Transition& t : other.records_) added += add(t);
    return added;
}

bool Dataset::contains(int s, int a) const {
    if (mode_ == Dedup::UniquePairs) {
        return std::binary_search(seen_.begin(), seen_.end(),
                                  std::pair<int, int>{s, a});
    }
    return std::any_of(records_.begin(), records_.end(), [&](const Transition& t) {
        return t.s == s && t.a == a;
    });
}

// ---------------------------------------------------------------------------
// Value iteration
// ---------------------------------------------------------------------------

std::vector<double> value_iteration(const TabularMdp& mdp, const QIndex& idx,
                                    double tol, int max_sweeps) {
    if (tol <= 0.0) throw ConfigError("value_iteration tolerance must be > 0");
    std::vector<double> q(idx.d_theta(), 0.0);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double delta = 0.0;
        for (int s = 0; s < mdp.n_states(); ++s) {
            if (mdp.is_goal(s)) continue;
            for (int a = 0; a < mdp.n_actions(s); ++a) {
                const TabularMdp::Action& act = mdp.action(s, a);
                double value = act.mean_reward;
                for (const auto& [s2, p] : act.successors) {
                    value += p * state_value(q, idx, mdp, s2);
                }
                double& slot = q[idx(s, a)];
                delta = std::max(delta, std::abs(value - slot));
                slot = value;
            }
        }
        if (delta < tol) return q;
    }
    throw NumericalError(
        "value iteration did not converge; no policy appears to reach a goal");
}

double state_value(const std::vector<double>& q, const QIndex& idx,
                   const TabularMdp& mdp, int s) {
    if (mdp.is_goal(s)) return 0.0;
    double best = q[idx(s, 0)];
    for (int a = 1; a < mdp.n_actions(s); ++a) {
        best = std::max(best, q[idx(s, a)]);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Built-in environments
// ---------------------------------------------------------------------------

namespace {

TabularMdp::Action goal_loop(int s) {
    return {0, 0.0, {{s, 1.0}}};
}

} // namespace

TabularMdp two_state_example() {
    std::vector<std::vector<TabularMdp::Action>> actions(2);
    actions[0] = {{0, -1.0, {{0, 1.0}}}, {1, -1.0, {{1, 1.0}}}};
    actions[1] = {goal_loop(1)};
    return TabularMdp(std::move(actions), {false, true}, {{0, 1.0}},
                      {"s1", "s2"});
}

TabularMdp five_state_example(double r1, double r2, double r3, double r4) {
    std::vector<std::vector<TabularMdp::Action>> actions(5);
    actions[0] = {{0, r1, {{1, 1.0}}}, {1, r2, {{2, 1.0}}}};
    actions[1] = {{0, r3, {{3, 1.0}}}};
    actions[2] = {{1, r4, {{4, 1.0}}}};
    actions[3] = {goal_loop(3)};
    actions[4] = {goal_loop(4)};
    return TabularMdp(std::move(actions), {false, false, false, true, true},
                      {{0, 1.0}}, {"s1", "s2", "s3", "s4", "s5"});
}

TabularMdp deep_sea(int depth) {
    if (depth < 1) throw ConfigError("deep_sea depth must be >= 1");
    const int d = depth;
    // cell (row, col) with 0 <= col <= row < d, row-major
    std::vector<std::string> labels;
    auto id_of = [&](int row, int col) { return row * (row + 1) / 2 + col; };
    const int n = d * (d + 1) / 2;
    labels.reserve(n);
    for (int row = 0; row < d; ++row) {
        for (int col = 0; col <= row; ++col) {
            labels.push_back("(" + std::to_string(row) + "," +
                             std::to_string(col) + ")");
        }
    }
    std::vector<std::vector<TabularMdp::Action>> actions(n);
    std::vector<bool> is_goal(n, false);
    const double penalty = 1.0 / (100.0 * d);
    for (int row = 0; row < d; ++row) {
        for (int col = 0; col <= row; ++col) {
            const int s = id_of(row, col);
            if (row == d - 1) {
                is_goal[s] = true;
                actions[s] = {goal_loop(s)};
                continue;
            }
            const int right = id_of(row + 1, col + 1);
            const int left = id_of(row + 1, std::max(col - 1, 0));
            double r_right = -penalty;
            if (row + 1 == d - 1 && col + 1 == d - 1) r_right += 1.0;
            double r_left = penalty;
            if (row + 1 == d - 1 && std::max(col - 1, 0) == d - 1) r_left += 1.0;
            actions[s] = {{0, r_right, {{right, 1.0}}},
                          {1, r_left, {{left, 1.0}}}};
        }
    }
    return TabularMdp(std::move(actions), std::move(is_goal),
                      {{id_of(0, 0), 1.0}}, std::move(labels));
}

TabularMdp from_env_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    const std::string args =
        colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (name == "two_state") {
        if (!args.empty()) throw ConfigError("two_state takes no arguments");
        return two_state_example();
    }
    if (name == "deep_sea") {
        int depth = 0;
        std::istringstream in(args);
        if (!(in >> depth) || !in.eof() || depth < 1) {
            throw ConfigError("bad environment spec '" + spec +
                              "': want deep_sea:<depth> with depth >= 1");
        }
        return deep_sea(depth);
    }
    if (name == "five_state") {
        std::istringstream in(args);
        double r[4];
        char sep = ',';
        bool ok = true;
        for (int i = 0; i < 4 && ok; ++i) {
            if (i > 0 && (!(in >> sep) || sep != ',')) ok = false;
            if (ok && !(in >> r[i])) ok = false;
        }
        if (!ok || !in.eof()) {
            throw ConfigError("bad environment spec '" + spec +
                              "': want five_state:<r1>,<r2>,<r3>,<r4>");
        }
        return five_state_example(r[0], r[1], r[2], r[3]);
    }
    throw ConfigError("unknown environment '" + spec +
                      "'; known: two_state, five_state:<r1>,<r2>,<r3>,<r4>, "
                      "deep_sea:<depth>");
}

} // namespace babc
