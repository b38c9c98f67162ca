// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#include "babc/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "babc/errors.hpp"

namespace babc {

int greedy_action(const double* theta, const QIndex& idx,
                  const TabularMdp& mdp, int s, Rng& rng) {
    if (mdp.is_goal(s)) throw ConfigError("no action choice at a goal state");
    const int na = mdp.n_actions(s);
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < na; ++a) best = std::max(best, theta[idx(s, a)]);
    std::vector<int> arg;
    arg.reserve(na);
    for (int a = 0; a < na; ++a)
        if (theta[idx(s, a)] == best) arg.push_back(a);
    if (arg.size() == 1) return arg[0];
    return arg[static_cast<std::size_t>(rng.uniform_int(arg.size()))];
}

double episode_regret(double v_star_start, double episode_return) {
    return v_star_start - episode_return;
}

std::optional<int> learning_time(const std::vector<EpisodeLog>& logs) {
    for (const EpisodeLog& log : logs) {
        if (log.episode < 2) continue;
        if (log.cumulative_regret / log.episode <= 0.5) return log.episode;
    }
    return std::nullopt;
}

OnlineResult run_online(
    const TabularMdp& mdp, const OnlineConfig& cfg,
    const std::function<void(int, const ParticleSet&)>& observer) {
    if (cfg.episodes < 1) throw ConfigError("episode count must be positive");
    if (cfg.n_particles < 2)
        throw ConfigError("particle count must be at least 2");
    const QIndex idx(mdp);
    const int d = idx.d_theta();
    const int step_cap =
        cfg.step_cap > 0 ? cfg.step_cap : 10 * mdp.n_states();

    OnlineResult out;
    out.data = Dataset(mdp.reward_noise_sd().has_value()
                           ? Dataset::Dedup::Multiset
                           : Dataset::Dedup::UniquePairs);

    if (d > 0) {
        Rng init = substream(cfg.seed, "init");
        out.particles = init_particles(cfg.n_particles, d, cfg.prior, init);
    } else {
        // Every state is a goal: nothing to learn, but episodes still run.
        out.particles.n = cfg.n_particles;
        out.particles.d = 0;
        out.particles.log_weights.assign(
            cfg.n_particles, -std::log(static_cast<double>(cfg.n_particles)));
        out.particles.resid_old.assign(cfg.n_particles, 0.0);
        out.particles.resid_new.assign(cfg.n_particles, 0.0);
    }

    const std::vector<double> q_star = value_iteration(mdp, idx, 1e-10);
    HmcPlan plan = cfg.plan;
    double eps_carry = cfg.eps_target;
    double cum_regret = 0.0;
    std::vector<double> theta(std::max(d, 1));

    for (int e = 1; e <= cfg.episodes; ++e) {
        Rng ep_rng = substream(cfg.seed, "episode", static_cast<std::uint64_t>(e));

        // Policy for the episode: one particle sampled by weight.
        {
            const std::vector<double> w = normalized_weights(out.particles);
            double wsum = 0.0;
            for (double x : w) wsum += x;
            const int pick = ep_rng.categorical(w.data(), out.particles.n, wsum);
            if (d > 0) {
                const double* th = out.particles.theta(pick);
                std::copy(th, th + d, theta.begin());
            }
        }

        EpisodeLog log;
        log.episode = e;
        int s = mdp.sample_initial(ep_rng);
        const double v_star_start = state_value(q_star, idx, mdp, s);
        Dataset batch(out.data.mode());
        while (!mdp.is_goal(s) && log.steps < step_cap) {
            const int a = greedy_action(theta.data(), idx, mdp, s, ep_rng);
            const auto [r, s_next] = mdp.step(s, a, ep_rng);
            if (out.data.mode() == Dataset::Dedup::Multiset ||
                !out.data.contains(s, a))
                batch.add(Transition{s, a, r, s_next});
            log.ret += r;
            s = s_next;
            ++log.steps;
        }
        log.regret = episode_regret(v_star_start, log.ret);
        cum_regret += log.regret;
        log.cumulative_regret = cum_regret;

        if (d > 0) {
            try {
                const ToleranceState final_state = update_posterior(
                    out.particles, mdp, idx, cfg.prior, out.data, batch,
                    eps_carry, cfg.eps_target, plan, cfg.smc, cfg.seed,
                    static_cast<std::uint64_t>(e) *
                        (static_cast<std::uint64_t>(cfg.smc.max_stage_steps) + 1),
                    static_cast<std::uint64_t>(e), out.trace);
                eps_carry = final_state.eps_old.get();
            } catch (const DegeneracyError& err) {
                out.aborted = true;
                out.abort_reason = err.what();
            }
            out.data.merge(batch);
        }

        log.tolerance_at_end = eps_carry;
        log.ess_at_end = ess(out.particles.log_weights);
        {
            const std::vector<double> w = normalized_weights(out.particles);
            double bell = 0.0;
            for (int i = 0; i < out.particles.n; ++i)
                bell += w[i] * (out.particles.resid_old[i] +
                                out.particles.resid_new[i]);
            log.bellman_error_at_end = bell;
        }
        out.logs.push_back(log);
        if (observer) observer(e, out.particles);
        if (out.aborted) break;
    }
    return out;
}

} // namespace babc
