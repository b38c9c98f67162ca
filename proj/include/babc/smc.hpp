// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "babc/hmc.hpp"
#include "babc/model.hpp"
#include "babc/rng.hpp"

namespace babc {

/**
 * Annealing stages of a posterior update.  A fresh data batch enters
 * unconstrained and is tempered in:
 *   I    give the new batch its first finite bandwidth,
 *   II   lower the new batch's bandwidth to meet the old data's,
 *   III  lower the common bandwidth toward the target,
 *   IVa  back off the old data's bandwidth when mutation stalls,
 *   IVb  back off the common bandwidth when mutation stalls.
 */
enum class Stage { I, II, III, IVa, IVb, Done };

const char* stage_name(Stage s);

/// Weighted particles with per-particle cached squared-residual sums for
/// the old and new data partitions (the whole annealing schedule reads
/// likelihood changes off these caches instead of re-evaluating records).
struct ParticleSet {
    int n = 0;
    int d = 0;
    std::vector<double> thetas;       // n x d row-major
    std::vector<double> log_weights;  // kept normalized: sum exp = 1
    std::vector<double> resid_old;
    std::vector<double> resid_new;

    double* theta(int i) { return thetas.data() + static_cast<std::size_t>(i) * d; }
    const double* theta(int i) const {
        return thetas.data() + static_cast<std::size_t>(i) * d;
    }
};

/// Sampler controls; defaults match the benchmark configuration.
struct SmcConfig {
    double alpha = 0.9;            ///< ESS retention per tolerance move
    double gr_threshold = 2.2;     ///< mixing-statistic pass level
    double gr_majority = 0.5;      ///< fraction of dimensions that must pass
    int n_m = 3;                   ///< stalled-mutation strikes before backoff
    int n_b = 5;                   ///< flat-error strikes before settling
    int hmc_max_steps = 30;        ///< mutation budget per sampler step
    int gr_min_steps = 5;          ///< earliest mutation early-stop check
    double bellman_improve_rtol = 0.01;  ///< relative decrease that counts
    int max_stage_steps = 1000;    ///< livelock guard per posterior update
    int bisect_max_iters = 100;
    double ess_match_rtol = 5e-3;  ///< bisection stop on |ESS - target|
    int l_star_max = 200;          ///< upper bound for the leapfrog bound
    bool adaptive = true;          ///< false: pure ESS schedule, no backoff
};

/// Per-dimension mixing diagnostic over the mutation chains.
struct GrDiagnostic {
    std::vector<double> w;             ///< within-chain variances
    std::vector<double> b;             ///< between-chain variances
    std::vector<double> sigma_hat_sq;  ///< ((M-1)/M * W + B) / W
    double pass_fraction = 0.0;
};

/// Per-particle step sizes and leapfrog counts chosen by adapt_kernel.
struct KernelSelection {
    std::vector<double> deltas;
    std::vector<int> ls;
};

/// One annealing move's diagnostics, the unit of the run trace.
struct TraceRow {
    std::uint64_t update_index = 0;
    Stage stage = Stage::Done;
    double eps_old = 0.0;
    double eps_new = 0.0;
    double ess = 0.0;  // after reweighting, before any resampling
    bool resampled = false;
    double gr_pass_fraction = 0.0;
    double bellman_error = 0.0;
    double accept_rate = 0.0;
};

/// Counters and bandwidths of an update in progress (final value returned).
struct ToleranceState {
    Tolerance eps_old = Tolerance::unconstrained();
    Tolerance eps_new = Tolerance::unconstrained();
    Stage stage = Stage::Done;
    int c_m = 0;
    int c_b = 0;
};

/// Draws n particles from the prior with uniform weights (caches zeroed).
ParticleSet init_particles(int n, int d, const PriorSpec& prior, Rng& rng);

/// Recomputes both residual caches for every particle.
void refresh_caches(ParticleSet& ps, const Posterior& post);

/// Normalized weights as plain probabilities.
std::vector<double> normalized_weights(const ParticleSet& ps);

/// Weighted particle mean, length d.
std::vector<double> weighted_mean(const ParticleSet& ps);

/**
 * Effective sample size (sum w)^2 / sum w^2 of unnormalized log weights,
 * computed with max-subtraction.  Throws DegeneracyError when every weight
 * has vanished.
 */
double ess(const std::vector<double>& log_weights);

/// Subtracts the log of the exponential sum so weights sum to one.
void normalize_log_weights(std::vector<double>& log_weights);

/**
 * Applies the annealing log-weight increment for moving the stage's
 * partition bandwidths `from` -> `to`, reading the cached residual sums;
 * additive constants drop because weights are renormalized.  Throws
 * ConfigError when the pair of assignments is not a valid move for the
 * stage.  Weights are left normalized.
 */
void reweight(ParticleSet& ps, const Posterior& post, Stage stage,
              const ToleranceAssignment& from, const ToleranceAssignment& to);

/// Multinomial resampling: N independent weighted ancestor draws; weights
/// reset to uniform, thetas and caches copied from ancestors.
void resample_multinomial(ParticleSet& ps, Rng& rng);

/**
 * Chooses the stage's next bandwidth by the ESS retention rule.  If moving
 * straight to `limit` (the floor for lowering stages, the cap for raising
 * stages) keeps ESS >= alpha * current ESS, returns `limit`; otherwise
 * bisects for the bandwidth where ESS equals alpha * current ESS.  For
 * raising stages the root may not exist, in which case `limit` is the
 * answer by the same test.
 */
double find_tolerance(const ParticleSet& ps, const Posterior& post,
                      Stage stage, const ToleranceAssignment& from,
                      double limit, double alpha, const SmcConfig& cfg);

/**
 * Tunes the mutation kernel from the particle population: the mass matrix
 * from the entry population's weighted variances (floored at 1e-8), then
 * one trial trajectory per particle at step size ~ U(0, delta_star] and
 * leapfrog count ~ U{1..l_star}, scored by expected squared jump distance
 * discounted by the energy error.  The step-size bound is refit from the
 * energy errors, per-particle hyperparameters are resampled proportionally
 * to the scores, and the leapfrog bound moves by 5 when a majority of the
 * resampled counts sit in the trials' top or bottom quintile.  Trial
 * trajectories are discarded.
 */
KernelSelection adapt_kernel(const ParticleSet& entry_ps,
                             const ParticleSet& ps, const LogDensity& target,
                             HmcPlan& plan, const SmcConfig& cfg,
                             std::uint64_t seed, std::uint64_t step);

/**
 * Mixing check over equal-length mutation chains, one per particle: per
 * dimension, sigma_hat_sq = (((M-1)/M) W + B) / W from the within- and
 * between-chain variances of the positions.  A dimension passes when the
 * statistic is below `threshold` (a stuck dimension, W = 0, fails), and
 * the move set is effective when at least `majority` of dimensions pass.
 */
std::pair<GrDiagnostic, bool> gelman_rubin(const std::vector<ChainStats>& chains,
                                           double threshold, double majority);

/// Diagnostics of one sampler step, feeding one TraceRow.
struct StepResult {
    double ess_post_reweight = 0.0;
    bool resampled = false;
    GrDiagnostic gr;
    bool effective = false;
    double accept_rate = 0.0;
    int mutation_steps = 0;
    std::vector<ChainStats> chains;  ///< per-particle mutation chains
};

/**
 * One sampler step: reweight `from` -> `to`, resample if ESS dropped below
 * N/2, adapt the mutation kernel, then mutate all particles in lockstep
 * HMC rounds (early-stopped once the mixing check passes, after a minimum
 * number of rounds) and refresh the residual caches.  Mutation rounds run
 * particles in parallel with per-particle substreams of (seed, step), so
 * results are identical for any worker count.
 */
StepResult smc_one_step(ParticleSet& ps, Posterior& post, Stage stage,
                        const ToleranceAssignment& from,
                        const ToleranceAssignment& to, HmcPlan& plan,
                        const SmcConfig& cfg, std::uint64_t seed,
                        std::uint64_t step);

/**
 * Runs the full staged schedule taking the particles from the posterior at
 * (old_data, eps_old_start) to the posterior at (old+new data, eps_target):
 * Stage I admits the new batch, II and III lower bandwidths under the ESS
 * rule, and (in adaptive mode) stalled mutation triggers IVa/IVb backoff
 * capped at twice the bandwidth where the backoff began, while a run of
 * non-improving squared-residual error at a common bandwidth settles the
 * update early.  Appends one TraceRow per move to `trace` (also on
 * failure) and returns the final counters and bandwidths.
 *
 * `stream_epoch` must be distinct per update so random substreams never
 * collide across updates of one run.
 */
ToleranceState update_posterior(ParticleSet& ps, const TabularMdp& mdp,
                                const QIndex& idx, const PriorSpec& prior,
                                const Dataset& old_data,
                                const Dataset& new_data, double eps_old_start,
                                double eps_target, HmcPlan& plan,
                                const SmcConfig& cfg, std::uint64_t seed,
                                std::uint64_t stream_epoch,
                                std::uint64_t update_index,
                                std::vector<TraceRow>& trace);

} // namespace babc
