// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <optional>
#include <vector>

#include "babc/density.hpp"
#include "babc/mdp.hpp"

namespace babc {

/// Isotropic Gaussian prior over the value parameters.
struct PriorSpec {
    double sigma = 1.0;
    /// Prior mean; empty means zero.
    std::vector<double> mean;
};

/**
 * A similarity bandwidth: either a positive value or "unconstrained",
 * meaning the associated data partition does not enter the posterior yet.
 * The unconstrained case is an explicit tag so that no arithmetic is ever
 * done on an infinite bandwidth.
 */
class Tolerance {
public:
    static Tolerance unconstrained() { return Tolerance(); }
    static Tolerance at(double eps);

    bool is_unconstrained() const { return !eps_.has_value(); }

    /// The finite value; must not be called on an unconstrained tolerance.
    double get() const;

private:
    Tolerance() = default;
    std::optional<double> eps_;
};

/// The pair of bandwidths applied to the old and new data partitions.
struct ToleranceAssignment {
    Tolerance eps_old;
    Tolerance eps_new;
};

/**
 * Log of the Gaussian similarity kernel N(y; x, eps^2), including its
 * normalizer so values at different bandwidths are comparable.
 */
double log_kernel(double eps, double x, double y);

/**
 * The optimality residual of pair (s, a) under parameters theta:
 * theta at (s,a) minus the transition-weighted best successor value
 * (zero at goal successors).  At the true optimal values this equals the
 * mean reward of (s, a).  Exact ties in the successor maximum resolve to
 * the lowest action index.
 */
double bellman_residual(const TabularMdp& mdp, const QIndex& idx,
                        const double* theta, int s, int a);

/**
 * Maximal probability of ever reaching state s_r, per state-action pair:
 * the least fixed point of u(s,a) = sum_s' p(s'|s,a) * (1 if s'=s_r else
 * max_a' u(s',a')), with goal states absorbing at 0.  Along pairs with
 * u = 1 the likelihood of a dataset whose residuals sit in the recurrent
 * region is invariant to a common shift of the reachable coordinates,
 * which is the direction this vector encodes.
 */
std::vector<double> recurrence_direction(const TabularMdp& mdp,
                                         const QIndex& idx, int s_r);

/**
 * The unnormalized posterior over value parameters given two data
 * partitions with separate bandwidths: Gaussian prior times, per record, a
 * Gaussian similarity kernel between the record's observed reward and its
 * optimality residual.  A partition under an unconstrained tolerance
 * contributes nothing.
 *
 * For environments with stochastic rewards of known noise scale, the
 * kernel bandwidth is pinned to that scale for every record (the kernel
 * then IS the exact reward likelihood), so annealing the nominal
 * tolerances leaves the density unchanged.
 *
 * Construction precompiles every record into index/probability form;
 * evaluation never touches the MDP again.  Changing tolerances is O(1).
 */
class Posterior final : public LogDensity {
public:
    /// Per-particle sums of squared reward-residual errors by partition.
    struct ResidualSums {
        double old_part = 0.0;
        double new_part = 0.0;
    };

    Posterior(const TabularMdp& mdp, const QIndex& idx, PriorSpec prior,
              const Dataset& old_data, const Dataset& new_data,
              ToleranceAssignment tol);

    int dim() const override { return d_theta_; }
    double value(const double* theta) const override;
    double value_and_grad(const double* theta, double* grad) const override;

    /// Kernel terms only (no prior), at the current effective bandwidths.
    double log_likelihood(const double* theta) const;

    /// Prior term only.
    double log_prior(const double* theta) const;

    /// Squared-error sums per partition; independent of the bandwidths.
    ResidualSums residual_sums(const double* theta) const;

    const ToleranceAssignment& tolerances() const { return tol_; }
    void set_tolerances(ToleranceAssignment tol);

    std::size_t n_old() const { return recs_old_.size(); }
    std::size_t n_new() const { return recs_new_.size(); }
    const PriorSpec& prior() const { return prior_; }

    /**
     * The bandwidth actually applied given a nominal one: the reward noise
     * scale when the environment has stochastic rewards, the nominal value
     * otherwise.
     */
    double effective_eps(const Tolerance& nominal) const;

private:
    struct Succ {
        int offset;   // first parameter index of the successor's block
        int n;        // block length
        double prob;
    };
    struct Rec {
        int q_idx;
        double r;
        int succ_begin;
        int succ_end;
    };

    void compile(const TabularMdp& mdp, const QIndex& idx,
                 const Dataset& data, std::vector<Rec>& out);
    double residual(const Rec& rec, const double* theta) const;
    // adds one partition's kernel terms (and gradient if grad != nullptr)
    double partition_terms(const std::vector<Rec>& recs, double eps,
                           const double* theta, double* grad) const;

    int d_theta_;
    PriorSpec prior_;
    ToleranceAssignment tol_;
    std::optional<double> noise_sd_;
    std::vector<Rec> recs_old_, recs_new_;
    std::vector<Succ> succ_pool_;
};

/**
 * Weighted average over particles of the summed squared reward-residual
 * errors on a dataset; zero exactly when every particle satisfies all
 * observed optimality equations (deterministic rewards).  `weights` must
 * be normalized; `thetas` is row-major N x d.
 */
double empirical_bellman_error(const std::vector<double>& weights,
                               const std::vector<double>& thetas, int d,
                               const TabularMdp& mdp, const QIndex& idx,
                               const Dataset& data);

} // namespace babc
