// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <functional>
#include <vector>

#include "babc/density.hpp"
#include "babc/rng.hpp"

namespace babc {

/**
 * Hyperparameters of the Hamiltonian Monte Carlo kernel: upper bounds for
 * the step size and leapfrog count (per-particle values are sampled below
 * these), the diagonal mass matrix, and the per-invocation step budget.
 */
struct HmcPlan {
    double delta_star = 0.5;
    int l_star = 10;
    std::vector<double> mass_diag;
    int max_steps = 30;
};

/// A recorded chain: row-major samples plus acceptance bookkeeping.
struct ChainStats {
    int dim = 0;
    int n_samples = 0;
    std::vector<double> samples;  // n_samples x dim
    int accepts = 0;
    int proposals = 0;

    const double* sample(int m) const {
        return samples.data() + static_cast<std::size_t>(m) * dim;
    }
};

/// Kinetic energy sum p_k^2 / (2 mass_k).
double kinetic_energy(const std::vector<double>& p,
                      const std::vector<double>& mass_diag);

/// Total energy: negative target log density plus kinetic energy.
double hamiltonian(const std::vector<double>& theta,
                   const std::vector<double>& p, const LogDensity& target,
                   const std::vector<double>& mass_diag);

/**
 * Integrates Hamilton's equations in place for L leapfrog steps of size
 * delta (half-kick, drift by delta * p / mass, half-kick) and returns the
 * final target log density.  Divergences are not errors: non-finite values
 * propagate into the returned density for the caller's energy check.
 */
double leapfrog(std::vector<double>& theta, std::vector<double>& p,
                double delta, int L, const LogDensity& target,
                const std::vector<double>& mass_diag);

/**
 * One particle's Metropolis-corrected HMC state machine.  Holds the
 * current position with its cached log density and gradient; step() draws
 * a momentum, integrates a trajectory, and accepts with probability
 * min(1, exp(H_before - H_after)), rejecting automatically when the energy
 * is not finite.  Each step consumes a fixed number of random draws, so
 * lockstep walkers stay reproducible under any execution order.
 */
class HmcWalker {
public:
    HmcWalker(const LogDensity& target, std::vector<double> theta0,
              std::vector<double> mass_diag, double delta, int l);

    /// One proposal; returns true when accepted.
    bool step(Rng& rng);

    const std::vector<double>& theta() const { return theta_; }
    double log_density() const { return logpdf_; }
    int accepts() const { return accepts_; }
    int proposals() const { return proposals_; }

private:
    const LogDensity* target_;
    std::vector<double> mass_diag_;
    double delta_;
    int l_;
    std::vector<double> theta_, grad_, prop_theta_, prop_grad_, p_;
    double logpdf_;
    int accepts_ = 0;
    int proposals_ = 0;
};

/**
 * Runs up to plan.max_steps HMC steps from theta0 at fixed (delta, l),
 * recording every post-step position (accepted or not, as in a standard
 * MH chain).  After each sample the optional predicate sees the chain so
 * far and may end it early.
 */
ChainStats hmc_chain(const std::vector<double>& theta0, const HmcPlan& plan,
                     double delta, int l, const LogDensity& target, Rng& rng,
                     const std::function<bool(const ChainStats&)>& stop = {});

} // namespace babc
