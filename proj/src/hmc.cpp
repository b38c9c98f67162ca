// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#include "babc/hmc.hpp"

#include <cmath>
#include <cstddef>

#include "babc/errors.hpp"
#include "babc/kernels.hpp"

namespace babc {

double kinetic_energy(const std::vector<double>& p,
                      const std::vector<double>& mass_diag) {
    double total = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        total += p[k] * p[k] / (2.0 * mass_diag[k]);
    }
    return total;
}

double hamiltonian(const std::vector<double>& theta,
                   const std::vector<double>& p, const LogDensity& target,
                   const std::vector<double>& mass_diag) {
    return -target.value(theta.data()) + kinetic_energy(p, mass_diag);
}

double leapfrog(std::vector<double>& theta, std::vector<double>& p,
                double delta, int L, const LogDensity& target,
                const std::vector<double>& mass_diag) {
    if (!(delta > 0.0) || L < 1) {
        throw ConfigError("leapfrog requires delta > 0 and L >= 1");
    }
    const std::size_t d = theta.size();
    std::vector<double> grad(d);
    target.value_and_grad(theta.data(), grad.data());
    const Kernels& k = kernels();
    double logpdf = 0.0;
    k.axpy(0.5 * delta, grad.data(), p.data(), d);
    for (int step = 0; step < L; ++step) {
        for (std::size_t j = 0; j < d; ++j) {
            theta[j] += delta * p[j] / mass_diag[j];
        }
        logpdf = target.value_and_grad(theta.data(), grad.data());
        k.axpy(step + 1 == L ? 0.5 * delta : delta, grad.data(), p.data(), d);
    }
    return logpdf;
}

HmcWalker::HmcWalker(const LogDensity& target, std::vector<double> theta0,
                     std::vector<double> mass_diag, double delta, int l)
    : target_(&target),
      mass_diag_(std::move(mass_diag)),
      delta_(delta),
      l_(l),
      theta_(std::move(theta0)),
      grad_(theta_.size()),
      prop_theta_(theta_.size()),
      prop_grad_(theta_.size()),
      p_(theta_.size()) {
    if (!(delta_ > 0.0) || l_ < 1) {
        throw ConfigError("HMC step size must be > 0 and leapfrog count >= 1");
    }
    logpdf_ = target_->value_and_grad(theta_.data(), grad_.data());
}

bool HmcWalker::step(Rng& rng) {
    const std::size_t d = theta_.size();
    for (std::size_t k = 0; k < d; ++k) {
        p_[k] = std::sqrt(mass_diag_[k]) * rng.normal();
    }
    const double h0 = -logpdf_ + kinetic_energy(p_, mass_diag_);
    prop_theta_ = theta_;
    prop_grad_ = grad_;
    const Kernels& kn = kernels();
    kn.axpy(0.5 * delta_, prop_grad_.data(), p_.data(), d);
    double prop_logpdf = logpdf_;
    for (int step = 0; step < l_; ++step) {
        for (std::size_t j = 0; j < d; ++j) {
            prop_theta_[j] += delta_ * p_[j] / mass_diag_[j];
        }
        prop_logpdf =
            target_->value_and_grad(prop_theta_.data(), prop_grad_.data());
        kn.axpy(step + 1 == l_ ? 0.5 * delta_ : delta_, prop_grad_.data(),
                p_.data(), d);
    }
    const double h1 = -prop_logpdf + kinetic_energy(p_, mass_diag_);
    ++proposals_;
    // the uniform is always drawn so every step costs the same randomness
    const double log_u = std::log(rng.uniform_pos());
    const bool accept = std::isfinite(h1) && log_u < h0 - h1;
    if (accept) {
        theta_.swap(prop_theta_);
        grad_.swap(prop_grad_);
        logpdf_ = prop_logpdf;
        ++accepts_;
    }
    return accept;
}

ChainStats hmc_chain(const std::vector<double>& theta0, const HmcPlan& plan,
                     double delta, int l, const LogDensity& target, Rng& rng,
                     const std::function<bool(const ChainStats&)>& stop) {
    if (delta > plan.delta_star || l > plan.l_star) {
        throw ConfigError("chain hyperparameters exceed the plan bounds");
    }
    HmcWalker walker(target, theta0, plan.mass_diag, delta, l);
    ChainStats stats;
    stats.dim = static_cast<int>(theta0.size());
    stats.samples.reserve(static_cast<std::size_t>(plan.max_steps) * stats.dim);
    for (int m = 0; m < plan.max_steps; ++m) {
        walker.step(rng);
        stats.samples.insert(stats.samples.end(), walker.theta().begin(),
                             walker.theta().end());
        ++stats.n_samples;
        stats.accepts = walker.accepts();
        stats.proposals = walker.proposals();
        if (stop && stop(stats)) break;
    }
    return stats;
}

} // namespace babc
