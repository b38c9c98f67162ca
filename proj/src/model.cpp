// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#include "babc/model.hpp"

#include <cmath>

#include "babc/errors.hpp"

namespace babc {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

} // namespace

Tolerance Tolerance::at(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw ConfigError("tolerance must be a positive finite value");
    }
    Tolerance t;
    t.eps_ = eps;
    return t;
}

double Tolerance::get() const {
    if (!eps_) throw ConfigError("tolerance is unconstrained");
    return *eps_;
}

double log_kernel(double eps, double x, double y) {
    if (!(eps > 0.0)) throw ConfigError("kernel bandwidth must be > 0");
    const double z = (x - y) / eps;
    return -0.5 * z * z - std::log(eps) - kHalfLog2Pi;
}

double bellman_residual(const TabularMdp& mdp, const QIndex& idx,
                        const double* theta, int s, int a) {
    if (a < 0 || a >= mdp.n_actions(s)) {
        throw ConfigError("inadmissible action in residual evaluation");
    }
    const double own = mdp.is_goal(s) ? 0.0 : theta[idx(s, a)];
    double expected_best = 0.0;
    for (const auto& [s2, p] : mdp.action(s, a).successors) {
        if (mdp.is_goal(s2)) continue;
        double best = theta[idx(s2, 0)];
        for (int a2 = 1; a2 < mdp.n_actions(s2); ++a2) {
            best = std::max(best, theta[idx(s2, a2)]);
        }
        expected_best += p * best;
    }
    return own - expected_best;
}

std::vector<double> recurrence_direction(const TabularMdp& mdp,
                                         const QIndex& idx, int s_r) {
    if (s_r < 0 || s_r >= mdp.n_states() || mdp.is_goal(s_r)) {
        throw ConfigError("recurrence state must be a non-goal state");
    }
    std::vector<double> u(idx.d_theta(), 0.0), next(idx.d_theta(), 0.0);
    for (int iter = 0; iter < 100000; ++iter) {
        double delta = 0.0;
        for (int s = 0; s < mdp.n_states(); ++s) {
            if (mdp.is_goal(s)) continue;
            for (int a = 0; a < mdp.n_actions(s); ++a) {
                double val = 0.0;
                for (const auto& [s2, p] : mdp.action(s, a).successors) {
                    if (s2 == s_r) {
                        val += p;
                    } else if (!mdp.is_goal(s2)) {
                        double best = u[idx(s2, 0)];
                        for (int a2 = 1; a2 < mdp.n_actions(s2); ++a2) {
                            best = std::max(best, u[idx(s2, a2)]);
                        }
                        val += p * best;
                    }
                }
                const int k = idx(s, a);
                delta = std::max(delta, std::abs(val - u[k]));
                next[k] = val;
            }
        }
        u.swap(next);
        if (delta < 1e-12) return u;
    }
    throw NumericalError("reach-probability iteration did not converge");
}

// ---------------------------------------------------------------------------
// Posterior
// ---------------------------------------------------------------------------

Posterior::Posterior(const TabularMdp& mdp, const QIndex& idx, PriorSpec prior,
                     const Dataset& old_data, const Dataset& new_data,
                     ToleranceAssignment tol)
    : d_theta_(idx.d_theta()),
      prior_(std::move(prior)),
      tol_(tol),
      noise_sd_(mdp.reward_noise_sd()) {
    if (!(prior_.sigma > 0.0)) throw ConfigError("prior sigma must be > 0");
    if (!prior_.mean.empty() &&
        static_cast<int>(prior_.mean.size()) != d_theta_) {
        throw ConfigError("prior mean length does not match the parameter "
                          "dimension");
    }
    if (noise_sd_ && !(*noise_sd_ > 0.0)) noise_sd_.reset();
    compile(mdp, idx, old_data, recs_old_);
    compile(mdp, idx, new_data, recs_new_);
    set_tolerances(tol);
}

void Posterior::compile(const TabularMdp& mdp, const QIndex& idx,
                        const Dataset& data, std::vector<Rec>& out) {
    out.reserve(data.size());
    for (const Transition& t : data.records()) {
        if (t.a < 0 || t.a >= mdp.n_actions(t.s)) {
            throw ConfigError("dataset record with inadmissible action");
        }
        if (mdp.is_goal(t.s)) continue;  // residual identically 0 = reward
        Rec rec;
        rec.q_idx = idx(t.s, t.a);
        rec.r = t.r;
        rec.succ_begin = static_cast<int>(succ_pool_.size());
        for (const auto& [s2, p] : mdp.action(t.s, t.a).successors) {
            if (mdp.is_goal(s2) || p <= 0.0) continue;
            succ_pool_.push_back({idx.state_offset(s2), mdp.n_actions(s2), p});
        }
        rec.succ_end = static_cast<int>(succ_pool_.size());
        out.push_back(rec);
    }
}

void Posterior::set_tolerances(ToleranceAssignment tol) {
    if (!tol.eps_old.is_unconstrained() && !tol.eps_new.is_unconstrained() &&
        tol.eps_old.get() > tol.eps_new.get() + 1e-12) {
        throw ConfigError("old-data tolerance must not exceed new-data "
                          "tolerance");
    }
    if (tol.eps_old.is_unconstrained() && !recs_old_.empty()) {
        throw ConfigError("old data requires a finite tolerance");
    }
    tol_ = tol;
}

double Posterior::effective_eps(const Tolerance& nominal) const {
    return noise_sd_ ? *noise_sd_ : nominal.get();
}

double Posterior::residual(const Rec& rec, const double* theta) const {
    double expected_best = 0.0;
    for (int j = rec.succ_begin; j < rec.succ_end; ++j) {
        const Succ& sc = succ_pool_[j];
        double best = theta[sc.offset];
        for (int a = 1; a < sc.n; ++a) {
            best = std::max(best, theta[sc.offset + a]);
        }
        expected_best += sc.prob * best;
    }
    return theta[rec.q_idx] - expected_best;
}

double Posterior::partition_terms(const std::vector<Rec>& recs, double eps,
                                  const double* theta, double* grad) const {
    const double inv_e2 = 1.0 / (eps * eps);
    double quad = 0.0;
    for (const Rec& rec : recs) {
        const double err = residual(rec, theta) - rec.r;
        quad += err * err;
        if (grad != nullptr) {
            const double e = err * inv_e2;
            grad[rec.q_idx] -= e;
            for (int j = rec.succ_begin; j < rec.succ_end; ++j) {
                const Succ& sc = succ_pool_[j];
                int amax = 0;
                double best = theta[sc.offset];
                for (int a = 1; a < sc.n; ++a) {
                    if (theta[sc.offset + a] > best) {
                        best = theta[sc.offset + a];
                        amax = a;
                    }
                }
                grad[sc.offset + amax] += e * sc.prob;
            }
        }
    }
    return -0.5 * quad * inv_e2 -
           static_cast<double>(recs.size()) * (std::log(eps) + kHalfLog2Pi);
}

double Posterior::log_prior(const double* theta) const {
    const double inv_s2 = 1.0 / (prior_.sigma * prior_.sigma);
    double quad = 0.0;
    for (int k = 0; k < d_theta_; ++k) {
        const double c = theta[k] - (prior_.mean.empty() ? 0.0 : prior_.mean[k]);
        quad += c * c;
    }
    return -0.5 * quad * inv_s2 -
           d_theta_ * (std::log(prior_.sigma) + kHalfLog2Pi);
}

double Posterior::log_likelihood(const double* theta) const {
    double total = 0.0;
    if (!recs_old_.empty() && !tol_.eps_old.is_unconstrained()) {
        total += partition_terms(recs_old_, effective_eps(tol_.eps_old), theta,
                                 nullptr);
    }
    if (!recs_new_.empty() && !tol_.eps_new.is_unconstrained()) {
        total += partition_terms(recs_new_, effective_eps(tol_.eps_new), theta,
                                 nullptr);
    }
    return total;
}

double Posterior::value(const double* theta) const {
    return log_prior(theta) + log_likelihood(theta);
}

double Posterior::value_and_grad(const double* theta, double* grad) const {
    const double inv_s2 = 1.0 / (prior_.sigma * prior_.sigma);
    for (int k = 0; k < d_theta_; ++k) {
        const double c = theta[k] - (prior_.mean.empty() ? 0.0 : prior_.mean[k]);
        grad[k] = -c * inv_s2;
    }
    double total = log_prior(theta);
    if (!recs_old_.empty() && !tol_.eps_old.is_unconstrained()) {
        total += partition_terms(recs_old_, effective_eps(tol_.eps_old), theta,
                                 grad);
    }
    if (!recs_new_.empty() && !tol_.eps_new.is_unconstrained()) {
        total += partition_terms(recs_new_, effective_eps(tol_.eps_new), theta,
                                 grad);
    }
    return total;
}

Posterior::ResidualSums Posterior::residual_sums(const double* theta) const {
    ResidualSums out;
    for (const Rec& rec : recs_old_) {
        const double err = residual(rec, theta) - rec.r;
        out.old_part += err * err;
    }
    for (const Rec& rec : recs_new_) {
        const double err = residual(rec, theta) - rec.r;
        out.new_part += err * err;
    }
    return out;
}

double empirical_bellman_error(const std::vector<double>& weights,
                               const std::vector<double>& thetas, int d,
                               const TabularMdp& mdp, const QIndex& idx,
                               const Dataset& data) {
    double total = 0.0;
    for (std::size_t n = 0; n < weights.size(); ++n) {
        const double* theta = thetas.data() + n * static_cast<std::size_t>(d);
        double sum = 0.0;
        for (const Transition& t : data.records()) {
            const double err = bellman_residual(mdp, idx, theta, t.s, t.a) - t.r;
            sum += err * err;
        }
        total += weights[n] * sum;
    }
    return total;
}

} // namespace babc
