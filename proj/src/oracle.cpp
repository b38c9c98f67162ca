// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#include "babc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "babc/errors.hpp"
#include "babc/kernels.hpp"

namespace babc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

/// A factor A with A A^T = cov, robust to semidefinite covariances:
/// Cholesky with a small jitter first, spectral square root on failure.
Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
    const int d = static_cast<int>(cov.rows());
    Eigen::MatrixXd jittered = cov;
    jittered.diagonal().array() += 1e-12;
    Eigen::LLT<Eigen::MatrixXd> llt(jittered);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success)
        throw NumericalError("covariance factorization failed");
    Eigen::VectorXd lam = es.eigenvalues();
    for (int j = 0; j < d; ++j) lam[j] = std::sqrt(std::max(lam[j], 0.0));
    return es.eigenvectors() * lam.asDiagonal();
}

} // namespace

Event greater_event(int i, int j, int d) {
    if (i < 0 || j < 0 || i >= d || j >= d || i == j)
        throw ConfigError("invalid parameter indices for a comparison event");
    HalfSpace h;
    h.a.assign(d, 0.0);
    h.a[i] = 1.0;
    h.a[j] = -1.0;
    h.b = 0.0;
    return {h};
}

AssignmentPartition enumerate_assignments(const TabularMdp& mdp,
                                          const QIndex& idx,
                                          const Dataset& data,
                                          double prior_sigma, double eps,
                                          std::size_t cap) {
    if (!(prior_sigma > 0.0) || !std::isfinite(prior_sigma))
        throw ConfigError("prior sigma must be positive and finite");
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw ConfigError("bandwidth must be positive and finite");

    AssignmentPartition part;
    part.n = static_cast<int>(data.size());
    part.d = idx.d_theta();
    part.prior_sigma = prior_sigma;
    part.eps = eps;
    part.r.resize(part.n);

    // Non-goal successor states reachable from the observed pairs.
    std::vector<char> seen(static_cast<std::size_t>(mdp.n_states()), 0);
    const auto& records = data.records();
    for (int i = 0; i < part.n; ++i) {
        const Transition& t = records[i];
        part.r[i] = t.r;
        if (mdp.is_goal(t.s))
            throw ConfigError("dataset contains a goal-state record");
        for (const auto& [sp, p] : mdp.action(t.s, t.a).successors)
            if (p > 0.0 && !mdp.is_goal(sp)) seen[sp] = 1;
    }
    for (int s = 0; s < mdp.n_states(); ++s)
        if (seen[s]) part.successors.push_back(s);

    const int ns = static_cast<int>(part.successors.size());
    std::size_t total = 1;
    for (int s : part.successors) {
        const std::size_t k = static_cast<std::size_t>(mdp.n_actions(s));
        if (total > cap / std::max<std::size_t>(k, 1) + 1) {
            total = cap + 1;
            break;
        }
        total *= k;
    }
    if (total > cap)
        throw NumericalError(
            "assignment enumeration exceeds the cap of " + std::to_string(cap) +
            " combinations; the exact posterior is not tractable here");

    const double s2 = prior_sigma * prior_sigma;
    const Eigen::MatrixXd eye_d = Eigen::MatrixXd::Identity(part.d, part.d);

    std::vector<int> odo(ns, 0);
    for (std::size_t count = 0; count < total; ++count) {
        Assignment asg;
        asg.choice = odo;

        // Dominance region: the chosen action attains the successor max.
        for (int k = 0; k < ns; ++k) {
            const int s = part.successors[k];
            const int winner = idx(s, odo[k]);
            for (int a = 0; a < mdp.n_actions(s); ++a)
                if (a != odo[k]) asg.dominance.emplace_back(winner, idx(s, a));
        }

        asg.b = Eigen::MatrixXd::Zero(part.n, part.d);
        for (int i = 0; i < part.n; ++i) {
            const Transition& t = records[i];
            asg.b(i, idx(t.s, t.a)) += 1.0;
            for (const auto& [sp, p] : mdp.action(t.s, t.a).successors) {
                if (!(p > 0.0) || mdp.is_goal(sp)) continue;
                const int k = static_cast<int>(
                    std::lower_bound(part.successors.begin(),
                                     part.successors.end(), sp) -
                    part.successors.begin());
                asg.b(i, idx(sp, odo[k])) -= p;
            }
        }

        Eigen::MatrixXd cov_r = s2 * (asg.b * asg.b.transpose());
        cov_r.diagonal().array() += eps * eps;
        Eigen::LLT<Eigen::MatrixXd> llt(cov_r);
        if (llt.info() != Eigen::Success) {
            cov_r.diagonal().array() += 1e-12;
            llt.compute(cov_r);
            if (llt.info() != Eigen::Success)
                throw NumericalError("reward covariance is not invertible");
        }
        asg.gamma = llt.solve(Eigen::MatrixXd::Identity(part.n, part.n));
        double logdet = 0.0;
        for (int i = 0; i < part.n; ++i)
            logdet += 2.0 * std::log(llt.matrixL()(i, i));
        const double quad = part.r.transpose() * asg.gamma * part.r;
        asg.log_weight = -0.5 * (part.n * kLog2Pi + logdet + quad);
        asg.mu = s2 * asg.b.transpose() * (asg.gamma * part.r);
        Eigen::MatrixXd cov =
            s2 * eye_d - (s2 * s2) * asg.b.transpose() * asg.gamma * asg.b;
        asg.cov = 0.5 * (cov + cov.transpose());

        part.assignments.push_back(std::move(asg));

        for (int k = ns - 1; k >= 0; --k) {
            if (++odo[k] < mdp.n_actions(part.successors[k])) break;
            odo[k] = 0;
        }
    }
    return part;
}

EventEstimate event_probability(const AssignmentPartition& part,
                                const Event& event, int n_mc, Rng& rng) {
    if (n_mc < 1000)
        throw ConfigError("the Monte-Carlo sample size must be at least 1000");
    const int d = part.d;
    for (const HalfSpace& h : event)
        if (static_cast<int>(h.a.size()) != d)
            throw ConfigError("event constraint length does not match the "
                              "parameter dimension");

    double max_lw = -std::numeric_limits<double>::infinity();
    for (const Assignment& asg : part.assignments)
        max_lw = std::max(max_lw, asg.log_weight);
    if (!std::isfinite(max_lw))
        throw NumericalError("all assignment weights vanished");

    const std::size_t nn = static_cast<std::size_t>(n_mc);
    std::vector<double> cols(static_cast<std::size_t>(d) * nn);
    std::vector<double> lhs(nn), zeros(nn, 0.0), u(d);
    std::vector<std::uint8_t> mask_dom(nn), mask_star(nn);

    // Compensated sums over assignments.
    double num = 0.0, den = 0.0, var_num = 0.0, var_den = 0.0, cov_nd = 0.0;
    double c_num = 0.0, c_den = 0.0;
    auto add = [](double& sum, double& comp, double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    };

    for (const Assignment& asg : part.assignments) {
        const Eigen::MatrixXd factor = covariance_factor(asg.cov);
        const int fcols = static_cast<int>(factor.cols());
        for (std::size_t t = 0; t < nn; ++t) {
            for (int j = 0; j < fcols; ++j) u[j] = rng.normal();
            for (int j = 0; j < d; ++j) {
                double z = asg.mu[j];
                for (int k = 0; k < fcols; ++k) z += factor(j, k) * u[k];
                cols[static_cast<std::size_t>(j) * nn + t] = z;
            }
        }
        std::fill(mask_dom.begin(), mask_dom.end(), std::uint8_t{1});
        for (const auto& [winner, loser] : asg.dominance)
            kernels().and_gt(cols.data() + static_cast<std::size_t>(winner) * nn,
                             cols.data() + static_cast<std::size_t>(loser) * nn,
                             mask_dom.data(), nn);
        mask_star = mask_dom;
        for (const HalfSpace& h : event) {
            std::fill(lhs.begin(), lhs.end(), -h.b);
            for (int j = 0; j < d; ++j)
                if (h.a[j] != 0.0)
                    kernels().axpy(h.a[j],
                                   cols.data() + static_cast<std::size_t>(j) * nn,
                                   lhs.data(), nn);
            kernels().and_gt(lhs.data(), zeros.data(), mask_star.data(), nn);
        }
        const double q = static_cast<double>(
                             kernels().count_nonzero(mask_dom.data(), nn)) /
                         n_mc;
        const double p = static_cast<double>(
                             kernels().count_nonzero(mask_star.data(), nn)) /
                         n_mc;
        const double w = std::exp(asg.log_weight - max_lw);
        add(num, c_num, w * p);
        add(den, c_den, w * q);
        var_num += w * w * p * (1.0 - p) / n_mc;
        var_den += w * w * q * (1.0 - q) / n_mc;
        cov_nd += w * w * (p - p * q) / n_mc;
    }

    if (!(den > 0.0))
        throw NumericalError(
            "no Monte-Carlo mass landed in any dominance region");
    EventEstimate est;
    est.probability = num / den;
    const double v = var_num - 2.0 * est.probability * cov_nd +
                     est.probability * est.probability * var_den;
    est.std_error = std::sqrt(std::max(v, 0.0)) / den;
    return est;
}

EventEstimate event_probability(const TabularMdp& mdp, const QIndex& idx,
                                const Dataset& data, double prior_sigma,
                                double eps, const Event& event, int n_mc,
                                Rng& rng, std::size_t cap) {
    const AssignmentPartition part =
        enumerate_assignments(mdp, idx, data, prior_sigma, eps, cap);
    return event_probability(part, event, n_mc, rng);
}

double five_state_choice_probability(double r1, double r2, double r3,
                                     double r4, double sigma, double eps) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw ConfigError("sigma must be positive and finite");
    if (!(eps > 0.0) || !std::isfinite(eps))
        throw ConfigError("bandwidth must be positive and finite");
    const double k = (eps * eps) / (sigma * sigma);
    const double d = r1 - r2;
    const double c = r2 + r4 - r1 - r3;
    const double rad = 2.0 * k * (k + 2.0) * (k * k + 3.0 * k + 1.0);
    const double denom = sigma * std::sqrt(rad);
    if (!(denom > 0.0)) {
        // Bandwidth underflow: the posterior concentrates on the residual
        // identities, leaving only the sign of c.
        if (c > 0.0) return 0.0;
        if (c < 0.0) return 1.0;
        return 0.5;
    }
    const double x = (k * d - c) / denom;
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

} // namespace babc
