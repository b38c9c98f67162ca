// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "babc/mdp.hpp"
#include "babc/rng.hpp"

namespace babc {

/// One strict linear constraint a . theta > b.
struct HalfSpace {
    std::vector<double> a;
    double b = 0.0;
};

/// Conjunction of strict constraints; an empty event is the whole space.
using Event = std::vector<HalfSpace>;

/// The event {theta_i > theta_j} over a d-dimensional parameter.
Event greater_event(int i, int j, int d);

/**
 * One piece of the exact posterior: the dataset's likelihood is Gaussian
 * in theta once an optimal action ell(s') is fixed for every non-goal
 * successor state, so the posterior restricted to the region where those
 * choices really are the argmax (the dominance constraints) is a
 * truncated Gaussian with the quantities below.
 */
struct Assignment {
    std::vector<int> choice;  ///< chosen action per partition successor
    /// winner/loser parameter index per dominance constraint
    std::vector<std::pair<int, int>> dominance;
    Eigen::MatrixXd b;      ///< n x d residual coefficients
    Eigen::MatrixXd gamma;  ///< n x n reward precision
    Eigen::VectorXd mu;     ///< conditional mean given the rewards
    Eigen::MatrixXd cov;    ///< conditional covariance
    double log_weight = 0.0;  ///< log reward density under this piece
};

/// The full piecewise-Gaussian decomposition of the exact posterior.
struct AssignmentPartition {
    std::vector<int> successors;  ///< non-goal successor states, ascending
    std::vector<Assignment> assignments;
    Eigen::VectorXd r;  ///< observed rewards in record order
    int n = 0;
    int d = 0;
    double prior_sigma = 1.0;
    double eps = 0.1;
};

/**
 * Enumerates every action assignment over the non-goal successor states of
 * the dataset and computes each piece's Gaussian quantities:
 * gamma = (sigma^2 B B^T + eps^2 I)^{-1}, mu = sigma^2 B^T gamma r,
 * cov = sigma^2 I - sigma^4 B^T gamma B.  Refuses (numerical error) when
 * the number of assignments exceeds `cap`.
 */
AssignmentPartition enumerate_assignments(const TabularMdp& mdp,
                                          const QIndex& idx,
                                          const Dataset& data,
                                          double prior_sigma, double eps,
                                          std::size_t cap = 1000000);

struct EventEstimate {
    double probability = 0.0;
    double std_error = 0.0;
};

/**
 * Monte-Carlo estimate of the posterior probability of `event`: for each
 * piece, n_mc draws from its Gaussian estimate the masses of the dominance
 * region and of its intersection with the event; the reward-density
 * weighted ratio estimates the probability, with a delta-method standard
 * error.  The dominance ties excluded by strict comparison have measure
 * zero.
 */
EventEstimate event_probability(const AssignmentPartition& part,
                                const Event& event, int n_mc, Rng& rng);

/// Convenience: enumerate, then estimate.
EventEstimate event_probability(const TabularMdp& mdp, const QIndex& idx,
                                const Dataset& data, double prior_sigma,
                                double eps, const Event& event, int n_mc,
                                Rng& rng, std::size_t cap = 1000000);

/**
 * Closed-form posterior probability of preferring the first action at the
 * initial state of the five-state chain after observing all four rewards:
 * Phi((k d - c) / (sigma sqrt(2 k (k+2) (k^2+3k+1)))) with k = eps^2 /
 * sigma^2, d = r1 - r2, c = r2 + r4 - r1 - r3.
 */
double five_state_choice_probability(double r1, double r2, double r3,
                                     double r4, double sigma, double eps);

} // namespace babc
