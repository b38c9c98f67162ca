// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <functional>
#include <utility>

namespace babc {

/**
 * An unnormalized log-density with gradient, the interface between targets
 * and samplers.  Implementations must be pure: thread-safe for concurrent
 * const calls and deterministic in their arguments.
 */
class LogDensity {
public:
    virtual ~LogDensity() = default;

    /// Parameter dimension.
    virtual int dim() const = 0;

    /// log density at theta (up to an additive constant).
    virtual double value(const double* theta) const = 0;

    /// Writes the gradient into grad[0..dim) and returns the value.
    virtual double value_and_grad(const double* theta, double* grad) const = 0;
};

/// Adapter wrapping plain callables as a LogDensity (tests, toy targets).
class FunctionDensity final : public LogDensity {
public:
    using ValueFn = std::function<double(const double*)>;
    using GradFn = std::function<double(const double*, double*)>;

    FunctionDensity(int dim, ValueFn value, GradFn value_and_grad)
        : dim_(dim),
          value_(std::move(value)),
          value_and_grad_(std::move(value_and_grad)) {}

    int dim() const override { return dim_; }
    double value(const double* theta) const override { return value_(theta); }
    double value_and_grad(const double* theta, double* grad) const override {
        return value_and_grad_(theta, grad);
    }

private:
    int dim_;
    ValueFn value_;
    GradFn value_and_grad_;
};

} // namespace babc
