// This file is part of bellman-abc, a library and command-line tool for
// Bayesian inference of optimal action values in goal-directed MDPs.
//
// Copyright (c) 2026 the bellman-abc authors
// SPDX-License-Identifier: MIT

#pragma once

#include <stdexcept>
#include <string>

namespace babc {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration, arguments, or input files.  CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure (non-convergence, ill-conditioning, refused problem
/// sizes).  CLI exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Particle-system degeneracy that the sampler could not recover from
/// (all weights vanished, stage schedule livelocked).  CLI exit code 4.
class DegeneracyError : public Error {
public:
    using Error::Error;
};

} // namespace babc
