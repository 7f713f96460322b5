// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Exception types shared by every module. The CLI maps them onto exit codes.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sfcl {

/// Invalid or inconsistent configuration (missing key, bad grid, short control horizon, ...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numeric parameter outside its admissible range (theta, t, a-exponent, ...).
class ParameterError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Array length or grid mismatch.
class ShapeError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Input the operation does not support (e.g. non-constant data for a constant-data oracle).
class UnsupportedInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite state produced during time integration.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t step, double time)
        : std::runtime_error("numerical divergence at step " + std::to_string(step) + " (t = " +
                             std::to_string(time) + ")"),
          step_(step),
          time_(time) {}

    std::size_t step() const noexcept { return step_; }
    double time() const noexcept { return time_; }

private:
    std::size_t step_;
    double time_;
};

/// A control whose terminal state misses the target.
class InfeasibleControl : public std::domain_error {
public:
    explicit InfeasibleControl(double residual)
        : std::domain_error("control misses the target: residual " + std::to_string(residual)),
          residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace sfcl
