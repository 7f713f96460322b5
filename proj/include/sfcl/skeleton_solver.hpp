// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic controlled equations. The control enters as the drift
// h(u) l(t), evaluated at the left endpoint of each step.
#pragma once

#include <span>
#include <vector>

#include "sfcl/control.hpp"
#include "sfcl/errors.hpp"
#include "sfcl/model.hpp"
#include "sfcl/spde_solver.hpp"

namespace sfcl {

inline void check_control(const Control& control, const ModelSpec& model, const SolverConfig& config) {
    if (control.truncation() != model.noise.truncation) {
        throw ConfigError("control truncation " + std::to_string(control.truncation()) +
                          " does not match noise truncation " + std::to_string(model.noise.truncation));
    }
    if (control.horizon() < config.t_end * (1.0 - 1e-12)) {
        throw ConfigError("control horizon " + std::to_string(control.horizon()) +
                          " is shorter than t_end " + std::to_string(config.t_end));
    }
}

/// Drift h(u) l(t) for a piecewise-constant control, using the stepper's tabulated noise basis.
/// The control row is looked up at the step midpoint so that breakpoints on the
/// time grid are not misassigned by rounding.
inline DriftFn control_drift(const Stepper& stepper, const Control& control) {
    const NoiseBasis* basis = &stepper.noise_basis();
    const double half = 0.5 * stepper.config().dt;
    return [basis, &control, half](double t, std::size_t, std::span<const double> u, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        basis->accumulate(u, control.value_at(t + half), 1.0, out);
    };
}

/// Controlled SPDE: du + div F(u) dt + (-Delta)^theta Phi(u) dt = h(u) l dt + sqrt(eps) h(u) dW.
/// Reduces to solve_skeleton for eps = 0 and to solve() for l = 0.
inline Trajectory solve_controlled_spde(const SpectralField& u0, const ModelSpec& model,
                                        const Control& control, const SolverConfig& config,
                                        WienerPath* path) {
    config.validate();
    check_control(control, model, config);
    check_stable(model, u0.grid(), config);
    if (config.eps > 0.0 && path == nullptr) throw ConfigError("controlled SPDE with eps > 0 needs a Wiener path");
    Stepper stepper(model, u0.grid(), config);
    const DriftFn drift = control_drift(stepper, control);
    Trajectory traj;
    traj.config_hash = config_hash(model, u0.grid(), config);
    if (path != nullptr) {
        traj.seed = path->master_seed();
        traj.stream = path->stream_index();
    }
    std::vector<double> u(u0.data());
    integrate(stepper, u, config.noise_scale() > 0.0 ? path : nullptr, &drift,
              [&](std::size_t, double t, std::span<const double> v) {
                  traj.times.push_back(t);
                  traj.snapshots.emplace_back(u0.grid(), std::vector<double>(v.begin(), v.end()));
              });
    return traj;
}

/// Skeleton equation du + div F(u) dt + (-Delta)^theta Phi(u) dt = h(u) l(t) dt (+ eta Delta u).
inline Trajectory solve_skeleton(const SpectralField& u0, const ModelSpec& model, const Control& control,
                                 const SolverConfig& config) {
    if (config.eps != 0.0) throw ConfigError("skeleton equation requires eps = 0 (noise off)");
    return solve_controlled_spde(u0, model, control, config, nullptr);
}

/// Linear skeleton at u_hat = 1:
/// dz + div(F'(1) z) dt + (-Delta)^theta [Phi'(1) z] dt = h(1) l(t) dt, z(0) = 0.
/// The flux term uses the spectral scheme, which is exact for a linear flux on
/// the resolved modes.
inline Trajectory solve_mdp_skeleton(const Control& control, const ModelSpec& model, const GridSpec& grid,
                                     SolverConfig config) {
    config.flux_scheme = FluxScheme::spectral;
    config.eps = 0.0;
    return solve_skeleton(SpectralField::zero(grid), linearize_at(model, 1.0), control, config);
}

}  // namespace sfcl
