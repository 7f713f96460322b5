// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Exact per-mode solutions of the constant-coefficient equations linearized
// at u_hat = 1. Each Fourier mode k evolves as
//
//   dz_k = -mu_k z_k dt + sum_n h_{n,k} dxi_n,
//   mu_k = 2 pi i F'(1) k + Phi'(1) (2 pi |k|)^{2 theta} + eta 4 pi^2 |k|^2,
//
// where xi is either a Brownian motion (CLT limit) or int l (skeleton).
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "sfcl/control.hpp"
#include "sfcl/errors.hpp"
#include "sfcl/model.hpp"
#include "sfcl/torus_field.hpp"

namespace sfcl {

struct ModeParams {
    WaveVector k{0, 0};
    std::size_t index = 0;  ///< flat FFT-ordered index on the grid
    Complex mu;
    std::vector<Complex> noise_weights;  ///< Fourier coefficient of h_n(., 1) at k, n = 1..K

    double weight_norm_sq() const {
        double s = 0.0;
        for (const auto& w : noise_weights) s += std::norm(w);
        return s;
    }
};

/// Mode parameters for every resolvable wavenumber of the grid.
/// Advection is dropped on a Nyquist component, matching the spectral derivative.
inline std::vector<ModeParams> mode_params(const ModelSpec& model, const GridSpec& grid, double eta = 0.0,
                                           double gamma = 0.0) {
    const double c = model.flux.deriv(1.0);
    const double a = model.diffusion.deriv(1.0);
    const double theta = model.diffusion.theta;
    const int K = model.noise.truncation;
    const int nn = grid.points_per_axis();
    FourierTransform fft(grid);
    std::vector<Spectrum> weights(K);
    std::vector<double> column(grid.size());
    for (int n = 1; n <= K; ++n) {
        for (std::size_t j = 0; j < grid.size(); ++j) column[j] = model.noise(n, grid.node(j), 1.0);
        fft.forward(column, weights[n - 1]);
    }
    // Transform round-off on unforced modes is flushed to exact zeros so that
    // reachability is decided structurally.
    double wmax = 0.0;
    for (const auto& w : weights)
        for (const auto& c : w) wmax = std::max(wmax, std::abs(c));
    for (auto& w : weights)
        for (auto& c : w) {
            if (std::abs(c) <= 1e-13 * wmax) c = Complex(0.0, 0.0);
        }
    std::vector<ModeParams> modes(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto& m = modes[i];
        m.index = i;
        m.k = grid.wavevector(i);
        const double ksq = grid.wavenumber_sq(i);
        double adv = 0.0;
        for (int axis = 0; axis < grid.dim(); ++axis) {
            if (m.k[axis] != -nn / 2) adv += model.flux.direction[axis] * m.k[axis];
        }
        const double lap = laplacian_symbol(ksq);
        m.mu = Complex(a * fractional_symbol(ksq, theta) + eta * lap + gamma * lap * lap, kTwoPi * c * adv);
        m.noise_weights.resize(K);
        for (int n = 0; n < K; ++n) m.noise_weights[n] = weights[n][i];
    }
    return modes;
}

/// Constant data is a steady state of the deterministic equation.
inline SpectralField exact_constant_solution(const SpectralField& u0, const ModelSpec&, double t) {
    if (!(t >= 0.0)) throw ParameterError("time must be nonnegative");
    const double c = u0[0];
    for (double v : u0.values()) {
        if (v != c) throw UnsupportedInput("exact_constant_solution requires constant initial data");
    }
    return SpectralField::constant(u0.grid(), c);
}

/// (1 - exp(-z)) / z, with the series near zero.
inline Complex phi1(Complex z) {
    if (std::abs(z) < 0.05) {
        // sum_{n<12} (-z)^n / (n+1)!, Horner form
        Complex acc(1.0, 0.0);
        for (int n = 11; n >= 1; --n) acc = 1.0 - z * acc / static_cast<double>(n + 1);
        return acc;
    }
    return (1.0 - std::exp(-z)) / z;
}

/// int_0^t exp(-2 a s) ds, real a >= 0.
inline double decay_integral(double a, double t) {
    const double x = 2.0 * a * t;
    if (x < 1e-3) return t * phi1(Complex(x, 0.0)).real();
    return -std::expm1(-x) / (2.0 * a);
}

struct StarMoments {
    Complex mean;
    double variance = 0.0;  ///< E|z_k|^2 of the complex mode; real and imaginary parts carry half each
};

/// Moments of the additive-noise linear mode started from zero.
inline StarMoments star_moments(const ModeParams& mode, double t) {
    if (!(t >= 0.0)) throw ParameterError("star_moments: t must be nonnegative");
    return {Complex(0.0, 0.0), mode.weight_norm_sq() * decay_integral(mode.mu.real(), t)};
}

/// Spectrum of the linear skeleton z(t) driven by a piecewise-constant control (exact).
inline Spectrum duhamel_mdp_spectrum(const Control& control, const std::vector<ModeParams>& modes, double t) {
    if (control.horizon() < t * (1.0 - 1e-12)) throw ConfigError("control horizon shorter than requested time");
    const auto bp = control.breakpoints();
    Spectrum out(modes.size(), Complex(0.0, 0.0));
    for (std::size_t m = 0; m < modes.size(); ++m) {
        const auto& mode = modes[m];
        if (mode.weight_norm_sq() == 0.0) continue;
        Complex acc(0.0, 0.0);
        for (std::size_t i = 0; i < control.intervals(); ++i) {
            const double a = bp[i];
            if (a >= t) break;
            const double b = std::min(bp[i + 1], t);
            // int_a^b exp(-mu (t - s)) ds
            const Complex kernel = std::exp(-mode.mu * (t - b)) * (b - a) * phi1(mode.mu * (b - a));
            Complex forcing(0.0, 0.0);
            const auto row = control.row(i);
            for (std::size_t n = 0; n < row.size(); ++n) forcing += mode.noise_weights[n] * row[n];
            acc += kernel * forcing;
        }
        out[mode.index] = acc;
    }
    return out;
}

inline SpectralField duhamel_mdp_skeleton(const Control& control, const ModelSpec& model, const GridSpec& grid,
                                          double t, double eta = 0.0, double gamma = 0.0) {
    if (control.truncation() != model.noise.truncation) throw ConfigError("control truncation != K");
    return SpectralField::from_spectrum(grid, duhamel_mdp_spectrum(control, mode_params(model, grid, eta, gamma), t));
}

/// Linear limit process u* driven by the same increments as a coupled
/// simulation. Per step: z <- exp(-mu dt) z + phi(mu, dt) sum_n h_{n,k} dbeta_n,
/// with phi chosen so each step adds exactly the one-step OU variance.
class CoupledStarOracle {
public:
    CoupledStarOracle(const std::vector<ModeParams>& modes, const GridSpec& grid, double dt)
        : grid_(grid), fft_(grid), state_(grid.size(), Complex(0.0, 0.0)) {
        for (const auto& m : modes) {
            if (m.weight_norm_sq() == 0.0) continue;
            Active a;
            a.index = m.index;
            a.decay = std::exp(-m.mu * dt);
            const double re = m.mu.real();
            const double gain = std::sqrt(decay_integral(re, dt) / dt);
            a.gain = gain * std::exp(Complex(0.0, -0.5 * m.mu.imag() * dt));
            a.weights = m.noise_weights;
            active_.push_back(std::move(a));
        }
    }

    void step(std::span<const double> increments) {
        for (auto& a : active_) {
            Complex f(0.0, 0.0);
            for (std::size_t n = 0; n < increments.size(); ++n) f += a.weights[n] * increments[n];
            state_[a.index] = a.decay * state_[a.index] + a.gain * f;
        }
    }

    const Spectrum& spectrum() const { return state_; }

    void field(std::span<double> out) { fft_.inverse(state_, out); }

private:
    struct Active {
        std::size_t index = 0;
        Complex decay, gain;
        std::vector<Complex> weights;
    };
    GridSpec grid_;
    FourierTransform fft_;
    Spectrum state_;
    std::vector<Active> active_;
};

}  // namespace sfcl
