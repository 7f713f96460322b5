// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// IMEX time integration of
//
//   du + div F(u) dt + (-Delta)^theta Phi(u) dt
//      = eta Delta u dt - gamma Delta^2 u dt + drift dt + sigma h(u) dW,
//
// with sigma = sqrt(eps) (optionally divided by Lambda(eps)). Flux divergence,
// the fractional term, drift and noise are explicit (Euler-Maruyama, left
// endpoint); the viscous and biharmonic terms are solved exactly in Fourier space.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sfcl/errors.hpp"
#include "sfcl/model.hpp"
#include "sfcl/torus_field.hpp"
#include "sfcl/wiener.hpp"

namespace sfcl {

enum class FluxScheme { rusanov, spectral };

inline std::string to_string(FluxScheme s) { return s == FluxScheme::rusanov ? "rusanov" : "spectral"; }

struct SolverConfig {
    double dt = 2e-4;
    double t_end = 0.5;
    double eta = 0.0;    ///< viscosity
    double gamma = 0.0;  ///< biharmonic regularization
    double eps = 0.0;    ///< noise enters as sqrt(eps)
    std::optional<double> lambda_eps;  ///< when set, noise is further multiplied by 1/Lambda(eps)
    FluxScheme flux_scheme = FluxScheme::rusanov;
    double cfl_safety = 0.5;
    int snapshot_intervals = 64;

    std::size_t steps() const {
        if (!(dt > 0.0)) throw ConfigError("solver dt must be positive");
        if (!(t_end > 0.0)) throw ConfigError("solver t_end must be positive");
        const double n = std::round(t_end / dt);
        if (n < 1 || std::abs(n * dt - t_end) > 1e-9 * t_end) {
            throw ConfigError("t_end must be an integer multiple of dt");
        }
        return static_cast<std::size_t>(n);
    }

    double noise_scale() const {
        if (eps <= 0.0) return 0.0;
        return std::sqrt(eps) / lambda_eps.value_or(1.0);
    }

    void validate() const {
        (void)steps();
        if (eta < 0.0 || gamma < 0.0 || eps < 0.0) throw ConfigError("eta, gamma, eps must be >= 0");
        if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw ConfigError("cfl_safety must lie in (0, 1]");
        if (lambda_eps && !(*lambda_eps > 0.0)) throw ConfigError("Lambda(eps) must be positive");
        if (snapshot_intervals < 1) throw ConfigError("snapshot_intervals must be >= 1");
    }
};

/// Largest admissible explicit step: safety * min(dx / L_F, dx^{2 theta} / ((4 pi^2)^theta L_Phi)).
/// Viscous and biharmonic terms are implicit and do not constrain dt.
inline double stable_dt(const ModelSpec& model, const GridSpec& grid, const SolverConfig& config) {
    const double dx = grid.cell_width();
    double speed = model.flux.lipschitz_bound;
    if (grid.dim() == 2) {
        speed *= std::abs(model.flux.direction[0]) + std::abs(model.flux.direction[1]);
    } else {
        speed *= std::abs(model.flux.direction[0]);
    }
    const double theta = model.diffusion.theta;
    const double lphi = model.diffusion.lipschitz_bound;
    double bound = INFINITY;
    if (speed > 0.0) bound = std::min(bound, dx / speed);
    if (lphi > 0.0) bound = std::min(bound, std::pow(dx, 2 * theta) / (std::pow(kFourPiSq, theta) * lphi));
    if (!std::isfinite(bound)) return config.t_end;
    return config.cfl_safety * bound;
}

/// Stable digest of the model/grid/solver parameters.
inline std::string config_hash(const ModelSpec& model, const GridSpec& grid, const SolverConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << model.flux.name << '|' << model.flux.lipschitz_bound << '|' << model.flux.direction[0] << ','
       << model.flux.direction[1] << '|' << model.diffusion.name << '|' << model.diffusion.theta << '|'
       << model.diffusion.lipschitz_bound << '|' << model.noise.name << '|' << model.noise.truncation
       << '|' << model.noise.decay_exponent << '|' << model.noise.a << '|' << model.noise.b << '|'
       << grid.dim() << 'x' << grid.points_per_axis() << '|' << c.dt << '|' << c.t_end << '|' << c.eta
       << '|' << c.gamma << '|' << c.eps << '|' << c.lambda_eps.value_or(0.0) << '|'
       << to_string(c.flux_scheme) << '|' << c.cfl_safety << '|' << c.snapshot_intervals;
    const auto s = os.str();
    Fnv1a h;
    h.update(s.data(), s.size());
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << h.digest();
    return hex.str();
}

/// Writes the drift field at (t, step) for state u into `out` (overwriting it).
using DriftFn = std::function<void(double t, std::size_t step, std::span<const double> u, std::span<double> out)>;

/// Step indices at which snapshots are recorded: round(i * steps / intervals), i = 0..intervals.
inline std::vector<std::size_t> snapshot_steps(std::size_t steps, int intervals) {
    std::vector<std::size_t> out;
    for (int i = 0; i <= intervals; ++i) {
        const auto s = static_cast<std::size_t>(
            std::llround(static_cast<double>(i) * static_cast<double>(steps) / intervals));
        if (out.empty() || s != out.back()) out.push_back(s);
    }
    return out;
}

/// Single-trajectory integrator with preallocated workspace. One instance per task.
class Stepper {
public:
    Stepper(const ModelSpec& model, const GridSpec& grid, const SolverConfig& config)
        : model_(model),
          grid_(grid),
          config_(config),
          fft_(grid),
          noise_(model.noise, grid),
          n_(grid.size()) {
        config_.validate();
        if (model_.diffusion.theta <= 0.0 || model_.diffusion.theta > 1.0) check_theta(model_.diffusion.theta);
        const double dt = config_.dt;
        frac_symbol_.resize(n_);
        implicit_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const double ksq = grid.wavenumber_sq(i);
            const double lap = laplacian_symbol(ksq);
            frac_symbol_[i] = fractional_symbol(ksq, model_.diffusion.theta);
            implicit_[i] = 1.0 + dt * config_.eta * lap + dt * config_.gamma * lap * lap;
        }
        const int nn = grid.points_per_axis();
        for (int axis = 0; axis < grid.dim(); ++axis) {
            auto& d = deriv_symbol_[axis];
            auto& m = dealias_[axis];
            d.resize(n_);
            m.resize(n_);
            for (std::size_t i = 0; i < n_; ++i) {
                const int k = grid.wavevector(i)[axis];
                d[i] = (k == -nn / 2) ? Complex(0.0, 0.0) : Complex(0.0, kTwoPi * k);
                m[i] = 3 * std::abs(k) <= nn ? 1.0 : 0.0;
            }
        }
        for (std::size_t i = 0; i < n_; ++i) {
            double keep = 1.0;
            for (int axis = 0; axis < grid.dim(); ++axis) keep *= dealias_[axis][i];
            dealias_mask_.push_back(keep);
        }
        fu_.resize(n_);
        dfu_.resize(n_);
        face_.resize(n_);
        work_.resize(n_);
        drift_.resize(n_);
        phi_.resize(n_);
        frac_active_ = !model_.diffusion.is_zero();
        implicit_active_ = config_.eta > 0.0 || config_.gamma > 0.0;
    }

    const GridSpec& grid() const noexcept { return grid_; }
    const SolverConfig& config() const noexcept { return config_; }
    const ModelSpec& model() const noexcept { return model_; }
    const NoiseBasis& noise_basis() const noexcept { return noise_; }
    std::size_t steps() const { return config_.steps(); }

    /// out = div F(u).
    void flux_divergence(std::span<const double> u, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        if (config_.flux_scheme == FluxScheme::rusanov) {
            rusanov_divergence(u, out);
        } else {
            spectral_divergence(u, out);
        }
    }

    /// out = (-Delta)^theta Phi(u) via the Fourier multiplier.
    void fractional_term(std::span<const double> u, std::span<double> out) {
        for (std::size_t j = 0; j < n_; ++j) phi_[j] = model_.diffusion.eval(u[j]);
        fft_.forward(phi_, spec_a_);
        for (std::size_t i = 0; i < n_; ++i) spec_a_[i] *= frac_symbol_[i];
        fft_.inverse(spec_a_, out);
    }

    /// Advance u from t_n = n dt to t_{n+1}. `increments` may be empty when
    /// noise is off; `drift` may be null.
    void step(std::vector<double>& u, std::size_t n, std::span<const double> increments,
              const DriftFn* drift) {
        const double dt = config_.dt;
        const double t = static_cast<double>(n) * dt;
        flux_divergence(u, work_);
        if (drift != nullptr && *drift) {
            (*drift)(t, n, u, drift_);
            for (std::size_t j = 0; j < n_; ++j) work_[j] = drift_[j] - work_[j];
        } else {
            for (std::size_t j = 0; j < n_; ++j) work_[j] = -work_[j];
        }
        // work <- u + dt * (explicit rhs); phi holds Phi(u) before u is overwritten
        if (frac_active_) {
            for (std::size_t j = 0; j < n_; ++j) phi_[j] = model_.diffusion.eval(u[j]);
        }
        for (std::size_t j = 0; j < n_; ++j) work_[j] = u[j] + dt * work_[j];
        const double sigma = config_.noise_scale();
        if (sigma > 0.0 && !increments.empty()) noise_.accumulate(u, increments, sigma, work_);

        if (frac_active_ || implicit_active_) {
            fft_.forward(work_, spec_b_);
            if (frac_active_) {
                fft_.forward(phi_, spec_a_);
                for (std::size_t i = 0; i < n_; ++i) spec_b_[i] -= dt * frac_symbol_[i] * spec_a_[i];
            }
            if (implicit_active_) {
                for (std::size_t i = 0; i < n_; ++i) spec_b_[i] /= implicit_[i];
            }
            fft_.inverse(spec_b_, u);
        } else {
            std::copy(work_.begin(), work_.end(), u.begin());
        }
        for (double v : u) {
            if (!std::isfinite(v)) throw DivergenceError(n, t);
        }
    }

    // ------------------------------------------------------------------
    // Adjoint of one deterministic step with drift h(u) l_n (noise off).
    // ------------------------------------------------------------------

    /// Given lam_next = dJ/du_{n+1}, returns lam = dJ/du_n and adds dJ/dl_n to grad_row.
    /// The Rusanov dissipation coefficient max(|f'|) is differentiated where it is smooth.
    void adjoint_step(std::span<const double> u, std::span<const double> control_row,
                      std::span<const double> lam_next, std::span<double> lam,
                      std::span<double> grad_row) {
        const double dt = config_.dt;
        // w = P lam_next ; q = L_theta P lam_next (both symmetric multipliers)
        std::vector<double>& w = adj_w_;
        std::vector<double>& q = adj_q_;
        w.resize(n_);
        q.resize(n_);
        if (frac_active_ || implicit_active_) {
            fft_.forward(lam_next, spec_a_);
            if (implicit_active_) {
                for (std::size_t i = 0; i < n_; ++i) spec_a_[i] /= implicit_[i];
            }
            fft_.inverse(spec_a_, w);
            if (frac_active_) {
                for (std::size_t i = 0; i < n_; ++i) spec_a_[i] *= frac_symbol_[i];
                fft_.inverse(spec_a_, q);
            }
        } else {
            std::copy(lam_next.begin(), lam_next.end(), w.begin());
        }
        // flux Jacobian transpose
        flux_divergence_vjp(u, w, work_);
        // drift derivative in u
        noise_.derivative(u, control_row, drift_);
        for (std::size_t j = 0; j < n_; ++j) {
            double v = w[j] - dt * work_[j] + dt * drift_[j] * w[j];
            if (frac_active_) v -= dt * model_.diffusion.deriv(u[j]) * q[j];
            lam[j] = v;
        }
        const int K = noise_.truncation();
        for (int k = 1; k <= K; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n_; ++j) acc += noise_.value(k, j, u[j]) * w[j];
            grad_row[k - 1] += dt * acc;
        }
    }

    /// out = (d div F / du)^T w.
    void flux_divergence_vjp(std::span<const double> u, std::span<const double> w, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        const auto& F = model_.flux;
        for (std::size_t j = 0; j < n_; ++j) dfu_[j] = F.deriv(u[j]);
        if (config_.flux_scheme == FluxScheme::rusanov) {
            const double inv_dx = 1.0 / grid_.cell_width();
            for (int axis = 0; axis < grid_.dim(); ++axis) {
                const double dir = F.direction[axis];
                const double adir = std::abs(dir);
                for (std::size_t i = 0; i < n_; ++i) {
                    const std::size_t ip = plus(i, axis);
                    // face between i and ip; D_i gets +face/dx, D_ip gets -face/dx
                    const double g = (w[i] - w[ip]) * inv_dx;
                    const double ai = std::abs(dfu_[i]), aip = std::abs(dfu_[ip]);
                    const double a = adir * std::max(ai, aip);
                    const double jump = u[ip] - u[i];
                    double da_i = 0.0, da_ip = 0.0;
                    if (F.second_deriv) {
                        if (ai >= aip) da_i = adir * std::copysign(1.0, dfu_[i]) * F.second_deriv(u[i]);
                        else da_ip = adir * std::copysign(1.0, dfu_[ip]) * F.second_deriv(u[ip]);
                    }
                    out[i] += g * (0.5 * dir * dfu_[i] + 0.5 * a - 0.5 * da_i * jump);
                    out[ip] += g * (0.5 * dir * dfu_[ip] - 0.5 * a - 0.5 * da_ip * jump);
                }
            }
        } else {
            // D = sum_a d_a Pi (dir_a f(u)); D^T w = f'(u) * sum_a dir_a Pi(-d_a) w
            fft_.forward(w, spec_a_);
            spec_b_.assign(n_, Complex(0.0, 0.0));
            const bool linear = F.linear_speed.has_value();
            for (int axis = 0; axis < grid_.dim(); ++axis) {
                const double dir = F.direction[axis];
                for (std::size_t i = 0; i < n_; ++i) {
                    const double mask = linear ? 1.0 : dealias_mask_[i];
                    spec_b_[i] -= dir * mask * deriv_symbol_[axis][i] * spec_a_[i];
                }
            }
            fft_.inverse(spec_b_, face_);
            for (std::size_t j = 0; j < n_; ++j) out[j] = dfu_[j] * face_[j];
        }
    }

private:
    std::size_t plus(std::size_t i, int axis) const noexcept {
        const std::size_t nn = static_cast<std::size_t>(grid_.points_per_axis());
        if (grid_.dim() == 1 || axis == 1) {
            const std::size_t row = i - i % nn;
            return row + (i % nn + 1) % nn;
        }
        return (i + nn) % n_;
    }

    std::size_t minus(std::size_t i, int axis) const noexcept {
        const std::size_t nn = static_cast<std::size_t>(grid_.points_per_axis());
        if (grid_.dim() == 1 || axis == 1) {
            const std::size_t row = i - i % nn;
            return row + (i % nn + nn - 1) % nn;
        }
        return (i + n_ - nn) % n_;
    }

    // Local Lax-Friedrichs: F_{i+1/2} = (F(u_i) + F(u_{i+1}))/2 - a/2 (u_{i+1} - u_i),
    // a = max(|F'(u_i)|, |F'(u_{i+1})|).
    void rusanov_divergence(std::span<const double> u, std::span<double> out) {
        const auto& F = model_.flux;
        for (std::size_t j = 0; j < n_; ++j) {
            fu_[j] = F.eval(u[j]);
            dfu_[j] = std::abs(F.deriv(u[j]));
        }
        const double inv_dx = 1.0 / grid_.cell_width();
        for (int axis = 0; axis < grid_.dim(); ++axis) {
            const double dir = F.direction[axis];
            const double adir = std::abs(dir);
            for (std::size_t i = 0; i < n_; ++i) {
                const std::size_t ip = plus(i, axis);
                const double a = adir * std::max(dfu_[i], dfu_[ip]);
                face_[i] = 0.5 * dir * (fu_[i] + fu_[ip]) - 0.5 * a * (u[ip] - u[i]);
            }
            for (std::size_t i = 0; i < n_; ++i) out[i] += (face_[i] - face_[minus(i, axis)]) * inv_dx;
        }
    }

    // Pseudospectral derivative of F(u) with 2/3-rule dealiasing (skipped for linear flux).
    void spectral_divergence(std::span<const double> u, std::span<double> out) {
        const auto& F = model_.flux;
        for (std::size_t j = 0; j < n_; ++j) fu_[j] = F.eval(u[j]);
        fft_.forward(fu_, spec_a_);
        spec_b_.assign(n_, Complex(0.0, 0.0));
        const bool linear = F.linear_speed.has_value();
        for (int axis = 0; axis < grid_.dim(); ++axis) {
            const double dir = F.direction[axis];
            for (std::size_t i = 0; i < n_; ++i) {
                const double mask = linear ? 1.0 : dealias_mask_[i];
                spec_b_[i] += dir * mask * deriv_symbol_[axis][i] * spec_a_[i];
            }
        }
        fft_.inverse(spec_b_, out);
    }

    ModelSpec model_;
    GridSpec grid_;
    SolverConfig config_;
    FourierTransform fft_;
    NoiseBasis noise_;
    std::size_t n_;
    std::vector<double> frac_symbol_, implicit_;
    std::array<std::vector<Complex>, 2> deriv_symbol_;
    std::array<std::vector<double>, 2> dealias_;
    std::vector<double> dealias_mask_;
    std::vector<double> fu_, dfu_, face_, work_, drift_, phi_, adj_w_, adj_q_;
    Spectrum spec_a_, spec_b_;
    bool frac_active_ = true;
    bool implicit_active_ = false;
};

/// out = div F(u) for a single field (allocates a Stepper; use Stepper in loops).
inline SpectralField flux_divergence(const SpectralField& u, const FluxSpec& flux, FluxScheme scheme) {
    ModelSpec m{flux, DiffusionSpec::zero(0.5), NoiseSpec::additive(1)};
    SolverConfig c;
    c.dt = 1.0;
    c.t_end = 1.0;
    c.flux_scheme = scheme;
    Stepper s(m, u.grid(), c);
    std::vector<double> out(u.size());
    s.flux_divergence(u.values(), out);
    return {u.grid(), std::move(out)};
}

struct Trajectory {
    std::vector<double> times;
    std::vector<SpectralField> snapshots;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    const SpectralField& final() const { return snapshots.back(); }

    /// Left-rectangle L^1([0,T]; L^1) norm of (this - other) over snapshot times.
    double e1_distance(const Trajectory& other) const {
        if (times != other.times) throw ShapeError("trajectories have different snapshot times");
        std::vector<double> l1(times.size());
        for (std::size_t i = 0; i < times.size(); ++i) {
            l1[i] = l1_distance(snapshots[i].values(), other.snapshots[i].values());
        }
        return e1_rectangle(times, l1);
    }

    double e1_norm() const {
        std::vector<double> l1(times.size());
        for (std::size_t i = 0; i < times.size(); ++i) l1[i] = l1_norm(snapshots[i].values());
        return e1_rectangle(times, l1);
    }

    /// Rows "time,node,value".
    void write_csv(std::ostream& os) const {
        os.precision(17);
        os << "time,node,value\n";
        for (std::size_t i = 0; i < times.size(); ++i) {
            for (std::size_t j = 0; j < snapshots[i].size(); ++j) {
                os << times[i] << ',' << j << ',' << snapshots[i][j] << '\n';
            }
        }
    }

    /// uint64 count, then per snapshot: float64 time followed by a torus_field snapshot record.
    void write_binary(std::ostream& os) const {
        detail::put_le<std::uint64_t>(os, times.size());
        for (std::size_t i = 0; i < times.size(); ++i) {
            detail::put_le<double>(os, times[i]);
            write_snapshot(os, snapshots[i]);
        }
    }

    static Trajectory read_binary(std::istream& is) {
        Trajectory t;
        const auto count = detail::get_le<std::uint64_t>(is);
        for (std::uint64_t i = 0; i < count; ++i) {
            t.times.push_back(detail::get_le<double>(is));
            t.snapshots.push_back(read_snapshot(is));
        }
        return t;
    }
};

inline void check_stable(const ModelSpec& model, const GridSpec& grid, const SolverConfig& config) {
    const double bound = stable_dt(model, grid, config);
    if (config.dt > bound * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "dt = " << config.dt << " exceeds the stability bound " << bound;
        throw ConfigError(os.str());
    }
}

/// Run a Stepper from u0 to t_end, calling observer(step, t, u) at snapshot steps.
/// `path` may be null when noise is off.
template <class Observer>
void integrate(Stepper& stepper, std::vector<double>& u, WienerPath* path, const DriftFn* drift,
               Observer&& observer) {
    const auto& cfg = stepper.config();
    const std::size_t steps = cfg.steps();
    const auto marks = snapshot_steps(steps, cfg.snapshot_intervals);
    const bool noisy = cfg.noise_scale() > 0.0;
    if (noisy && path == nullptr) throw ConfigError("noise is on (eps > 0) but no Wiener path was given");
    std::vector<double> incr(noisy ? static_cast<std::size_t>(path->truncation()) : 0);
    if (noisy && path->truncation() != stepper.noise_basis().truncation()) {
        throw ShapeError("Wiener path truncation does not match noise truncation");
    }
    std::size_t mark = 0;
    for (std::size_t n = 0; n <= steps; ++n) {
        if (mark < marks.size() && marks[mark] == n) {
            observer(n, static_cast<double>(n) * cfg.dt, std::span<const double>(u));
            ++mark;
        }
        if (n == steps) break;
        if (noisy) path->increments(n, cfg.dt, incr);
        stepper.step(u, n, incr, drift);
    }
}

/// Integrate the driven equation from u0; deterministic given (u0, config, path seed/stream).
inline Trajectory solve(const SpectralField& u0, const ModelSpec& model, const SolverConfig& config,
                        WienerPath* path = nullptr, const DriftFn* drift = nullptr) {
    config.validate();
    check_stable(model, u0.grid(), config);
    if (!u0.all_finite()) throw ParameterError("initial data has non-finite values");
    Stepper stepper(model, u0.grid(), config);
    Trajectory traj;
    traj.config_hash = config_hash(model, u0.grid(), config);
    if (path != nullptr) {
        traj.seed = path->master_seed();
        traj.stream = path->stream_index();
    }
    std::vector<double> u(u0.data());
    integrate(stepper, u, config.noise_scale() > 0.0 ? path : nullptr, drift,
              [&](std::size_t, double t, std::span<const double> v) {
                  traj.times.push_back(t);
                  traj.snapshots.emplace_back(u0.grid(), std::vector<double>(v.begin(), v.end()));
              });
    return traj;
}

}  // namespace sfcl
