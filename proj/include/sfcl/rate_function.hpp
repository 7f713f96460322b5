// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Rate function I(f) = inf { 1/2 int |l|^2 : skeleton(l)(T) = f } for
// terminal-state targets.
//
// Linear skeleton: the terminal state is a linear image of the control, so
// I(f) = 1/2 x^T W^+ x with x the real Fourier coordinates of f and W the
// controllability Gramian in those coordinates. Control coordinates may drive
// several modes at once (h_n(., 1) need not be a single harmonic), so W is
// assembled as a full matrix rather than mode by mode.
//
// Nonlinear skeleton: augmented-Lagrangian minimization over piecewise-constant
// controls with L-BFGS inner solves and discrete-adjoint gradients. Results
// are upper bounds on I.
#pragma once

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "sfcl/control.hpp"
#include "sfcl/errors.hpp"
#include "sfcl/linear_oracle.hpp"
#include "sfcl/model.hpp"
#include "sfcl/skeleton_solver.hpp"
#include "sfcl/spde_solver.hpp"
#include "sfcl/torus_field.hpp"

namespace sfcl {

struct RateReport {
    double value = 0.0;
    bool infinite = false;
    std::vector<WaveVector> unreachable_modes;
    std::optional<Control> control;
    double residual = 0.0;  ///< L2 distance between the controlled terminal state and the target
    int iterations = 0;
    bool converged = true;
    bool upper_bound = false;   ///< true when value is only an upper bound on I
    double control_energy = 0.0;  ///< energy of the returned control
    std::string method;
};

inline nlohmann::json to_json(const RateReport& r, const std::string& control_csv_path = "") {
    nlohmann::json j;
    j["method"] = r.method;
    j["infinite"] = r.infinite;
    if (r.infinite) {
        j["value"] = nullptr;
    } else {
        j["value"] = r.value;
    }
    j["residual"] = r.residual;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["upper_bound"] = r.upper_bound;
    j["control_energy"] = r.control_energy;
    auto modes = nlohmann::json::array();
    for (const auto& k : r.unreachable_modes) modes.push_back({k[0], k[1]});
    j["unreachable_modes"] = modes;
    j["control_csv"] = control_csv_path.empty() ? nlohmann::json(nullptr) : nlohmann::json(control_csv_path);
    return j;
}

struct MdpRateOptions {
    /// 0: infimum over all L2 controls. m > 0: exact minimum over controls
    /// piecewise constant on m equal intervals.
    int control_intervals = 0;
    /// Partition of the returned control when control_intervals = 0.
    int output_intervals = 200;
    double eta = 0.0;
    double gamma = 0.0;
    /// Eigenvalues of W below rank_tol * max eigenvalue are treated as zero.
    double rank_tol = 1e-12;
    /// Relative projection residual above which the target counts as unreachable.
    double reach_tol = 1e-8;
};

namespace detail {

/// Real coordinates (Re, Im) of the half set of modes that carry a forcing or
/// a target component. Self-conjugate modes contribute only their real part.
struct ReachCoordinates {
    struct Coord {
        std::size_t mode = 0;  ///< flat index of the representative mode
        bool imag = false;
    };
    std::vector<Coord> coords;
    std::vector<WaveVector> unforced_targets;
    Eigen::VectorXd x;
};

inline std::size_t partner(const GridSpec& g, std::size_t i) {
    const auto k = g.wavevector(i);
    return g.mode_index({-k[0], -k[1]});
}

inline double part(Complex z, bool imag) { return imag ? z.imag() : z.real(); }

inline ReachCoordinates reach_coordinates(const GridSpec& grid, const std::vector<ModeParams>& modes,
                                          const Spectrum& target) {
    ReachCoordinates rc;
    double tmax = 0.0;
    for (const auto& c : target) tmax = std::max(tmax, std::abs(c));
    const double tiny = 1e-13 * tmax;
    std::vector<double> xs;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const std::size_t j = partner(grid, i);
        if (j < i) continue;
        const bool forced = modes[i].weight_norm_sq() > 0.0;
        const bool aimed = std::abs(target[i]) > tiny;
        if (!forced) {
            if (aimed) rc.unforced_targets.push_back(grid.wavevector(i));
            continue;
        }
        rc.coords.push_back({i, false});
        xs.push_back(target[i].real());
        if (j != i) {
            rc.coords.push_back({i, true});
            xs.push_back(target[i].imag());
        }
    }
    rc.x = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
    return rc;
}

/// int_0^T exp(-s tau) dtau.
inline Complex exp_integral(Complex s, double T) { return T * phi1(s * T); }

/// Continuous-time Gramian W_rr' = sum_n int_0^T g_rn g_r'n, g_rn(tau) = part(exp(-mu tau) h_n).
inline Eigen::MatrixXd continuous_gramian(const ReachCoordinates& rc, const std::vector<ModeParams>& modes,
                                          double T) {
    const auto R = static_cast<Eigen::Index>(rc.coords.size());
    Eigen::MatrixXd W(R, R);
    for (Eigen::Index r = 0; r < R; ++r) {
        for (Eigen::Index q = r; q < R; ++q) {
            const auto& A = modes[rc.coords[r].mode];
            const auto& B = modes[rc.coords[q].mode];
            Complex P(0.0, 0.0), Q(0.0, 0.0);
            for (std::size_t n = 0; n < A.noise_weights.size(); ++n) {
                P += A.noise_weights[n] * B.noise_weights[n];
                Q += A.noise_weights[n] * std::conj(B.noise_weights[n]);
            }
            const Complex ab = P * exp_integral(A.mu + B.mu, T);
            const Complex abc = Q * exp_integral(A.mu + std::conj(B.mu), T);
            const bool ia = rc.coords[r].imag, ib = rc.coords[q].imag;
            double v;
            if (!ia && !ib) v = 0.5 * (ab + abc).real();
            else if (ia && ib) v = 0.5 * (abc - ab).real();
            else if (!ia && ib) v = 0.5 * (ab - abc).imag();
            else v = 0.5 * (ab + abc).imag();
            W(r, q) = v;
            W(q, r) = v;
        }
    }
    return W;
}

/// Control-to-state matrix for piecewise-constant controls: column (i, n) is the
/// terminal response to l_n = 1 on interval i.
inline Eigen::MatrixXd piecewise_response(const ReachCoordinates& rc, const std::vector<ModeParams>& modes,
                                          std::span<const double> breakpoints, int K, double T) {
    const auto R = static_cast<Eigen::Index>(rc.coords.size());
    const std::size_t m = breakpoints.size() - 1;
    Eigen::MatrixXd C(R, static_cast<Eigen::Index>(m * K));
    for (Eigen::Index r = 0; r < R; ++r) {
        const auto& mode = modes[rc.coords[r].mode];
        for (std::size_t i = 0; i < m; ++i) {
            const double a = breakpoints[i], b = breakpoints[i + 1];
            const Complex kappa = std::exp(-mode.mu * (T - b)) * (b - a) * phi1(mode.mu * (b - a));
            for (int n = 0; n < K; ++n) {
                C(r, static_cast<Eigen::Index>(i * K + n)) = part(kappa * mode.noise_weights[n], rc.coords[r].imag);
            }
        }
    }
    return C;
}

struct PseudoSolve {
    Eigen::VectorXd lambda;  ///< W^+ x
    Eigen::VectorXd miss;    ///< component of x outside the range of W
};

inline PseudoSolve pseudo_solve(const Eigen::MatrixXd& W, const Eigen::VectorXd& x, double rank_tol) {
    PseudoSolve out;
    if (W.rows() == 0) {
        out.lambda = Eigen::VectorXd::Zero(0);
        out.miss = x;
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
    const auto& ev = es.eigenvalues();
    const auto& V = es.eigenvectors();
    const double cut = rank_tol * std::max(ev.maxCoeff(), 0.0);
    Eigen::VectorXd coef = V.transpose() * x;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    Eigen::VectorXd kept = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) > cut && ev(i) > 0.0) {
            inv(i) = coef(i) / ev(i);
            kept(i) = coef(i);
        }
    }
    out.lambda = V * inv;
    out.miss = x - V * kept;
    return out;
}

inline Spectrum spectrum_from_coords(const GridSpec& grid, const ReachCoordinates& rc, const Eigen::VectorXd& v) {
    Spectrum s(grid.size(), Complex(0.0, 0.0));
    for (std::size_t r = 0; r < rc.coords.size(); ++r) {
        const auto& c = rc.coords[r];
        if (c.imag) s[c.mode] += Complex(0.0, v(static_cast<Eigen::Index>(r)));
        else s[c.mode] += v(static_cast<Eigen::Index>(r));
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const std::size_t j = partner(grid, i);
        if (j > i) s[j] = std::conj(s[i]);
    }
    return s;
}

/// L2 norm of a real field from its spectrum (Parseval).
inline double spectral_l2(const Spectrum& s) {
    double acc = 0.0;
    for (const auto& c : s) acc += std::norm(c);
    return std::sqrt(acc);
}

inline std::vector<double> uniform_breakpoints(double T, int m) {
    std::vector<double> t(m + 1);
    for (int i = 0; i <= m; ++i) t[i] = T * i / m;
    t.back() = T;
    return t;
}

/// Minimum-energy control on a fixed partition and its terminal residual.
struct PiecewiseOptimum {
    Control control;
    double value;
    Eigen::VectorXd miss;
};

inline PiecewiseOptimum piecewise_optimum(const ReachCoordinates& rc, const std::vector<ModeParams>& modes,
                                          std::span<const double> breakpoints, int K, double T, double rank_tol) {
    const Eigen::MatrixXd C = piecewise_response(rc, modes, breakpoints, K, T);
    const std::size_t m = breakpoints.size() - 1;
    Eigen::VectorXd dinv(static_cast<Eigen::Index>(m * K));
    for (std::size_t i = 0; i < m; ++i)
        for (int n = 0; n < K; ++n) dinv(static_cast<Eigen::Index>(i * K + n)) = 1.0 / (breakpoints[i + 1] - breakpoints[i]);
    const Eigen::MatrixXd W = C * dinv.asDiagonal() * C.transpose();
    auto ps = pseudo_solve(W, rc.x, rank_tol);
    Eigen::VectorXd ell = dinv.asDiagonal() * (C.transpose() * ps.lambda);
    std::vector<double> coeffs(ell.data(), ell.data() + ell.size());
    Control ctl(std::vector<double>(breakpoints.begin(), breakpoints.end()), std::move(coeffs), K);
    return {std::move(ctl), 0.5 * rc.x.dot(ps.lambda), ps.miss};
}

inline std::vector<WaveVector> missed_modes(const GridSpec& grid, const ReachCoordinates& rc,
                                            const Eigen::VectorXd& miss, double tol) {
    std::vector<WaveVector> out = rc.unforced_targets;
    for (std::size_t r = 0; r < rc.coords.size(); ++r) {
        if (std::abs(miss(static_cast<Eigen::Index>(r))) > tol) {
            const auto k = grid.wavevector(rc.coords[r].mode);
            if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
        }
    }
    return out;
}

}  // namespace detail

/// Exact rate of the linear skeleton at u_hat = 1 for a terminal target at time T.
inline RateReport mdp_rate_exact(const SpectralField& target, const ModelSpec& model, double T,
                                 const MdpRateOptions& opts = {}) {
    if (!(T > 0.0)) throw ParameterError("rate horizon T must be positive");
    if (opts.control_intervals < 0 || opts.output_intervals < 1) throw ConfigError("control intervals must be >= 1");
    const GridSpec& grid = target.grid();
    const auto lin = linearize_at(model, 1.0);
    const auto modes = mode_params(lin, grid, opts.eta, opts.gamma);
    const Spectrum ts = target.spectrum();
    const auto rc = detail::reach_coordinates(grid, modes, ts);
    const int K = model.noise.truncation;

    RateReport rep;
    rep.method = opts.control_intervals == 0 ? "gramian" : "gramian_piecewise";
    const double xnorm = rc.x.norm();
    const double miss_tol = opts.reach_tol * std::max(xnorm, std::numeric_limits<double>::min());

    const int m = opts.control_intervals == 0 ? opts.output_intervals : opts.control_intervals;
    const auto bp = detail::uniform_breakpoints(T, m);
    auto pw = detail::piecewise_optimum(rc, modes, bp, K, T, opts.rank_tol);

    Eigen::VectorXd miss = pw.miss;
    double value = pw.value;
    if (opts.control_intervals == 0) {
        const Eigen::MatrixXd W = detail::continuous_gramian(rc, modes, T);
        auto ps = detail::pseudo_solve(W, rc.x, opts.rank_tol);
        miss = ps.miss;
        value = 0.5 * rc.x.dot(ps.lambda);
    }
    rep.unreachable_modes = detail::missed_modes(grid, rc, miss, miss_tol);
    if (!rep.unreachable_modes.empty()) {
        rep.infinite = true;
        rep.value = std::numeric_limits<double>::infinity();
        rep.converged = true;
        return rep;
    }
    rep.value = std::max(value, 0.0);
    rep.control_energy = pw.control.energy();
    const Spectrum reached = duhamel_mdp_spectrum(pw.control, modes, T);
    Spectrum diff(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) diff[i] = reached[i] - ts[i];
    rep.residual = detail::spectral_l2(diff);
    rep.control = std::move(pw.control);
    rep.iterations = 0;
    rep.converged = true;
    return rep;
}

struct RateBound {
    double energy = 0.0;          ///< 1/2 int |l|^2 of the given control
    double rate = 0.0;            ///< infimum over all controls
    double partition_rate = 0.0;  ///< minimum over controls on the same partition
    double residual = 0.0;
};

/// Checks that a control reaching the target (within feasibility_tol, relative
/// to the target's L2 norm) has energy at least the exact linear rate.
/// Throws InfeasibleControl when the control misses the target.
inline RateBound verify_rate_bound(const Control& control, const SpectralField& target, const ModelSpec& model,
                                   double T, double feasibility_tol = 1e-8, const MdpRateOptions& opts = {}) {
    if (control.truncation() != model.noise.truncation) throw ConfigError("control truncation != K");
    const GridSpec& grid = target.grid();
    const auto modes = mode_params(linearize_at(model, 1.0), grid, opts.eta, opts.gamma);
    const Spectrum ts = target.spectrum();
    const Spectrum reached = duhamel_mdp_spectrum(control, modes, T);
    Spectrum diff(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) diff[i] = reached[i] - ts[i];
    RateBound b;
    b.residual = detail::spectral_l2(diff);
    const double scale = std::max(detail::spectral_l2(ts), 1e-300);
    if (b.residual > feasibility_tol * scale) throw InfeasibleControl(b.residual);
    b.energy = control.energy();
    MdpRateOptions o = opts;
    o.control_intervals = 0;
    b.rate = mdp_rate_exact(target, model, T, o).value;
    const auto rc = detail::reach_coordinates(grid, modes, ts);
    b.partition_rate = detail::piecewise_optimum(rc, modes, control.breakpoints(), model.noise.truncation, T,
                                                 opts.rank_tol).value;
    if (b.energy < b.rate - 1e-8 * std::max(1.0, b.rate)) {
        throw std::logic_error("feasible control below the exact rate: energy " + std::to_string(b.energy) +
                               " < " + std::to_string(b.rate));
    }
    return b;
}

// ---------------------------------------------------------------------------
// Iterative rate for the nonlinear skeleton
// ---------------------------------------------------------------------------

struct LdpRateOptions {
    int control_intervals = 10;
    int max_outer_iterations = 25;     ///< augmented-Lagrangian updates
    int max_inner_iterations = 400;    ///< L-BFGS iterations per update
    double penalty = 1e3;              ///< initial quadratic penalty weight on ||u(T) - f||^2
    double penalty_growth = 4.0;
    double gradient_tolerance = 1e-10;
    /// Terminal residual, relative to the miss of the uncontrolled solution, at which the run counts as converged.
    double residual_tolerance = 1e-6;
    std::optional<Control> initial_control;
};

namespace detail {

/// Forward/adjoint evaluation of J(l) = E(l) + <y, r> + rho/2 |r|^2, r = u_l(T) - f,
/// with the grid inner product <a, b> = N^{-d} sum a_j b_j.
class SkeletonObjective {
public:
    SkeletonObjective(const SpectralField& u0, const ModelSpec& model, const SolverConfig& config,
                      const SpectralField& target, std::vector<double> breakpoints)
        : u0_(u0),
          target_(target),
          stepper_(model, u0.grid(), config),
          breakpoints_(std::move(breakpoints)),
          K_(model.noise.truncation),
          n_(u0.size()),
          steps_(config.steps()) {
        multiplier_.assign(n_, 0.0);
        states_.resize((steps_ + 1) * n_);
        step_interval_.resize(steps_);
        Control probe(breakpoints_, std::vector<double>((breakpoints_.size() - 1) * K_, 0.0), K_);
        for (std::size_t s = 0; s < steps_; ++s) {
            step_interval_[s] = probe.interval_at((static_cast<double>(s) + 0.5) * config.dt);
        }
    }

    int parameters() const { return static_cast<int>((breakpoints_.size() - 1) * K_); }
    std::size_t intervals() const { return breakpoints_.size() - 1; }

    void set_penalty(double rho) { rho_ = rho; }
    std::vector<double>& multiplier() { return multiplier_; }

    Control control(const double* l) const {
        return {breakpoints_, std::vector<double>(l, l + parameters()), K_};
    }

    /// Terminal residual vector r = u_l(T) - f for the last evaluated control.
    const std::vector<double>& residual() const { return residual_; }

    double evaluate(const double* l, double* grad) {
        const Control ctl = control(l);
        const DriftFn drift = control_drift(stepper_, ctl);
        std::vector<double> u(u0_.data());
        std::copy(u.begin(), u.end(), states_.begin());
        for (std::size_t s = 0; s < steps_; ++s) {
            stepper_.step(u, s, {}, &drift);
            std::copy(u.begin(), u.end(), states_.begin() + static_cast<std::ptrdiff_t>((s + 1) * n_));
        }
        residual_.resize(n_);
        const double w = 1.0 / static_cast<double>(n_);
        double lin = 0.0, quad = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            residual_[j] = u[j] - target_[j];
            lin += w * multiplier_[j] * residual_[j];
            quad += w * residual_[j] * residual_[j];
        }
        const double value = ctl.energy() + lin + 0.5 * rho_ * quad;
        if (grad != nullptr) {
            const int P = parameters();
            std::fill(grad, grad + P, 0.0);
            const auto bp = ctl.breakpoints();
            for (std::size_t i = 0; i < intervals(); ++i) {
                const double dti = bp[i + 1] - bp[i];
                for (int k = 0; k < K_; ++k) grad[i * K_ + k] = dti * l[i * K_ + k];
            }
            std::vector<double> lam(n_), lam_prev(n_);
            for (std::size_t j = 0; j < n_; ++j) lam[j] = w * (multiplier_[j] + rho_ * residual_[j]);
            for (std::size_t s = steps_; s-- > 0;) {
                const std::span<const double> us(states_.data() + s * n_, n_);
                const std::size_t iv = step_interval_[s];
                stepper_.adjoint_step(us, ctl.row(iv), lam, lam_prev, std::span<double>(grad + iv * K_, K_));
                lam.swap(lam_prev);
            }
        }
        return value;
    }

private:
    SpectralField u0_;
    SpectralField target_;
    Stepper stepper_;
    std::vector<double> breakpoints_;
    int K_;
    std::size_t n_;
    std::size_t steps_;
    double rho_ = 1.0;
    std::vector<double> multiplier_;
    std::vector<double> states_;
    std::vector<std::size_t> step_interval_;
    std::vector<double> residual_;
};

class CeresObjective final : public ceres::FirstOrderFunction {
public:
    explicit CeresObjective(SkeletonObjective* obj) : obj_(obj) {}
    bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
        try {
            *cost = obj_->evaluate(parameters, gradient);
        } catch (const DivergenceError&) {
            return false;
        }
        return std::isfinite(*cost);
    }
    int NumParameters() const override { return obj_->parameters(); }

private:
    SkeletonObjective* obj_;
};

}  // namespace detail

/// Upper bound on I(f) for the skeleton started at u0, by minimizing the
/// control energy subject to u_l(T) = f (augmented Lagrangian, L-BFGS inner solves).
/// Never throws on non-convergence; the report says converged = false instead.
inline RateReport ldp_rate_iterative(const SpectralField& target, const SpectralField& u0, const ModelSpec& model,
                                     const SolverConfig& config, const LdpRateOptions& opts = {}) {
    if (!(target.grid() == u0.grid())) throw ConfigError("target and initial data live on different grids");
    if (config.eps != 0.0) throw ConfigError("rate computation uses the skeleton (eps = 0)");
    if (opts.control_intervals < 1) throw ConfigError("control_intervals must be >= 1");
    config.validate();
    check_stable(model, u0.grid(), config);
    const int K = model.noise.truncation;
    const double T = config.t_end;
    auto bp = detail::uniform_breakpoints(T, opts.control_intervals);
    if (opts.initial_control) {
        if (opts.initial_control->truncation() != K) throw ConfigError("initial control truncation != K");
        bp.assign(opts.initial_control->breakpoints().begin(), opts.initial_control->breakpoints().end());
    }
    detail::SkeletonObjective obj(u0, model, config, target, bp);
    std::vector<double> l(static_cast<std::size_t>(obj.parameters()), 0.0);
    if (opts.initial_control) {
        l.assign(opts.initial_control->coefficients().begin(), opts.initial_control->coefficients().end());
    }

    double rho = opts.penalty;
    obj.set_penalty(rho);

    RateReport rep;
    rep.method = "augmented_lagrangian_lbfgs";
    rep.upper_bound = true;
    rep.converged = false;

    // Tolerances are relative to the miss of the uncontrolled solution.
    std::vector<double> zero(l.size(), 0.0);
    obj.evaluate(zero.data(), nullptr);
    const double free_miss = l2_norm(obj.residual());
    const double fscale = std::max(free_miss, 1e-14 * std::max(1.0, l2_norm(target.values())));
    if (free_miss <= opts.residual_tolerance * fscale && !opts.initial_control) {
        rep.converged = true;
        l = zero;
    }

    double prev_res = INFINITY;
    // ceres takes ownership of the function object
    ceres::GradientProblem problem(new detail::CeresObjective(&obj));
    for (int outer = 0; outer < opts.max_outer_iterations && !rep.converged; ++outer) {
        ceres::GradientProblemSolver::Options so;
        so.line_search_direction_type = ceres::LBFGS;
        so.max_num_iterations = opts.max_inner_iterations;
        so.gradient_tolerance = opts.gradient_tolerance;
        so.function_tolerance = 1e-14;
        so.parameter_tolerance = 1e-14;
        so.logging_type = ceres::SILENT;
        so.minimizer_progress_to_stdout = false;
        ceres::GradientProblemSolver::Summary summary;
        ceres::Solve(so, problem, l.data(), &summary);
        rep.iterations += static_cast<int>(summary.iterations.size());
        obj.evaluate(l.data(), nullptr);
        const auto& r = obj.residual();
        const double res = l2_norm(r);
        if (res <= opts.residual_tolerance * fscale) {
            rep.converged = true;
            break;
        }
        auto& y = obj.multiplier();
        for (std::size_t j = 0; j < y.size(); ++j) y[j] += rho * r[j];
        if (res > 0.25 * prev_res) {
            rho *= opts.penalty_growth;
            obj.set_penalty(rho);
        }
        prev_res = res;
    }

    Control best = obj.control(l.data());
    SolverConfig cfg = config;
    cfg.snapshot_intervals = 1;
    const auto traj = solve_skeleton(u0, model, best, cfg);
    rep.residual = l2_norm((traj.final() - target).values());
    rep.value = best.energy();
    rep.control_energy = rep.value;
    rep.control = std::move(best);
    return rep;
}

}  // namespace sfcl
