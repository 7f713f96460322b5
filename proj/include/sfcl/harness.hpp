// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo experiment drivers. Every experiment is a pure function of its
// arguments and the master seed: sample s draws its noise from WienerPath
// stream s (contraction uses one stream per (pair, sample) task), results are
// written to per-task slots and reduced in index order, so the worker count
// never changes a statistic.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sfcl/control.hpp"
#include "sfcl/errors.hpp"
#include "sfcl/linear_oracle.hpp"
#include "sfcl/model.hpp"
#include "sfcl/parallel.hpp"
#include "sfcl/skeleton_solver.hpp"
#include "sfcl/spde_solver.hpp"
#include "sfcl/torus_field.hpp"
#include "sfcl/wiener.hpp"

namespace sfcl {

struct HarnessOptions {
    std::uint64_t seed = 20260101;
    int workers = 1;  ///< 0 selects the number of logical cores
};

struct SampleSummary {
    double mean = 0.0;
    double stderr_ = 0.0;  ///< standard error of the mean
    double variance = 0.0;  ///< unbiased sample variance
    std::size_t count = 0;
};

inline SampleSummary summarize(std::span<const double> xs) {
    SampleSummary s;
    s.count = xs.size();
    if (xs.empty()) return s;
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    s.mean = m;
    if (xs.size() > 1) {
        double v = 0.0;
        for (double x : xs) v += (x - m) * (x - m);
        s.variance = v / static_cast<double>(xs.size() - 1);
        s.stderr_ = std::sqrt(s.variance / static_cast<double>(xs.size()));
    }
    return s;
}

/// Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> xs, double p) {
    if (xs.empty()) throw ShapeError("quantile of an empty sample");
    std::sort(xs.begin(), xs.end());
    const double h = p * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

struct ExperimentCell {
    nlohmann::json params = nlohmann::json::object();
    std::string statistic;
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t samples = 0;
    std::optional<bool> verdict;
    nlohmann::json extra = nlohmann::json::object();
};

struct ExperimentVerdict {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ExperimentReport {
    std::string name;
    std::uint64_t seed = 0;
    nlohmann::json grid = nlohmann::json::object();
    std::vector<ExperimentCell> cells;
    std::vector<ExperimentVerdict> verdicts;
    std::uint64_t increment_digest = 0;  ///< digest of every increment drawn, combined in task order

    bool passed() const {
        return std::all_of(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.passed; });
    }

    /// Every statistic in cell order, for bitwise reproducibility checks.
    std::vector<double> statistics() const {
        std::vector<double> out;
        for (const auto& c : cells) {
            out.push_back(c.value);
            out.push_back(c.stderr_);
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["name"] = name;
        j["seed"] = seed;
        j["grid"] = grid;
        auto cs = nlohmann::json::array();
        for (const auto& c : cells) {
            nlohmann::json e;
            e["params"] = c.params;
            e["statistic"] = c.statistic;
            e["value"] = c.value;
            e["stderr"] = c.stderr_;
            e["samples"] = c.samples;
            e["verdict"] = c.verdict ? nlohmann::json(*c.verdict) : nlohmann::json(nullptr);
            if (!c.extra.empty()) e["extra"] = c.extra;
            cs.push_back(std::move(e));
        }
        j["cells"] = std::move(cs);
        auto vs = nlohmann::json::array();
        for (const auto& v : verdicts) vs.push_back({{"name", v.name}, {"passed", v.passed}, {"detail", v.detail}});
        j["verdicts"] = std::move(vs);
        std::ostringstream hex;
        hex << std::hex << std::setw(16) << std::setfill('0') << increment_digest;
        j["increment_digest"] = hex.str();
        j["passed"] = passed();
        return j;
    }

    /// One row per cell: experiment,cell,params,statistic,value,stderr,samples,verdict.
    void write_csv(std::ostream& os) const {
        os.precision(17);
        os << "experiment,cell,params,statistic,value,stderr,samples,verdict\n";
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto& c = cells[i];
            std::string params;
            for (auto it = c.params.begin(); it != c.params.end(); ++it) {
                if (!params.empty()) params += ';';
                params += it.key() + '=' + it.value().dump();
            }
            std::string quoted;
            for (char ch : params) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
            os << name << ',' << i << ",\"" << quoted << "\"," << c.statistic << ',' << c.value << ','
               << c.stderr_ << ',' << c.samples << ',' << (c.verdict ? (*c.verdict ? "pass" : "fail") : "")
               << '\n';
        }
    }
};

namespace detail {

inline nlohmann::json grid_json(const GridSpec& g, const SolverConfig& c) {
    return {{"dim", g.dim()},
            {"points_per_axis", g.points_per_axis()},
            {"dt", c.dt},
            {"t_end", c.t_end},
            {"eta", c.eta},
            {"gamma", c.gamma},
            {"flux_scheme", to_string(c.flux_scheme)},
            {"snapshot_intervals", c.snapshot_intervals}};
}

inline std::uint64_t combine(std::span<const std::uint64_t> digests) {
    Fnv1a h;
    for (auto d : digests) h.update(&d, sizeof d);
    return h.digest();
}

inline void require_samples(int samples, int minimum, const char* what) {
    if (samples < minimum) {
        throw ConfigError(std::string(what) + ": at least " + std::to_string(minimum) + " samples required");
    }
}

inline void require_decreasing(const std::vector<double>& grid, const char* what, bool allow_zero) {
    if (grid.size() < 2) throw ConfigError(std::string(what) + ": grid needs at least two values");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0 || (allow_zero && grid[i] == 0.0))) {
            throw ConfigError(std::string(what) + ": grid values must be positive");
        }
        if (i > 0 && !(grid[i] < grid[i - 1])) {
            throw ConfigError(std::string(what) + ": grid must be strictly decreasing");
        }
    }
}

inline bool is_constant(const SpectralField& u, double value) {
    return std::all_of(u.values().begin(), u.values().end(), [value](double v) { return v == value; });
}

/// Flat index of the wavevector (k, 0).
inline std::size_t axis_mode(const GridSpec& g, int k) { return g.mode_index({k, 0}); }

/// Sample variance of a complex coefficient and the standard error of that
/// estimate (from the sample variance of |z - mean|^2).
inline SampleSummary complex_variance(std::span<const Complex> z) {
    Complex m(0.0, 0.0);
    for (const auto& v : z) m += v;
    m /= static_cast<double>(z.size());
    std::vector<double> dev(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) dev[i] = std::norm(z[i] - m);
    auto s = summarize(dev);
    const double n = static_cast<double>(z.size());
    SampleSummary out;
    out.count = z.size();
    out.mean = s.mean * n / (n - 1.0);
    out.stderr_ = s.stderr_ * n / (n - 1.0);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// L1 contraction
// ---------------------------------------------------------------------------

/// E||u1(t) - u2(t)||_L1 for pairs of initial data driven by identical noise paths.
inline ExperimentReport contraction_experiment(const std::vector<std::pair<SpectralField, SpectralField>>& pairs,
                                               const ModelSpec& model, const SolverConfig& config, int samples,
                                               const HarnessOptions& opts = {}, double tol = 1e-2) {
    detail::require_samples(samples, 100, "contraction");
    if (pairs.empty()) throw ConfigError("contraction: no initial pairs");
    const GridSpec grid = pairs.front().first.grid();
    for (const auto& [a, b] : pairs) {
        if (!(a.grid() == grid) || !(b.grid() == grid)) throw ConfigError("contraction: mismatched grids");
    }
    config.validate();
    check_stable(model, grid, config);
    const int K = model.noise.truncation;
    const std::size_t steps = config.steps();
    const auto marks = snapshot_steps(steps, config.snapshot_intervals);
    const bool noisy = config.noise_scale() > 0.0;
    // deterministic runs are identical across samples
    const std::size_t M = noisy ? static_cast<std::size_t>(samples) : 1, P = pairs.size(), R = marks.size();

    std::vector<double> dist(P * M * R);
    std::vector<std::uint64_t> digests(P * M, 0);
    parallel_for(P * M, opts.workers, [&](std::size_t task) {
        const std::size_t p = task / M;
        Stepper sa(model, grid, config), sb(model, grid, config);
        WienerPath pa(opts.seed, task, K), pb(opts.seed, task, K);
        std::vector<double> u(pairs[p].first.data()), v(pairs[p].second.data());
        std::vector<double> ia(noisy ? K : 0), ib(noisy ? K : 0);
        std::size_t mark = 0;
        for (std::size_t n = 0; n <= steps; ++n) {
            if (mark < R && marks[mark] == n) dist[task * R + mark++] = l1_distance(u, v);
            if (n == steps) break;
            if (noisy) {
                pa.increments(n, config.dt, ia);
                pb.increments(n, config.dt, ib);
            }
            sa.step(u, n, ia, nullptr);
            sb.step(v, n, ib, nullptr);
        }
        if (pa.digest() != pb.digest()) throw std::logic_error("contraction: legs saw different increments");
        digests[task] = pa.digest();
    });

    ExperimentReport rep;
    rep.name = "contraction";
    rep.seed = opts.seed;
    rep.grid = detail::grid_json(grid, config);
    rep.grid["eps"] = config.eps;
    rep.grid["pairs"] = P;
    rep.increment_digest = detail::combine(digests);
    bool all = true;
    double worst = -INFINITY;
    std::vector<double> col(M);
    for (std::size_t p = 0; p < P; ++p) {
        const double d0 = l1_distance(pairs[p].first.values(), pairs[p].second.values());
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t s = 0; s < M; ++s) col[s] = dist[(p * M + s) * R + r];
            const auto sum = summarize(col);
            const double bound = d0 * (1.0 + tol) + 3.0 * sum.stderr_;
            ExperimentCell c;
            c.params = {{"pair", p}, {"t", static_cast<double>(marks[r]) * config.dt}};
            c.statistic = "mean_l1_distance";
            c.value = sum.mean;
            c.stderr_ = sum.stderr_;
            c.samples = M;
            c.verdict = sum.mean <= bound;
            c.extra = {{"initial_l1_distance", d0}, {"bound", bound}};
            all = all && *c.verdict;
            worst = std::max(worst, d0 > 0 ? (sum.mean - 3.0 * sum.stderr_) / d0 - 1.0 : sum.mean);
            rep.cells.push_back(std::move(c));
        }
    }
    std::ostringstream os;
    os << "largest relative excess over the initial distance " << worst << " (allowance " << tol << ")";
    rep.verdicts.push_back({"contraction", all, os.str()});
    return rep;
}

// ---------------------------------------------------------------------------
// Central limit theorem
// ---------------------------------------------------------------------------

/// w = (u^{eps,eta} - 1)/sqrt(eps) against the linear limit u* driven by the
/// same increments, for each eps of a decreasing grid.
inline ExperimentReport clt_experiment(const SpectralField& u0, const ModelSpec& model, const SolverConfig& config,
                                       const std::vector<double>& eps_grid, int samples,
                                       const HarnessOptions& opts = {}, int variance_modes = 4) {
    if (!detail::is_constant(u0, 1.0)) {
        throw UnsupportedInput("clt: the limit is taken around the constant state u = 1; initial data must be 1");
    }
    detail::require_samples(samples, 100, "clt");
    detail::require_decreasing(eps_grid, "clt eps", false);
    if (variance_modes < 0) throw ConfigError("clt: variance_modes must be >= 0");
    const GridSpec& grid = u0.grid();
    const int K = model.noise.truncation;
    const std::size_t steps = config.steps();
    const auto marks = snapshot_steps(steps, config.snapshot_intervals);
    const std::size_t R = marks.size(), M = static_cast<std::size_t>(samples), E = eps_grid.size();
    const int kmax = std::min(variance_modes, grid.points_per_axis() / 2 - 1);
    const std::size_t V = static_cast<std::size_t>(kmax + 1);
    std::vector<double> times(R);
    for (std::size_t r = 0; r < R; ++r) times[r] = static_cast<double>(marks[r]) * config.dt;
    for (double eps : eps_grid) {
        SolverConfig c = config;
        c.eps = eps;
        c.validate();
        check_stable(model, grid, c);
    }
    const auto modes = mode_params(linearize_at(model, 1.0), grid, config.eta, config.gamma);

    std::vector<double> e1(E * M);
    std::vector<Complex> terminal(E * M * V);
    std::vector<std::uint64_t> digests(E * M);
    parallel_for(E * M, opts.workers, [&](std::size_t task) {
        const std::size_t e = task / M, s = task % M;
        SolverConfig c = config;
        c.eps = eps_grid[e];
        c.lambda_eps.reset();
        const double scale = 1.0 / std::sqrt(c.eps);
        Stepper st(model, grid, c);
        CoupledStarOracle oracle(modes, grid, c.dt);
        FourierTransform fft(grid);
        WienerPath path(opts.seed, s, K);
        std::vector<double> u(u0.data()), w(u.size()), star(u.size()), inc(K), l1(R);
        std::size_t mark = 0;
        for (std::size_t n = 0; n <= steps; ++n) {
            if (mark < R && marks[mark] == n) {
                for (std::size_t j = 0; j < u.size(); ++j) w[j] = (u[j] - 1.0) * scale;
                oracle.field(star);
                l1[mark++] = l1_distance(w, star);
            }
            if (n == steps) break;
            path.increments(n, c.dt, inc);
            st.step(u, n, inc, nullptr);
            oracle.step(inc);
        }
        e1[task] = e1_rectangle(times, l1);
        Spectrum ws;
        fft.forward(w, ws);
        for (std::size_t k = 0; k < V; ++k) terminal[task * V + k] = ws[detail::axis_mode(grid, static_cast<int>(k))];
        digests[task] = path.digest();
    });

    ExperimentReport rep;
    rep.name = "clt";
    rep.seed = opts.seed;
    rep.grid = detail::grid_json(grid, config);
    rep.increment_digest = detail::combine(digests);
    std::vector<double> means;
    for (std::size_t e = 0; e < E; ++e) {
        const auto sum = summarize(std::span<const double>(e1.data() + e * M, M));
        ExperimentCell c;
        c.params = {{"eps", eps_grid[e]}};
        c.statistic = "mean_e1_distance_to_coupled_limit";
        c.value = sum.mean;
        c.stderr_ = sum.stderr_;
        c.samples = M;
        means.push_back(sum.mean);
        rep.cells.push_back(std::move(c));
    }
    bool decreasing = true;
    for (std::size_t e = 1; e < E; ++e) decreasing = decreasing && means[e] < means[e - 1];
    std::ostringstream os;
    os.precision(6);
    os << "E1 distances:";
    for (double m : means) os << ' ' << m;
    rep.verdicts.push_back({"clt_statistic_decreasing", decreasing, os.str()});

    bool variance_ok = true;
    std::ostringstream vd;
    vd.precision(6);
    const double T = config.t_end;
    std::vector<Complex> col(M);
    for (std::size_t e = 0; e < E; ++e) {
        for (std::size_t k = 0; k < V; ++k) {
            for (std::size_t s = 0; s < M; ++s) col[s] = terminal[(e * M + s) * V + k];
            const auto var = detail::complex_variance(col);
            const double expect = star_moments(modes[detail::axis_mode(grid, static_cast<int>(k))], T).variance;
            ExperimentCell c;
            c.params = {{"eps", eps_grid[e]}, {"mode", k}};
            c.statistic = "terminal_mode_variance";
            c.value = var.mean;
            c.stderr_ = var.stderr_;
            c.samples = M;
            c.extra = {{"oracle_variance", expect}};
            if (e + 1 == E) {
                c.verdict = std::abs(var.mean - expect) <= 3.0 * var.stderr_;
                variance_ok = variance_ok && *c.verdict;
                vd << " k=" << k << ": " << var.mean << " vs " << expect << " (3se " << 3.0 * var.stderr_ << ')';
            }
            rep.cells.push_back(std::move(c));
        }
    }
    rep.verdicts.push_back({"clt_mode_variance", variance_ok, "at smallest eps" + vd.str()});
    return rep;
}

// ---------------------------------------------------------------------------
// Mass martingale
// ---------------------------------------------------------------------------

/// Mean of (mass(T) - mass(0)), mass = spatial average.
inline ExperimentReport mass_martingale_experiment(const SpectralField& u0, const ModelSpec& model,
                                                   const SolverConfig& config, int samples,
                                                   const HarnessOptions& opts = {}) {
    detail::require_samples(samples, 500, "mass_martingale");
    config.validate();
    const GridSpec& grid = u0.grid();
    check_stable(model, grid, config);
    const int K = model.noise.truncation;
    const bool noisy = config.noise_scale() > 0.0;
    // deterministic runs are identical across samples
    const std::size_t runs = noisy ? static_cast<std::size_t>(samples) : 1;
    const double m0 = u0.mean();
    std::vector<double> drift(runs);
    std::vector<std::uint64_t> digests(runs, 0);
    parallel_for(runs, opts.workers, [&](std::size_t s) {
        Stepper st(model, grid, config);
        WienerPath path(opts.seed, s, K);
        std::vector<double> u(u0.data());
        integrate(st, u, noisy ? &path : nullptr, nullptr, [](std::size_t, double, std::span<const double>) {});
        double m = 0.0;
        for (double v : u) m += v;
        drift[s] = m / static_cast<double>(u.size()) - m0;
        digests[s] = path.digest();
    });

    ExperimentReport rep;
    rep.name = "mass_martingale";
    rep.seed = opts.seed;
    rep.grid = detail::grid_json(grid, config);
    rep.grid["eps"] = config.eps;
    rep.increment_digest = detail::combine(digests);
    const auto sum = summarize(drift);
    ExperimentCell c;
    c.params = {{"eps", config.eps}};
    c.statistic = "mean_mass_drift";
    c.value = sum.mean;
    c.stderr_ = sum.stderr_;
    c.samples = runs;
    std::ostringstream os;
    if (!noisy) {
        c.verdict = std::abs(sum.mean) <= 1e-12;
        os << "deterministic drift " << sum.mean;
    } else {
        c.verdict = std::abs(sum.mean) <= 3.0 * sum.stderr_;
        os << "mean drift " << sum.mean << ", 3se " << 3.0 * sum.stderr_;
    }
    rep.cells.push_back(c);
    rep.verdicts.push_back({"mass_mean_drift", *c.verdict, os.str()});

    if (noisy && model.noise.is_additive()) {
        // mass(T) - mass(0) = sigma sum_k (mean_x h_k) beta_k(T), Gaussian
        const double sigma = config.noise_scale();
        double expect = 0.0;
        for (int k = 1; k <= K; ++k) {
            double avg = 0.0;
            for (std::size_t j = 0; j < grid.size(); ++j) avg += model.noise(k, grid.node(j), 0.0);
            avg /= static_cast<double>(grid.size());
            expect += avg * avg;
        }
        expect *= sigma * sigma * config.t_end;
        const double se = sum.variance * std::sqrt(2.0 / static_cast<double>(runs - 1));
        ExperimentCell v;
        v.params = {{"eps", config.eps}};
        v.statistic = "mass_variance";
        v.value = sum.variance;
        v.stderr_ = se;
        v.samples = runs;
        v.verdict = std::abs(sum.variance - expect) <= 3.0 * se;
        v.extra = {{"closed_form", expect}};
        std::ostringstream vd;
        vd << "sample variance " << sum.variance << " vs closed form " << expect;
        rep.verdicts.push_back({"mass_variance", *v.verdict, vd.str()});
        rep.cells.push_back(std::move(v));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Regularization ladders
// ---------------------------------------------------------------------------

enum class Regularization { eta, gamma };

inline std::string to_string(Regularization r) { return r == Regularization::eta ? "eta" : "gamma"; }

/// Successive E1 increments ||u^{r_i} - u^{r_{i+1}}|| of the skeleton down a ladder of
/// viscosity (eta) or biharmonic (gamma) coefficients.
inline ExperimentReport regularization_experiment(const SpectralField& u0, const ModelSpec& model,
                                                  const Control& control, const SolverConfig& config,
                                                  const std::vector<double>& ladder, Regularization which,
                                                  const HarnessOptions& opts = {}) {
    if (ladder.size() < 3) throw ConfigError("regularization ladder needs at least 3 rungs");
    detail::require_decreasing(ladder, "regularization ladder", true);
    if (config.eps != 0.0) throw ConfigError("regularization ladders run the skeleton (eps = 0)");
    std::vector<Trajectory> runs(ladder.size());
    parallel_for(ladder.size(), opts.workers, [&](std::size_t i) {
        SolverConfig c = config;
        (which == Regularization::eta ? c.eta : c.gamma) = ladder[i];
        runs[i] = solve_skeleton(u0, model, control, c);
    });

    ExperimentReport rep;
    rep.name = "regularization_" + to_string(which);
    rep.seed = opts.seed;
    rep.grid = detail::grid_json(u0.grid(), config);
    rep.grid["ladder"] = ladder;
    rep.grid["control_energy"] = control.energy();
    std::vector<double> inc;
    for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
        inc.push_back(runs[i].e1_distance(runs[i + 1]));
        ExperimentCell c;
        c.params = {{to_string(which), ladder[i]}, {"next", ladder[i + 1]}};
        c.statistic = "e1_increment";
        c.value = inc.back();
        c.samples = 1;
        rep.cells.push_back(std::move(c));
    }
    bool ok = true;
    for (std::size_t i = 1; i < inc.size(); ++i) ok = ok && (inc[i] < inc[i - 1] || (inc[i] == 0.0 && inc[i - 1] == 0.0));
    std::ostringstream os;
    os.precision(6);
    os << "increments:";
    for (double v : inc) os << ' ' << v;
    rep.verdicts.push_back({"cauchy_increments_decreasing", ok, os.str()});
    return rep;
}

// ---------------------------------------------------------------------------
// Controlled SPDE versus skeleton
// ---------------------------------------------------------------------------

/// Fraction of samples with ||u_bar^eps - v||_E1 > delta, u_bar^eps the controlled
/// SPDE and v the skeleton for the same control in S_N.
inline ExperimentReport condition2_coupling_experiment(const SpectralField& u0, const ModelSpec& model,
                                                       const std::vector<Control>& controls, double level,
                                                       const SolverConfig& config,
                                                       const std::vector<double>& eps_grid, int samples,
                                                       const HarnessOptions& opts = {},
                                                       std::optional<double> delta = std::nullopt) {
    if (controls.empty()) throw ConfigError("condition2: no controls");
    detail::require_samples(samples, 1, "condition2");
    detail::require_decreasing(eps_grid, "condition2 eps", true);
    for (const auto& c : controls) {
        if (!c.in_level_set(level)) throw ConfigError("condition2: control energy outside S_N");
    }
    const double thr = delta.value_or(0.05 * config.t_end * l1_norm(u0.values()));
    const int K = model.noise.truncation;
    SolverConfig det = config;
    det.eps = 0.0;
    std::vector<Trajectory> skel(controls.size());
    for (std::size_t i = 0; i < controls.size(); ++i) skel[i] = solve_skeleton(u0, model, controls[i], det);

    const std::size_t C = controls.size(), E = eps_grid.size(), M = static_cast<std::size_t>(samples);
    std::vector<double> dist(C * E * M);
    std::vector<std::uint64_t> digests(C * E * M, 0);
    parallel_for(C * E * M, opts.workers, [&](std::size_t task) {
        const std::size_t ci = task / (E * M), e = (task / M) % E, s = task % M;
        SolverConfig c = config;
        c.eps = eps_grid[e];
        c.lambda_eps.reset();
        WienerPath path(opts.seed, s, K);
        const auto traj = solve_controlled_spde(u0, model, controls[ci], c, c.eps > 0.0 ? &path : nullptr);
        dist[task] = traj.e1_distance(skel[ci]);
        digests[task] = path.digest();
    });

    ExperimentReport rep;
    rep.name = "condition2_coupling";
    rep.seed = opts.seed;
    rep.grid = detail::grid_json(u0.grid(), config);
    rep.grid["delta"] = thr;
    rep.grid["level"] = level;
    rep.increment_digest = detail::combine(digests);
    bool monotone = true, small = true;
    std::ostringstream os;
    os.precision(6);
    for (std::size_t ci = 0; ci < C; ++ci) {
        double prev = INFINITY;
        os << (ci ? "; " : "") << "control " << ci << " fractions:";
        for (std::size_t e = 0; e < E; ++e) {
            const std::span<const double> d(dist.data() + (ci * E + e) * M, M);
            const double frac =
                static_cast<double>(std::count_if(d.begin(), d.end(), [thr](double x) { return x > thr; })) /
                static_cast<double>(M);
            const auto sum = summarize(d);
            ExperimentCell c;
            c.params = {{"control", ci}, {"eps", eps_grid[e]}};
            c.statistic = "exceedance_fraction";
            c.value = frac;
            c.stderr_ = std::sqrt(frac * (1.0 - frac) / static_cast<double>(M));
            c.samples = M;
            c.extra = {{"mean_e1_distance", sum.mean}, {"mean_e1_distance_stderr", sum.stderr_}};
            monotone = monotone && frac <= prev;
            prev = frac;
            if (e + 1 == E) small = small && frac <= 0.05;
            os << ' ' << frac;
            rep.cells.push_back(std::move(c));
        }
    }
    rep.verdicts.push_back({"exceedance_nonincreasing", monotone, os.str()});
    rep.verdicts.push_back({"exceedance_small_at_smallest_eps", small, "threshold 0.05"});
    return rep;
}

// ---------------------------------------------------------------------------
// Moderate-deviation concentration
// ---------------------------------------------------------------------------

/// Quantiles of ||z^eps||_E1, z^eps = (u^eps - 1)/(sqrt(eps) Lambda(eps)), Lambda = eps^{-a}.
/// A tightness check only; no rate constants are measured.
inline ExperimentReport mdp_concentration_experiment(const SpectralField& u0, const ModelSpec& model, double a,
                                                     const SolverConfig& config,
                                                     const std::vector<double>& eps_grid, int samples,
                                                     const HarnessOptions& opts = {}, double tightness_factor = 2.0) {
    if (!(a > 0.0 && a < 0.5)) throw ParameterError("mdp: exponent a must lie in (0, 1/2)");
    if (!detail::is_constant(u0, 1.0)) throw UnsupportedInput("mdp: deviations are taken around u = 1");
    detail::require_samples(samples, 2, "mdp_concentration");
    detail::require_decreasing(eps_grid, "mdp eps", false);
    if (eps_grid.front() > 1.0) throw ConfigError("mdp: eps must not exceed 1");
    const GridSpec& grid = u0.grid();
    const int K = model.noise.truncation;
    const std::size_t steps = config.steps();
    const auto marks = snapshot_steps(steps, config.snapshot_intervals);
    const std::size_t R = marks.size(), M = static_cast<std::size_t>(samples), E = eps_grid.size();
    std::vector<double> times(R);
    for (std::size_t r = 0; r < R; ++r) times[r] = static_cast<double>(marks[r]) * config.dt;
    for (double eps : eps_grid) {
        SolverConfig c = config;
        c.eps = eps;
        c.validate();
        check_stable(model, grid, c);
    }
    const bool linear = model.flux.linear_speed && model.diffusion.linear_scale && model.noise.is_additive();
    const std::size_t k1 = detail::axis_mode(grid, 1);

    std::vector<double> zn(E * M), raw(E * M);
    std::vector<Complex> mode1(E * M);
    std::vector<std::uint64_t> digests(E * M);
    parallel_for(E * M, opts.workers, [&](std::size_t task) {
        const std::size_t e = task / M, s = task % M;
        SolverConfig c = config;
        c.eps = eps_grid[e];
        c.lambda_eps.reset();
        const double lambda = std::pow(c.eps, -a);
        const double scale = 1.0 / (std::sqrt(c.eps) * lambda);
        Stepper st(model, grid, c);
        WienerPath path(opts.seed, s, K);
        std::vector<double> u(u0.data()), dz(R), dr(R);
        std::size_t mark = 0;
        integrate(st, u, &path, nullptr, [&](std::size_t, double, std::span<const double> v) {
            double acc = 0.0;
            for (double x : v) acc += std::abs(x - 1.0);
            acc /= static_cast<double>(v.size());
            dr[mark] = acc;
            dz[mark++] = acc * scale;
        });
        zn[task] = e1_rectangle(times, dz);
        raw[task] = e1_rectangle(times, dr);
        FourierTransform fft(grid);
        Spectrum sp;
        std::vector<double> z(u.size());
        for (std::size_t j = 0; j < u.size(); ++j) z[j] = (u[j] - 1.0) * scale;
        fft.forward(z, sp);
        mode1[task] = sp[k1];
        digests[task] = path.digest();
    });

    ExperimentReport rep;
    rep.name = "mdp_concentration";
    rep.seed = opts.seed;
    rep.grid = detail::grid_json(grid, config);
    rep.grid["a"] = a;
    rep.increment_digest = detail::combine(digests);
    std::vector<double> q95, raw_mean;
    bool variance_ok = true;
    std::ostringstream vd;
    vd.precision(6);
    const ModeParams* m1 = nullptr;
    std::vector<ModeParams> modes;
    if (linear) {
        modes = mode_params(model, grid, config.eta, config.gamma);
        m1 = &modes[k1];
    }
    for (std::size_t e = 0; e < E; ++e) {
        std::vector<double> col(zn.begin() + static_cast<std::ptrdiff_t>(e * M),
                                zn.begin() + static_cast<std::ptrdiff_t>((e + 1) * M));
        const auto sum = summarize(col);
        const auto rs = summarize(std::span<const double>(raw.data() + e * M, M));
        const double lambda = std::pow(eps_grid[e], -a);
        ExperimentCell c;
        c.params = {{"eps", eps_grid[e]}, {"lambda", lambda}};
        c.statistic = "mean_e1_norm_z";
        c.value = sum.mean;
        c.stderr_ = sum.stderr_;
        c.samples = M;
        c.extra = {{"q50", quantile(col, 0.5)},
                   {"q90", quantile(col, 0.9)},
                   {"q95", quantile(col, 0.95)},
                   {"raw_deviation_mean", rs.mean},
                   {"raw_deviation_stderr", rs.stderr_}};
        q95.push_back(c.extra["q95"].get<double>());
        raw_mean.push_back(rs.mean);
        if (linear) {
            const auto var = detail::complex_variance(std::span<const Complex>(mode1.data() + e * M, M));
            const double expect = star_moments(*m1, config.t_end).variance / (lambda * lambda);
            const bool ok = std::abs(var.mean - expect) <= 3.0 * var.stderr_;
            c.extra["mode1_variance"] = var.mean;
            c.extra["mode1_variance_stderr"] = var.stderr_;
            c.extra["mode1_oracle_variance"] = expect;
            variance_ok = variance_ok && ok;
            vd << " eps=" << eps_grid[e] << ": " << var.mean << " vs " << expect;
        }
        rep.cells.push_back(std::move(c));
    }
    bool bounded = std::all_of(q95.begin(), q95.end(), [](double q) { return std::isfinite(q); });
    const double cap = tightness_factor * q95.front();
    for (double q : q95) bounded = bounded && q <= cap;
    bool shrinking = true;
    for (std::size_t e = 1; e < E; ++e) shrinking = shrinking && raw_mean[e] < raw_mean[e - 1];
    std::ostringstream os;
    os.precision(6);
    os << "q95:";
    for (double q : q95) os << ' ' << q;
    os << " (cap " << cap << ")";
    rep.verdicts.push_back({"z_quantiles_bounded", bounded, os.str()});
    std::ostringstream rd;
    rd.precision(6);
    rd << "mean ||u - 1||_E1:";
    for (double r : raw_mean) rd << ' ' << r;
    rep.verdicts.push_back({"raw_deviation_shrinks", shrinking, rd.str()});
    if (linear) rep.verdicts.push_back({"linear_mode_variance", variance_ok, "3se band;" + vd.str()});
    return rep;
}

}  // namespace sfcl
