// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// sfcl command-line tool.
//
//   sfcl simulate|skeleton|oracle|rate [--config F] [--seed S] [--out DIR] [--workers W] [--override k=v]...
//   sfcl experiment <name> [...]
//
// Exit status: 0 success, 1 failed verdict or runtime failure, 2 invalid
// configuration, 3 numerical divergence.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "sfcl/harness.hpp"
#include "sfcl/linear_oracle.hpp"
#include "sfcl/rate_function.hpp"
#include "sfcl/run_config.hpp"
#include "sfcl/skeleton_solver.hpp"
#include "sfcl/spde_solver.hpp"

namespace fs = std::filesystem;
using namespace sfcl;
using nlohmann::json;

namespace {

const std::vector<std::string> kExperiments{"contraction", "clt", "mass_martingale", "regularization",
                                            "condition2_coupling", "mdp_concentration"};

void put_default(RunConfig& c, const std::string& key, const std::string& value) { c.set(key, value, "default"); }

/// Built-in configuration layer. The model block is only supplied when no
/// configuration file is given.
RunConfig defaults(const std::string& command, const std::string& experiment, bool with_model) {
    RunConfig c;
    if (with_model) {
        put_default(c, "model.flux", "burgers_clamped");
        put_default(c, "model.flux.clamp", "4");
        put_default(c, "model.diffusion", "linear");
        put_default(c, "model.diffusion.a", "1");
        put_default(c, "model.diffusion.theta", "0.5");
        put_default(c, "model.noise", "diagonal_decay");
        put_default(c, "model.noise.K", "16");
        put_default(c, "model.noise.q", "1");
        put_default(c, "model.noise.a", "1");
        put_default(c, "model.noise.b", "0.5");
    }
    put_default(c, "seed", "1");
    put_default(c, "grid.dim", "1");
    put_default(c, "grid.n", "128");
    put_default(c, "solver.dt", "2e-4");
    put_default(c, "solver.t_end", "0.5");
    if (command == "simulate") put_default(c, "initial.kind", "sine");
    if (command == "skeleton" || command == "oracle") put_default(c, "initial.kind", "sine");
    if (command == "rate") {
        put_default(c, "rate.method", "exact");
        put_default(c, "solver.flux_scheme", "spectral");
    }
    if (command != "experiment") return c;
    if (experiment == "contraction") {
        put_default(c, "grid.n", "64");
        put_default(c, "solver.eps", "1e-2");
        put_default(c, "solver.snapshots", "20");
        put_default(c, "experiment.samples", "500");
        put_default(c, "experiment.pairs", "20");
        put_default(c, "experiment.pair_amplitude", "0.3");
        put_default(c, "experiment.tol", "0.01");
    } else if (experiment == "clt") {
        put_default(c, "experiment.eps", "1e-2,1e-3,1e-4");
        put_default(c, "experiment.samples", "200");
        put_default(c, "experiment.variance_modes", "4");
        put_default(c, "solver.eta", "1e-3");
        put_default(c, "solver.flux_scheme", "spectral");
        put_default(c, "solver.snapshots", "50");
    } else if (experiment == "mass_martingale") {
        put_default(c, "solver.eps", "1e-2");
        put_default(c, "experiment.samples", "1000");
        put_default(c, "initial.kind", "sine");
    } else if (experiment == "regularization") {
        put_default(c, "experiment.regularization", "eta");
        put_default(c, "initial.kind", "sine");
        put_default(c, "solver.snapshots", "50");
    } else if (experiment == "condition2_coupling") {
        put_default(c, "experiment.eps", "1e-2,1e-4,1e-6");
        put_default(c, "experiment.samples", "200");
        put_default(c, "experiment.level", "20");
        put_default(c, "initial.kind", "sine");
        put_default(c, "solver.snapshots", "50");
    } else if (experiment == "mdp_concentration") {
        put_default(c, "experiment.a", "0.25");
        put_default(c, "experiment.eps", "1e-2,1e-3,1e-4");
        put_default(c, "experiment.samples", "200");
        put_default(c, "solver.snapshots", "50");
    }
    return c;
}

class RunDir {
public:
    RunDir(const fs::path& root, const std::string& label, const RunConfig& cfg)
        : dir_(root / (label + "-" + cfg.hash())), cfg_(cfg), label_(label) {
        fs::create_directories(dir_);
    }

    fs::path path(const std::string& name) {
        artifacts_.push_back(name);
        return dir_ / name;
    }

    void write_json(const std::string& name, const json& j) {
        std::ofstream(path(name)) << j.dump(2) << '\n';
    }

    void write_manifest(const std::string& status) {
        json m;
        m["command"] = label_;
        m["config_hash"] = cfg_.hash();
        m["seed"] = cfg_.integer("seed");
        m["config"] = cfg_.to_json();
        m["artifacts"] = artifacts_;
        m["status"] = status;
        // the only field that changes between identical runs
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        m["created"] = buf;
        std::ofstream(dir_ / "manifest.json") << m.dump(2) << '\n';
    }

    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    const RunConfig& cfg_;
    std::string label_;
    std::vector<std::string> artifacts_;
};

void write_trajectory(RunDir& run, const Trajectory& t) {
    {
        std::ofstream os(run.path("trajectory.csv"));
        t.write_csv(os);
    }
    {
        std::ofstream os(run.path("trajectory.bin"), std::ios::binary);
        t.write_binary(os);
    }
    std::ofstream os(run.path("final.bin"), std::ios::binary);
    write_snapshot(os, t.final());
}

json norms_json(const SpectralField& f) {
    return {{"l1", l1_norm(f.values())}, {"l2", l2_norm(f.values())}, {"mean", f.mean()}};
}

void check_model(const ModelSpec& m) {
    const auto rep = validate_model(m, 400);
    if (!rep.passed()) {
        std::string msg = "model fails validation:";
        for (const auto& c : rep.checks)
            if (!c.passed) msg += " " + c.name + " (" + c.detail + ")";
        throw ConfigError(msg);
    }
}

int cmd_simulate(const RunConfig& cfg, RunDir& run) {
    const auto grid = build_grid(cfg);
    const auto model = build_model(cfg);
    check_model(model);
    const auto solver = build_solver(cfg);
    const auto u0 = build_initial(cfg, grid);
    WienerPath path(static_cast<std::uint64_t>(cfg.integer("seed")), 0, model.noise.truncation);
    const auto traj = solve(u0, model, solver, solver.eps > 0.0 ? &path : nullptr);
    write_trajectory(run, traj);
    json s{{"solver_hash", traj.config_hash},
           {"final", norms_json(traj.final())},
           {"initial", norms_json(u0)},
           {"mass_drift", traj.final().mean() - u0.mean()},
           {"increment_digest", path.digest()}};
    run.write_json("summary.json", s);
    std::printf("simulate: %zu snapshots, final mean %.12g, mass drift %.3g -> %s\n", traj.times.size(),
                traj.final().mean(), traj.final().mean() - u0.mean(), run.dir().c_str());
    return 0;
}

int cmd_skeleton(const RunConfig& cfg, RunDir& run) {
    const auto grid = build_grid(cfg);
    const auto model = build_model(cfg);
    check_model(model);
    auto solver = build_solver(cfg);
    const auto ctl = build_control(cfg, solver.t_end, model.noise.truncation, cfg.integer("seed"));
    {
        std::ofstream os(run.path("control.csv"));
        ctl.write_csv(os);
    }
    const bool linear = cfg.boolean("skeleton.linear", false);
    const auto traj = linear ? solve_mdp_skeleton(ctl, model, grid, solver)
                             : solve_skeleton(build_initial(cfg, grid), model, ctl, solver);
    write_trajectory(run, traj);
    run.write_json("summary.json", {{"linear", linear},
                                    {"control_energy", ctl.energy()},
                                    {"final", norms_json(traj.final())},
                                    {"solver_hash", traj.config_hash}});
    std::printf("skeleton%s: control energy %.6g, final L2 %.6g -> %s\n", linear ? " (linear)" : "", ctl.energy(),
                l2_norm(traj.final().values()), run.dir().c_str());
    return 0;
}

int cmd_oracle(const RunConfig& cfg, RunDir& run) {
    const auto grid = build_grid(cfg);
    const auto model = build_model(cfg);
    auto solver = build_solver(cfg);
    const auto kind = cfg.str("oracle.kind", "duhamel");
    if (kind == "constant") {
        const auto u0 = build_initial(cfg, grid);
        const auto f = exact_constant_solution(u0, model, solver.t_end);
        std::ofstream os(run.path("oracle.bin"), std::ios::binary);
        write_snapshot(os, f);
        run.write_json("summary.json", {{"kind", kind}, {"value", f[0]}, {"t", solver.t_end}});
        std::printf("oracle constant: u(T) = %.17g\n", f[0]);
        return 0;
    }
    const auto lin = linearize_at(model, 1.0);
    const auto modes = mode_params(lin, grid, solver.eta, solver.gamma);
    if (kind == "star") {
        const auto count = cfg.integer("oracle.modes", 8);
        json rows = json::array();
        for (long long k = 0; k <= count && k < grid.points_per_axis() / 2; ++k) {
            const auto& m = modes[grid.mode_index({static_cast<int>(k), 0})];
            rows.push_back({{"k", k},
                            {"mu_re", m.mu.real()},
                            {"mu_im", m.mu.imag()},
                            {"variance", star_moments(m, solver.t_end).variance}});
        }
        run.write_json("star_moments.json", {{"t", solver.t_end}, {"eta", solver.eta}, {"modes", rows}});
        std::printf("oracle star: %zu modes at t = %g\n", rows.size(), solver.t_end);
        return 0;
    }
    if (kind != "duhamel") cfg.fail("oracle.kind", "expects duhamel, star or constant");
    const auto ctl = build_control(cfg, solver.t_end, model.noise.truncation, cfg.integer("seed"));
    const auto exact = duhamel_mdp_skeleton(ctl, lin, grid, solver.t_end, solver.eta, solver.gamma);
    const auto num = solve_mdp_skeleton(ctl, model, grid, solver).final();
    const double ref = l2_norm(exact.values());
    const double rel = ref > 0 ? l2_norm((num - exact).values()) / ref : l2_norm(num.values());
    {
        std::ofstream os(run.path("control.csv"));
        ctl.write_csv(os);
    }
    {
        std::ofstream os(run.path("oracle.bin"), std::ios::binary);
        write_snapshot(os, exact);
    }
    {
        std::ofstream os(run.path("oracle.csv"));
        write_csv(os, exact);
    }
    run.write_json("summary.json", {{"kind", kind}, {"relative_l2_error_of_solver", rel}, {"oracle_l2", ref}});
    std::printf("oracle duhamel: solver relative L2 error %.3e\n", rel);
    return 0;
}

int cmd_rate(const RunConfig& cfg, RunDir& run) {
    const auto grid = build_grid(cfg);
    const auto model = build_model(cfg);
    auto solver = build_solver(cfg);
    const auto target = build_target(cfg, grid);
    const auto method = cfg.str("rate.method");
    RateReport rep;
    if (method == "exact") {
        MdpRateOptions o;
        o.control_intervals = static_cast<int>(cfg.integer("rate.control_intervals", 0));
        o.output_intervals = static_cast<int>(cfg.integer("rate.output_intervals", 200));
        o.eta = solver.eta;
        o.gamma = solver.gamma;
        rep = mdp_rate_exact(target, model, solver.t_end, o);
    } else if (method == "iterative") {
        check_model(model);
        LdpRateOptions o;
        o.control_intervals = static_cast<int>(cfg.integer("rate.control_intervals", 10));
        o.max_outer_iterations = static_cast<int>(cfg.integer("rate.max_outer_iterations", o.max_outer_iterations));
        o.max_inner_iterations = static_cast<int>(cfg.integer("rate.max_inner_iterations", o.max_inner_iterations));
        o.penalty = cfg.real("rate.penalty", o.penalty);
        o.residual_tolerance = cfg.real("rate.residual_tolerance", o.residual_tolerance);
        const auto u0 = build_initial(cfg, grid);
        rep = ldp_rate_iterative(target, u0, model, solver, o);
    } else {
        cfg.fail("rate.method", "expects exact or iterative");
    }
    std::string csv;
    if (rep.control) {
        csv = "control.csv";
        std::ofstream os(run.path(csv));
        rep.control->write_csv(os);
    }
    run.write_json("rate.json", to_json(rep, csv));
    if (rep.infinite) {
        std::printf("rate (%s): +inf, %zu unreachable modes\n", rep.method.c_str(), rep.unreachable_modes.size());
    } else {
        std::printf("rate (%s): %.10g, residual %.3e%s\n", rep.method.c_str(), rep.value, rep.residual,
                    rep.converged ? "" : " (not converged)");
    }
    return rep.converged ? 0 : 1;
}

std::vector<std::pair<SpectralField, SpectralField>> random_pairs(const GridSpec& g, std::size_t count, double amp,
                                                                  std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x9a1u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> nd;
    auto draw = [&] {
        std::array<double, 8> c{};
        for (auto& x : c) x = nd(rng);
        const double shift = 0.2 * nd(rng);
        return SpectralField::from_function(g, [=](Point x) {
            double s = 1.0 + shift;
            for (int k = 1; k <= 4; ++k) {
                s += amp / k * (c[2 * k - 2] * std::cos(kTwoPi * k * x[0]) + c[2 * k - 1] * std::sin(kTwoPi * k * x[0]));
            }
            return s;
        });
    };
    std::vector<std::pair<SpectralField, SpectralField>> out;
    for (std::size_t i = 0; i < count; ++i) {
        auto a = draw();
        auto b = draw();
        out.emplace_back(std::move(a), std::move(b));
    }
    return out;
}

int cmd_experiment(const RunConfig& cfg, RunDir& run, const std::string& name, int workers) {
    const auto grid = build_grid(cfg);
    const auto model = build_model(cfg);
    check_model(model);
    const auto solver = build_solver(cfg);
    HarnessOptions opts{static_cast<std::uint64_t>(cfg.integer("seed")), workers};
    const int samples = static_cast<int>(cfg.integer("experiment.samples", 200));
    ExperimentReport rep;
    if (name == "contraction") {
        const auto pairs = random_pairs(grid, static_cast<std::size_t>(cfg.integer("experiment.pairs", 20)),
                                        cfg.real("experiment.pair_amplitude", 0.3), opts.seed);
        rep = contraction_experiment(pairs, model, solver, samples, opts, cfg.real("experiment.tol", 0.01));
    } else if (name == "clt") {
        rep = clt_experiment(SpectralField::constant(grid, 1.0), model, solver, cfg.reals("experiment.eps"), samples,
                             opts, static_cast<int>(cfg.integer("experiment.variance_modes", 4)));
    } else if (name == "mass_martingale") {
        rep = mass_martingale_experiment(build_initial(cfg, grid), model, solver, samples, opts);
    } else if (name == "regularization") {
        const auto which = cfg.str("experiment.regularization");
        Regularization r;
        std::vector<double> ladder;
        if (which == "eta") {
            r = Regularization::eta;
            ladder = {1e-2, 1e-3, 1e-4, 1e-5};
        } else if (which == "gamma") {
            r = Regularization::gamma;
            ladder = {1e-4, 1e-5, 1e-6, 1e-7};
        } else {
            cfg.fail("experiment.regularization", "expects eta or gamma");
        }
        if (cfg.has("experiment.ladder")) ladder = cfg.reals("experiment.ladder");
        const auto ctl = build_control(cfg, solver.t_end, model.noise.truncation, opts.seed);
        rep = regularization_experiment(build_initial(cfg, grid), model, ctl, solver, ladder, r, opts);
    } else if (name == "condition2_coupling") {
        const auto ctl = build_control(cfg, solver.t_end, model.noise.truncation, opts.seed);
        std::optional<double> delta;
        if (cfg.has("experiment.delta")) delta = cfg.real("experiment.delta");
        rep = condition2_coupling_experiment(build_initial(cfg, grid), model, {ctl}, cfg.real("experiment.level"),
                                             solver, cfg.reals("experiment.eps"), samples, opts, delta);
    } else if (name == "mdp_concentration") {
        rep = mdp_concentration_experiment(SpectralField::constant(grid, 1.0), model, cfg.real("experiment.a"), solver,
                                           cfg.reals("experiment.eps"), samples, opts,
                                           cfg.real("experiment.tightness_factor", 2.0));
    } else {
        throw ConfigError("unknown experiment '" + name + "'");
    }
    auto j = rep.to_json();
    j["config_hash"] = cfg.hash();
    run.write_json("report.json", j);
    {
        std::ofstream os(run.path("report.csv"));
        rep.write_csv(os);
    }
    for (const auto& v : rep.verdicts) {
        std::printf("%s %s: %s\n", v.passed ? "PASS" : "FAIL", v.name.c_str(), v.detail.c_str());
    }
    return rep.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic fractional conservation laws: solvers, oracles, rate functions and experiments"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    int workers = 0;
    std::vector<std::string> overrides;
    std::string experiment;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "configuration file (key = value lines or JSON)");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--out", out_dir, "output root directory");
        sub->add_option("--workers", workers, "worker threads (0: logical cores)")->check(CLI::NonNegativeNumber);
        sub->add_option("--override", overrides, "key=value, applied after the file")->take_all();
    };
    add_common(app.add_subcommand("simulate", "integrate the stochastic equation"));
    add_common(app.add_subcommand("skeleton", "integrate the controlled skeleton equation"));
    add_common(app.add_subcommand("oracle", "evaluate a closed-form reference solution"));
    add_common(app.add_subcommand("rate", "evaluate the rate function at a target"));
    auto* exp = app.add_subcommand("experiment", "run a Monte Carlo experiment");
    exp->add_option("name", experiment, "experiment name")->required()->check(CLI::IsMember(kExperiments));
    add_common(exp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        RunConfig cfg = defaults(command, experiment, config_path.empty());
        if (!config_path.empty()) cfg.merge_file(config_path);
        for (const auto& kv : overrides) cfg.merge_override(kv);
        cfg.set("command", command, "command line");
        if (command == "experiment") cfg.set("experiment.name", experiment, "command line");
        if (seed) cfg.set("seed", std::to_string(*seed), "--seed");
        if (!out_dir.empty()) cfg.set("output_dir", out_dir, "--out");
        const fs::path root = cfg.str("output_dir", "runs");

        RunDir run(root, command == "experiment" ? experiment : command, cfg);
        int status = 0;
        try {
            if (command == "simulate") status = cmd_simulate(cfg, run);
            else if (command == "skeleton") status = cmd_skeleton(cfg, run);
            else if (command == "oracle") status = cmd_oracle(cfg, run);
            else if (command == "rate") status = cmd_rate(cfg, run);
            else status = cmd_experiment(cfg, run, experiment, workers);
        } catch (...) {
            run.write_manifest("error");
            throw;
        }
        run.write_manifest(status == 0 ? "ok" : "failed");
        return status;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ParameterError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const UnsupportedInput& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
