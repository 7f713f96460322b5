// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run. Prints one PASS/FAIL line per criterion with the measured
// quantity, the pinned tolerance and the wall time against its budget.
// Exit status is nonzero when any criterion fails.
#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "sfcl/harness.hpp"
#include "sfcl/rate_function.hpp"

using namespace sfcl;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

int failures = 0;
std::vector<int> selected;  // empty: all

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < budget_s;
    const bool ok = o.passed && in_time;
    if (!ok) ++failures;
    std::printf("%s %d %s: %s [%.1f s, budget %.0f s%s]\n", ok ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
                budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
}

ModelSpec base_model() {
    return {FluxSpec::burgers_clamped(4.0), DiffusionSpec::linear(1.0, 0.5), NoiseSpec::diagonal_decay(16, 1.0, 1.0, 0.5)};
}

SolverConfig base_config(double dt = 2e-4, double T = 0.5, int snapshots = 50) {
    SolverConfig c;
    c.dt = dt;
    c.t_end = T;
    c.snapshot_intervals = snapshots;
    return c;
}

Control random_control(double T, int intervals, int K, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> c(static_cast<std::size_t>(intervals * K));
    for (auto& x : c) x = nd(rng);
    return Control::uniform(T, intervals, c, K);
}

SpectralField random_data(const GridSpec& g, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    std::array<double, 8> c{};
    for (auto& x : c) x = nd(rng);
    const double mean = 1.0 + 0.2 * nd(rng);
    return SpectralField::from_function(g, [=](Point x) {
        double s = mean;
        for (int k = 1; k <= 4; ++k) {
            s += 0.3 / k * (c[2 * k - 2] * std::cos(kTwoPi * k * x[0]) + c[2 * k - 1] * std::sin(kTwoPi * k * x[0]));
        }
        return s;
    });
}

std::string verdicts(const ExperimentReport& r) {
    std::string s;
    for (const auto& v : r.verdicts) s += (s.empty() ? "" : "; ") + v.name + (v.passed ? " ok" : " FAILED") + " (" + v.detail + ")";
    return s;
}

double rel_l2(const SpectralField& a, const SpectralField& ref) {
    return l2_norm((a - ref).values()) / l2_norm(ref.values());
}

// 1: fractional Laplacian on Fourier modes
Outcome spectral_exactness() {
    double worst = 0.0;
    for (int dim : {1, 2}) {
        GridSpec g(dim, dim == 1 ? 128 : 32);
        for (double theta : {0.1, 0.25, 0.5, 0.75, 1.0}) {
            for (int k1 = 1; k1 <= 6; ++k1) {
                const int k2 = dim == 2 ? k1 % 3 : 0;
                auto u = SpectralField::from_function(g, [=](Point x) { return std::cos(kTwoPi * (k1 * x[0] + k2 * x[1])); });
                const double lam = std::pow(kTwoPi * std::sqrt(static_cast<double>(k1 * k1 + k2 * k2)), 2 * theta);
                const auto r = apply_fractional_laplacian(u, theta);
                for (std::size_t j = 0; j < g.size(); ++j) worst = std::max(worst, std::abs(r[j] - lam * u[j]) / lam);
            }
        }
    }
    bool bitwise = true;
    GridSpec g(2, 32);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double ksq = static_cast<double>(i);
        bitwise = bitwise && fractional_symbol(ksq, 1.0) == laplacian_symbol(ksq);
    }
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    std::vector<double> v(g.size());
    for (auto& x : v) x = nd(rng);
    SpectralField u(g, v);
    bitwise = bitwise && apply_fractional_laplacian(u, 1.0) == apply_negative_laplacian(u);
    std::ostringstream os;
    os << "max relative eigenvalue error " << worst << " (tol 1e-12), theta=1 multiplier bitwise "
       << (bitwise ? "equal" : "DIFFERENT");
    return {worst <= 1e-12 && bitwise, os.str()};
}

// 2: u = 1 is a steady state of the deterministic solver
Outcome constant_steady_state() {
    GridSpec g(1, 128);
    auto c = base_config(5e-5, 0.5, 10);
    const auto traj = solve(SpectralField::constant(g, 1.0), base_model(), c);
    const std::size_t steps = static_cast<std::size_t>(std::llround(c.t_end / c.dt));
    double worst = 0.0;
    for (const auto& s : traj.snapshots)
        for (double v : s.values()) worst = std::max(worst, std::abs(v - 1.0));
    std::ostringstream os;
    os << steps << " steps, max |u - 1| = " << worst << " (tol 1e-12)";
    return {steps >= 10000 && worst <= 1e-12, os.str()};
}

// 3: linear skeleton solver against the Duhamel formula
Outcome linear_oracle() {
    GridSpec g(1, 128);
    const auto model = base_model();
    const auto ctl = random_control(0.5, 10, 16, 42);
    const auto exact = duhamel_mdp_skeleton(ctl, linearize_at(model, 1.0), g, 0.5);
    const double e1 = rel_l2(solve_mdp_skeleton(ctl, model, g, base_config(1e-4, 0.5, 1)).final(), exact);
    const double e2 = rel_l2(solve_mdp_skeleton(ctl, model, g, base_config(5e-5, 0.5, 1)).final(), exact);
    const double ratio = e1 / e2;
    std::ostringstream os;
    os << "relative L2 error " << e1 << " at dt=1e-4 (tol 1e-3), " << e2 << " at dt=5e-5, ratio " << ratio
       << " (expect 2 +- 20%)";
    return {e1 <= 1e-3 && ratio >= 1.6 && ratio <= 2.4, os.str()};
}

// 4: expected L1 contraction along coupled noise
Outcome contraction(ExperimentReport* keep) {
    GridSpec g(1, 64);
    std::mt19937_64 rng(7);
    std::vector<std::pair<SpectralField, SpectralField>> pairs;
    for (int p = 0; p < 20; ++p) {
        auto a = random_data(g, rng);
        auto b = random_data(g, rng);
        pairs.emplace_back(std::move(a), std::move(b));
    }
    auto c = base_config(2e-4, 0.5, 20);
    c.eps = 1e-2;
    *keep = contraction_experiment(pairs, base_model(), c, 500, {20260101, 0}, 1e-2);
    return {keep->passed(), "20 pairs, M=500, eps=1e-2, factor 1.01 + 3 stderr: " + verdicts(*keep)};
}

// 5: central limit behaviour around u = 1
Outcome clt() {
    GridSpec g(1, 128);
    auto c = base_config(2e-4, 0.5, 50);
    c.eta = 1e-3;
    c.flux_scheme = FluxScheme::spectral;
    const auto r = clt_experiment(SpectralField::constant(g, 1.0), base_model(), c, {1e-2, 1e-3, 1e-4}, 200,
                                  {20260101, 0}, 4);
    return {r.passed(), "M=200, eta=1e-3: " + verdicts(r)};
}

// least-norm control on m equal intervals from unit-control Duhamel columns
double brute_force_rate(const SpectralField& target, const ModelSpec& lin, double T, int m) {
    const GridSpec& g = target.grid();
    const int K = lin.noise.truncation;
    Eigen::MatrixXd A(static_cast<Eigen::Index>(g.size()), m * K);
    for (int col = 0; col < m * K; ++col) {
        std::vector<double> e(static_cast<std::size_t>(m * K), 0.0);
        e[static_cast<std::size_t>(col)] = 1.0;
        const auto f = duhamel_mdp_skeleton(Control::uniform(T, m, e, K), lin, g, T);
        for (std::size_t j = 0; j < g.size(); ++j) A(static_cast<Eigen::Index>(j), col) = f[j];
    }
    Eigen::VectorXd b(static_cast<Eigen::Index>(g.size()));
    for (std::size_t j = 0; j < g.size(); ++j) b(static_cast<Eigen::Index>(j)) = target[j];
    const double dt = T / m;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A / std::sqrt(dt));
    cod.setThreshold(1e-12);
    const Eigen::VectorXd y = cod.solve(b);
    return 0.5 * y.squaredNorm();
}

// 6: rate function values
Outcome rate_function() {
    GridSpec g(1, 32);
    const auto model = base_model();
    const auto lin = linearize_at(model, 1.0);
    const double T = 0.5;
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> kd(1, 8);
    std::normal_distribution<double> nd;
    double worst_bf = 0.0, worst_scale = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const int k = kd(rng);
        const double cs = 0.1 * nd(rng), sn = 0.1 * nd(rng);
        const auto z = SpectralField::from_function(
            g, [=](Point x) { return cs * std::cos(kTwoPi * k * x[0]) + sn * std::sin(kTwoPi * k * x[0]); });
        MdpRateOptions o;
        o.control_intervals = 200;
        const double exact = mdp_rate_exact(z, model, T, o).value;
        const double bf = brute_force_rate(z, lin, T, 200);
        worst_bf = std::max(worst_bf, std::abs(exact - bf) / bf);
        const double base = mdp_rate_exact(z, model, T).value;
        for (double a : {-2.5, 0.3, 4.0}) {
            const double scaled = mdp_rate_exact(a * z, model, T).value;
            worst_scale = std::max(worst_scale, std::abs(scaled - a * a * base) / (a * a * base));
        }
    }

    // iterative solver on the linearized model
    const double Ti = 0.25;
    const int parts = 8;
    auto c = base_config(1e-4, Ti, 1);
    c.flux_scheme = FluxScheme::spectral;
    const auto z = SpectralField::from_function(g, [](Point x) {
        return 0.05 + 0.04 * std::sin(kTwoPi * x[0]) - 0.03 * std::cos(kTwoPi * 2 * x[0]);
    });
    const auto one = SpectralField::constant(g, 1.0);
    LdpRateOptions lo;
    lo.control_intervals = parts;
    const auto it = ldp_rate_iterative(one + z, one, lin, c, lo);
    MdpRateOptions mo;
    mo.control_intervals = parts;
    const double ex = mdp_rate_exact(z, lin, Ti, mo).value;
    const double gap = std::abs(it.value - ex) / ex;

    std::ostringstream os;
    os << "vs brute force (m=200, 10 targets) max rel " << worst_bf << " (tol 1e-6); iterative " << it.value
       << " vs exact " << ex << " rel " << gap << " (tol 1e-2, converged " << it.converged
       << "); quadratic scaling max rel " << worst_scale << " (tol 1e-10)";
    return {worst_bf <= 1e-6 && it.converged && gap <= 1e-2 && worst_scale <= 1e-10, os.str()};
}

SpectralField sine_data(const GridSpec& g) {
    return SpectralField::from_function(g, [](Point x) { return 1.0 + 0.3 * std::sin(kTwoPi * x[0]); });
}

// 7: Cauchy property of the eta and gamma ladders
Outcome regularization() {
    GridSpec g(1, 128);
    const auto ctl = random_control(0.5, 10, 16, 3);
    const auto c = base_config();
    const auto re = regularization_experiment(sine_data(g), base_model(), ctl, c, {1e-2, 1e-3, 1e-4, 1e-5},
                                              Regularization::eta);
    const auto rg = regularization_experiment(sine_data(g), base_model(), ctl, c, {1e-4, 1e-5, 1e-6, 1e-7},
                                              Regularization::gamma);
    return {re.passed() && rg.passed(), "eta: " + verdicts(re) + " | gamma: " + verdicts(rg)};
}

// 8: controlled solution against the skeleton as eps -> 0
Outcome condition2() {
    GridSpec g(1, 128);
    const auto ctl = random_control(0.5, 10, 16, 3);
    const auto r = condition2_coupling_experiment(sine_data(g), base_model(), {ctl}, 2.0 * ctl.energy() + 1.0,
                                                  base_config(), {1e-2, 1e-4, 1e-6}, 200, {20260101, 0});
    return {r.passed(), "M=200: " + verdicts(r)};
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// 9: reruns with the same seed agree bitwise for 1 and 4 workers
Outcome reproducibility(const ExperimentReport& full_contraction) {
    GridSpec g(1, 32);
    const auto model = base_model();
    auto c = base_config(2e-4, 0.1, 10);
    const auto ctl = random_control(0.1, 5, 16, 3);
    std::mt19937_64 rng(7);
    std::vector<std::pair<SpectralField, SpectralField>> pairs;
    for (int p = 0; p < 3; ++p) {
        auto a = random_data(g, rng);
        auto b = random_data(g, rng);
        pairs.emplace_back(std::move(a), std::move(b));
    }
    using Run = std::function<ExperimentReport(const HarnessOptions&)>;
    const std::vector<std::pair<std::string, Run>> runs{
        {"contraction",
         [&](const HarnessOptions& o) {
             auto cc = c;
             cc.eps = 1e-2;
             return contraction_experiment(pairs, model, cc, 100, o);
         }},
        {"clt",
         [&](const HarnessOptions& o) {
             auto cc = c;
             cc.eta = 1e-3;
             cc.flux_scheme = FluxScheme::spectral;
             return clt_experiment(SpectralField::constant(g, 1.0), model, cc, {1e-2, 1e-3}, 100, o);
         }},
        {"mass_martingale",
         [&](const HarnessOptions& o) {
             auto cc = c;
             cc.eps = 1e-2;
             return mass_martingale_experiment(sine_data(g), model, cc, 500, o);
         }},
        {"condition2_coupling",
         [&](const HarnessOptions& o) {
             return condition2_coupling_experiment(sine_data(g), model, {ctl}, 2.0 * ctl.energy() + 1.0, c,
                                                   {1e-2, 1e-4}, 100, o);
         }},
        {"mdp_concentration",
         [&](const HarnessOptions& o) {
             return mdp_concentration_experiment(SpectralField::constant(g, 1.0), model, 0.25, c, {1e-2, 1e-3}, 100,
                                                 o);
         }},
    };
    bool ok = true;
    std::string detail;
    for (const auto& [name, run] : runs) {
        const auto a = run({99, 1}), b = run({99, 4}), again = run({99, 4});
        const bool same = same_bits(a.statistics(), b.statistics()) && same_bits(b.statistics(), again.statistics()) &&
                          a.increment_digest == b.increment_digest && a.to_json() == b.to_json();
        ok = ok && same;
        detail += name + (same ? " identical, " : " DIFFERS, ");
    }
    // the full contraction run repeated with 4 workers
    auto cc = base_config(2e-4, 0.5, 20);
    cc.eps = 1e-2;
    GridSpec g64(1, 64);
    std::mt19937_64 rng64(7);
    std::vector<std::pair<SpectralField, SpectralField>> first;
    for (int p = 0; p < 2; ++p) {
        auto a = random_data(g64, rng64);
        auto b = random_data(g64, rng64);
        first.emplace_back(std::move(a), std::move(b));
    }
    const auto sub = contraction_experiment(first, base_model(), cc, 500, {20260101, 4}, 1e-2);
    // pair cells of the full run come first and in pair order
    const auto full = full_contraction.statistics();
    const auto part = sub.statistics();
    const bool prefix = !full.empty() && part.size() <= full.size() &&
                        std::memcmp(part.data(), full.data(), part.size() * sizeof(double)) == 0;
    ok = ok && prefix;
    detail += std::string("full-scale contraction pairs 1-2 rerun with 4 workers ") + (prefix ? "identical" : "DIFFER");
    return {ok, detail};
}

}  // namespace

// Optional arguments select criteria by number.
int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    std::printf("sfcl acceptance (workers=%d)\n", default_workers());
    ExperimentReport contraction_report;
    criterion(1, "spectral_exactness", 1, spectral_exactness);
    criterion(2, "constant_steady_state", 5, constant_steady_state);
    criterion(3, "linear_oracle_equivalence", 30, linear_oracle);
    criterion(4, "l1_contraction", 300, [&] { return contraction(&contraction_report); });
    criterion(5, "central_limit", 600, clt);
    criterion(6, "rate_function", 120, rate_function);
    criterion(7, "regularization_ladders", 300, regularization);
    criterion(8, "condition2_coupling", 600, condition2);
    criterion(9, "reproducibility", 600, [&] { return reproducibility(contraction_report); });
    std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
