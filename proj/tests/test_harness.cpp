#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <sstream>

#include "sfcl/harness.hpp"

using namespace sfcl;

namespace {

ModelSpec burgers(int K = 8) {
    return {FluxSpec::burgers_clamped(4.0), DiffusionSpec::linear(1.0, 0.5), NoiseSpec::diagonal_decay(K, 1.0, 1.0, 0.5)};
}

SolverConfig small_config(double T = 0.1) {
    SolverConfig c;
    c.dt = 5e-4;
    c.t_end = T;
    c.snapshot_intervals = 10;
    return c;
}

SpectralField smooth(const GridSpec& g, double shift, double amp) {
    return SpectralField::from_function(g, [=](Point x) { return 1.0 + shift + amp * std::sin(kTwoPi * x[0]) + 0.1 * amp * std::cos(kTwoPi * 3 * x[0]); });
}

Control random_control(double T, int m, int K, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    std::vector<double> c(m * K);
    for (auto& x : c) x = n(rng);
    return Control::uniform(T, m, c, K);
}

}  // namespace

TEST(Summaries, MeanStderrQuantile) {
    std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    auto s = summarize(xs);
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_DOUBLE_EQ(s.variance, 5.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.stderr_, std::sqrt(5.0 / 12.0));
    EXPECT_DOUBLE_EQ(quantile(xs, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(quantile(xs, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile(xs, 1.0), 4.0);
    EXPECT_THROW(quantile({}, 0.5), ShapeError);
}

TEST(ParallelFor, SlotsAndErrors) {
    for (int w : {1, 3, 8}) {
        std::vector<std::size_t> out(100, 0);
        parallel_for(out.size(), w, [&](std::size_t i) { out[i] = i * i; });
        for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], i * i);
    }
    EXPECT_THROW(parallel_for(10, 4, [](std::size_t i) {
                     if (i == 3) throw ConfigError("boom");
                 }),
                 ConfigError);
    std::atomic<int> calls{0};
    parallel_for(0, 4, [&](std::size_t) { ++calls; });
    EXPECT_EQ(calls.load(), 0);
}

TEST(Contraction, IdenticalDataStayIdentical) {
    GridSpec g(1, 32);
    auto c = small_config();
    c.eps = 1e-2;
    auto u = smooth(g, 0.0, 0.3);
    auto rep = contraction_experiment({{u, u}}, burgers(), c, 100);
    for (const auto& cell : rep.cells) EXPECT_EQ(cell.value, 0.0);
    EXPECT_TRUE(rep.passed());
}

TEST(Contraction, DeterministicMonotoneSchemeContractsPathwise) {
    GridSpec g(1, 64);
    ModelSpec m{FluxSpec::burgers_clamped(4.0), DiffusionSpec::zero(0.5), NoiseSpec::diagonal_decay(4)};
    auto c = small_config(0.3);
    auto rep = contraction_experiment({{smooth(g, 0.0, 0.8), smooth(g, 0.1, -0.5)}}, m, c, 100, {}, 0.0);
    double prev = INFINITY;
    for (const auto& cell : rep.cells) {
        EXPECT_LE(cell.value, prev + 1e-14);
        EXPECT_EQ(cell.stderr_, 0.0);
        prev = cell.value;
    }
    EXPECT_TRUE(rep.passed());
}

TEST(Contraction, NoisyPairsPass) {
    GridSpec g(1, 32);
    auto c = small_config();
    c.eps = 1e-2;
    auto rep = contraction_experiment({{smooth(g, 0.0, 0.3), smooth(g, 0.05, -0.2)}}, burgers(), c, 100);
    EXPECT_TRUE(rep.passed()) << rep.verdicts[0].detail;
    EXPECT_NE(rep.increment_digest, 0u);
}

TEST(Contraction, Validation) {
    GridSpec g(1, 32), h(1, 16);
    auto c = small_config();
    EXPECT_THROW(contraction_experiment({{smooth(g, 0, 0.1), smooth(h, 0, 0.1)}}, burgers(), c, 100), ConfigError);
    EXPECT_THROW(contraction_experiment({{smooth(g, 0, 0.1), smooth(g, 0, 0.2)}}, burgers(), c, 99), ConfigError);
    EXPECT_THROW(contraction_experiment({}, burgers(), c, 100), ConfigError);
}

TEST(Clt, LinearModelDiscrepancyIsDiscretizationOnly) {
    // For linear F, Phi and frozen noise, w does not depend on eps at all.
    GridSpec g(1, 32);
    auto lin = linearize_at(burgers(4));
    auto c = small_config();
    c.eta = 1e-3;
    c.flux_scheme = FluxScheme::spectral;
    auto rep = clt_experiment(SpectralField::constant(g, 1.0), lin, c, {1e-2, 1e-4}, 100);
    const double a = rep.cells[0].value, b = rep.cells[1].value;
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(a, b, 1e-6 * a);
}

TEST(Clt, BurgersStatisticDecreases) {
    GridSpec g(1, 32);
    auto c = small_config(0.2);
    c.eta = 1e-3;
    c.flux_scheme = FluxScheme::spectral;
    auto rep = clt_experiment(SpectralField::constant(g, 1.0), burgers(4), c, {1e-2, 1e-3, 1e-4}, 100);
    EXPECT_TRUE(rep.verdicts[0].passed) << rep.verdicts[0].detail;
    EXPECT_TRUE(rep.verdicts[1].passed) << rep.verdicts[1].detail;
}

TEST(Clt, Validation) {
    GridSpec g(1, 32);
    auto c = small_config();
    EXPECT_THROW(clt_experiment(smooth(g, 0, 0.1), burgers(), c, {1e-2, 1e-3}, 100), UnsupportedInput);
    EXPECT_THROW(clt_experiment(SpectralField::constant(g, 2.0), burgers(), c, {1e-2, 1e-3}, 100), UnsupportedInput);
    EXPECT_THROW(clt_experiment(SpectralField::constant(g, 1.0), burgers(), c, {1e-3, 1e-2}, 100), ConfigError);
    EXPECT_THROW(clt_experiment(SpectralField::constant(g, 1.0), burgers(), c, {1e-2, 1e-3}, 50), ConfigError);
}

TEST(MassMartingale, DeterministicAndAdditive) {
    GridSpec g(1, 32);
    auto c = small_config();
    auto det = mass_martingale_experiment(smooth(g, 0, 0.3), burgers(), c, 500);
    EXPECT_LE(std::abs(det.cells[0].value), 1e-12);
    EXPECT_TRUE(det.passed());
    c.eps = 1e-2;
    auto add = mass_martingale_experiment(smooth(g, 0, 0.3), linearize_at(burgers()), c, 500);
    ASSERT_EQ(add.cells.size(), 2u);
    EXPECT_TRUE(add.passed()) << add.verdicts[1].detail;
    EXPECT_THROW(mass_martingale_experiment(smooth(g, 0, 0.3), burgers(), c, 499), ConfigError);
}

TEST(Regularization, ConstantStateHasZeroIncrements) {
    GridSpec g(1, 32);
    auto rep = regularization_experiment(SpectralField::constant(g, 1.0), burgers(), Control::zero(0.1, 8), small_config(),
                                         {1e-2, 1e-3, 1e-4}, Regularization::eta);
    for (const auto& cell : rep.cells) EXPECT_EQ(cell.value, 0.0);
    EXPECT_TRUE(rep.passed());
}

TEST(Regularization, LinearIncrementsScaleWithLadderGap) {
    GridSpec g(1, 32);
    auto lin = linearize_at(burgers());
    auto c = small_config(0.2);
    c.flux_scheme = FluxScheme::spectral;
    const std::vector<double> ladder{1e-3, 1e-4, 1e-5, 1e-6};
    auto rep = regularization_experiment(smooth(g, 0, 0.3), lin, random_control(0.2, 4, 8, 1), c, ladder,
                                         Regularization::eta);
    std::vector<double> ratio;
    for (std::size_t i = 0; i + 1 < ladder.size(); ++i) ratio.push_back(rep.cells[i].value / (ladder[i] - ladder[i + 1]));
    for (double r : ratio) EXPECT_NEAR(r / ratio.back(), 1.0, 0.05);
    EXPECT_TRUE(rep.passed());
}

TEST(Regularization, BurgersLadders) {
    GridSpec g(1, 64);
    auto c = small_config(0.2);
    auto ctl = random_control(0.2, 4, 8, 2);
    auto eta = regularization_experiment(smooth(g, 0, 0.3), burgers(), ctl, c, {1e-2, 1e-3, 1e-4, 1e-5}, Regularization::eta);
    EXPECT_TRUE(eta.passed()) << eta.verdicts[0].detail;
    auto gam = regularization_experiment(smooth(g, 0, 0.3), burgers(), ctl, c, {1e-4, 1e-5, 1e-6, 1e-7}, Regularization::gamma);
    EXPECT_TRUE(gam.passed()) << gam.verdicts[0].detail;
    EXPECT_EQ(gam.name, "regularization_gamma");
    EXPECT_THROW(regularization_experiment(smooth(g, 0, 0.3), burgers(), ctl, c, {1e-2, 1e-3}, Regularization::eta), ConfigError);
}

TEST(Condition2, ZeroNoiseAndValidation) {
    GridSpec g(1, 32);
    auto c = small_config();
    auto ctl = random_control(0.1, 2, 8, 4);
    auto rep = condition2_coupling_experiment(smooth(g, 0, 0.3), burgers(), {ctl}, 2 * ctl.energy(), c, {1e-2, 0.0}, 20);
    EXPECT_EQ(rep.cells[1].value, 0.0);
    EXPECT_EQ(rep.cells[1].extra["mean_e1_distance"].get<double>(), 0.0);
    EXPECT_THROW(condition2_coupling_experiment(smooth(g, 0, 0.3), burgers(), {ctl}, ctl.energy(), c, {1e-2, 0.0}, 20),
                 ConfigError);
}

TEST(Condition2, FractionsShrink) {
    GridSpec g(1, 32);
    auto c = small_config();
    auto ctl = random_control(0.1, 2, 8, 5);
    auto rep = condition2_coupling_experiment(smooth(g, 0, 0.3), burgers(), {ctl, Control::zero(0.1, 8)},
                                              2 * ctl.energy() + 1, c, {1e-1, 1e-3, 1e-5}, 100, {}, 0.002);
    EXPECT_TRUE(rep.passed()) << rep.verdicts[0].detail;
    EXPECT_GT(rep.cells[0].value, 0.0);
}

TEST(MdpConcentration, Validation) {
    GridSpec g(1, 32);
    auto one = SpectralField::constant(g, 1.0);
    auto c = small_config();
    for (double a : {0.0, 0.5, -0.1, 0.7}) {
        EXPECT_THROW(mdp_concentration_experiment(one, burgers(), a, c, {1e-2, 1e-3}, 10), ParameterError);
    }
    EXPECT_THROW(mdp_concentration_experiment(smooth(g, 0, 0.1), burgers(), 0.25, c, {1e-2, 1e-3}, 10), UnsupportedInput);
}

TEST(MdpConcentration, LinearVarianceScaling) {
    GridSpec g(1, 32);
    auto lin = linearize_at(burgers(4));
    auto c = small_config(0.2);
    c.flux_scheme = FluxScheme::spectral;
    auto rep = mdp_concentration_experiment(SpectralField::constant(g, 1.0), lin, 0.25, c, {1.0, 1e-2, 1e-4}, 200);
    EXPECT_TRUE(rep.passed()) << rep.verdicts[2].detail;
    EXPECT_EQ(rep.cells[0].params["lambda"].get<double>(), 1.0);
    // z scales exactly like Lambda^{-1} for the linear model
    const double r = rep.cells[1].value / rep.cells[2].value;
    EXPECT_NEAR(r, std::pow(1e-4, -0.25) / std::pow(1e-2, -0.25), 1e-9 * r);
}

TEST(Reproducibility, WorkerCountDoesNotChangeStatistics) {
    GridSpec g(1, 32);
    auto c = small_config();
    c.eta = 1e-3;
    HarnessOptions one{99, 1}, four{99, 4};
    auto a = clt_experiment(SpectralField::constant(g, 1.0), burgers(4), c, {1e-2, 1e-3}, 100, one);
    auto b = clt_experiment(SpectralField::constant(g, 1.0), burgers(4), c, {1e-2, 1e-3}, 100, four);
    EXPECT_EQ(a.statistics(), b.statistics());
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
    HarnessOptions other{100, 1};
    auto d = clt_experiment(SpectralField::constant(g, 1.0), burgers(4), c, {1e-2, 1e-3}, 100, other);
    EXPECT_NE(a.increment_digest, d.increment_digest);
}

TEST(Report, JsonAndCsv) {
    GridSpec g(1, 32);
    auto rep = regularization_experiment(smooth(g, 0, 0.3), burgers(), random_control(0.1, 2, 8, 6), small_config(),
                                         {1e-2, 1e-3, 1e-4}, Regularization::eta);
    auto j = rep.to_json();
    for (const char* key : {"name", "grid", "cells", "seed", "verdicts", "passed"}) EXPECT_TRUE(j.contains(key)) << key;
    ASSERT_EQ(j["cells"].size(), 2u);
    for (const char* key : {"params", "statistic", "value", "stderr", "verdict"}) EXPECT_TRUE(j["cells"][0].contains(key));
    std::ostringstream os;
    rep.write_csv(os);
    std::istringstream is(os.str());
    std::string line;
    int lines = 0;
    while (std::getline(is, line)) ++lines;
    EXPECT_EQ(lines, 3);
    EXPECT_EQ(os.str().rfind("experiment,cell,params,statistic,value,stderr,samples,verdict", 0), 0u);
}
