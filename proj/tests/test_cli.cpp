// Copyright 2026 The sfcl Authors.
// SPDX-License-Identifier: Apache-2.0
// End-to-end tests of the command-line tool.
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "sfcl/torus_field.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int status = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("sfcl_cli_" + std::string(info->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    Result run(const std::string& args) {
        const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
        const std::string cmd =
            std::string(SFCL_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
        const int raw = std::system(cmd.c_str());
        Result r;
        r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
        r.out = slurp(out);
        r.err = slurp(err);
        return r;
    }

    fs::path write(const std::string& name, const std::string& text) {
        const auto p = dir_ / name;
        std::ofstream(p) << text;
        return p;
    }

    // the single run directory below root
    fs::path only_run(const fs::path& root) {
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(root)) dirs.push_back(e.path());
        EXPECT_EQ(dirs.size(), 1u);
        return dirs.empty() ? fs::path() : dirs.front();
    }

    fs::path dir_;
};

const char* kModel =
    "model.flux = burgers_clamped\n"
    "model.diffusion = linear\n"
    "model.diffusion.theta = 0.5\n"
    "model.noise = diagonal_decay\n";

TEST_F(Cli, HelpExitsZero) {
    const auto r = run("--help");
    EXPECT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("experiment"), std::string::npos);
}

TEST_F(Cli, ConstantDataWithoutNoiseStaysConstant) {
    const auto r = run("simulate --out " + (dir_ / "o").string() +
                       " --override initial.kind=constant --override initial.value=1.25 --override grid.n=32"
                       " --override solver.t_end=0.05");
    ASSERT_EQ(r.status, 0) << r.err;
    const auto rd = only_run(dir_ / "o");
    std::ifstream in(rd / "final.bin", std::ios::binary);
    const auto f = sfcl::read_snapshot(in);
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(f[i], 1.25, 1e-12);
    const auto manifest = json::parse(slurp(rd / "manifest.json"));
    EXPECT_EQ(manifest["command"], "simulate");
    EXPECT_EQ(manifest["status"], "ok");
    EXPECT_TRUE(manifest.contains("created"));
    EXPECT_FALSE(manifest["config"].contains("workers"));
}

TEST_F(Cli, CltExperimentReportsDecreasingStatistic) {
    const auto r = run("experiment clt --workers 2 --out " + (dir_ / "o").string() +
                       " --override grid.n=32 --override experiment.samples=100 --override solver.t_end=0.1");
    ASSERT_EQ(r.status, 0) << r.out << r.err;
    EXPECT_NE(r.out.find("PASS clt_statistic_decreasing"), std::string::npos);
    const auto rd = only_run(dir_ / "o");
    const auto rep = json::parse(slurp(rd / "report.json"));
    std::vector<double> e1;
    for (const auto& c : rep["cells"]) {
        if (c["statistic"] == "mean_e1_distance_to_coupled_limit") e1.push_back(c["value"].get<double>());
    }
    ASSERT_EQ(e1.size(), 3u);
    EXPECT_GT(e1[0], e1[1]);
    EXPECT_GT(e1[1], e1[2]);
    EXPECT_TRUE(fs::exists(rd / "report.csv"));
}

TEST_F(Cli, MissingThetaIsAConfigError) {
    const auto cfg = write("m.cfg",
                           "model.flux = burgers_clamped\nmodel.diffusion = linear\nmodel.noise = diagonal_decay\n");
    const auto r = run("simulate --config " + cfg.string() + " --out " + (dir_ / "o").string());
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("model.diffusion.theta"), std::string::npos) << r.err;
}

TEST_F(Cli, UnknownKeyNamesTheLine) {
    const auto cfg = write("u.cfg", std::string(kModel) + "\n# comment\nsolver.dtt = 1e-3\n");
    const auto r = run("simulate --config " + cfg.string() + " --out " + (dir_ / "o").string());
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("u.cfg:7"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("solver.dtt"), std::string::npos) << r.err;
}

TEST_F(Cli, BadOverrideIsAConfigError) {
    const auto r = run("simulate --override grid.n=7 --out " + (dir_ / "o").string());
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("grid.n"), std::string::npos) << r.err;
}

TEST_F(Cli, IdenticalRunsGiveIdenticalArtifacts) {
    const std::string args =
        " --seed 7 --override solver.eps=1e-2 --override grid.n=32 --override solver.t_end=0.05 --out ";
    ASSERT_EQ(run("simulate" + args + (dir_ / "a").string()).status, 0);
    ASSERT_EQ(run("simulate" + args + (dir_ / "b").string() + " --workers 3").status, 0);
    const auto ra = only_run(dir_ / "a"), rb = only_run(dir_ / "b");
    EXPECT_EQ(ra.filename(), rb.filename());
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(ra)) {
        const auto name = e.path().filename();
        if (name == "manifest.json") {
            auto ma = json::parse(slurp(e.path())), mb = json::parse(slurp(rb / name));
            ma.erase("created");
            mb.erase("created");
            EXPECT_EQ(ma, mb);
        } else {
            EXPECT_EQ(slurp(e.path()), slurp(rb / name)) << name;
        }
        ++compared;
    }
    EXPECT_GE(compared, 5u);
    // a different seed changes the trajectory
    ASSERT_EQ(run("simulate --seed 8 --override solver.eps=1e-2 --override grid.n=32 --override solver.t_end=0.05 "
                  "--out " +
                  (dir_ / "c").string())
                  .status,
              0);
    EXPECT_NE(slurp(ra / "final.bin"), slurp(only_run(dir_ / "c") / "final.bin"));
}

TEST_F(Cli, HashIgnoresKeyOrderAndFormat) {
    const auto a = write("a.cfg", std::string(kModel) + "grid.n = 32\nsolver.t_end = 0.01\n");
    const auto b = write("b.cfg",
                         "solver.t_end = 0.01\ngrid.n = 32\nmodel.noise = diagonal_decay\n"
                         "model.diffusion.theta = 0.5\nmodel.diffusion = linear\nmodel.flux = burgers_clamped\n");
    const auto j = write("c.json", R"({
  "solver": {"t_end": 0.01},
  "model": {"flux": "burgers_clamped", "noise": "diagonal_decay",
            "diffusion": {"name": "linear", "theta": 0.5}},
  "grid": {"n": 32}
})");
    for (const auto& [cfg, sub] : {std::pair{a, "a"}, std::pair{b, "b"}, std::pair{j, "c"}}) {
        ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir_ / sub).string()).status, 0) << sub;
    }
    const auto na = only_run(dir_ / "a").filename();
    EXPECT_EQ(na, only_run(dir_ / "b").filename());
    EXPECT_EQ(na, only_run(dir_ / "c").filename());
}

TEST_F(Cli, DivergenceExitsWithThree) {
    const auto r = run("simulate --override solver.eps=1e200 --override grid.n=32 --out " + (dir_ / "o").string());
    EXPECT_EQ(r.status, 3);
    EXPECT_NE(r.err.find("step"), std::string::npos) << r.err;
}

TEST_F(Cli, RateWritesReportAndControl) {
    const auto r = run("rate --out " + (dir_ / "o").string() +
                       " --override grid.n=32 --override target.mode=2 --override target.sin=0.05");
    ASSERT_EQ(r.status, 0) << r.err;
    const auto rd = only_run(dir_ / "o");
    const auto rep = json::parse(slurp(rd / "rate.json"));
    EXPECT_FALSE(rep["infinite"].get<bool>());
    EXPECT_GT(rep["value"].get<double>(), 0.0);
    EXPECT_TRUE(fs::exists(rd / "control.csv"));
}

TEST_F(Cli, OracleMatchesSolver) {
    const auto r = run("oracle --out " + (dir_ / "o").string() +
                       " --override grid.n=32 --override solver.t_end=0.1 --override solver.dt=5e-5");
    ASSERT_EQ(r.status, 0) << r.err;
    const auto s = json::parse(slurp(only_run(dir_ / "o") / "summary.json"));
    EXPECT_LT(s["relative_l2_error_of_solver"].get<double>(), 1e-3);
}

TEST_F(Cli, ShippedConfigsRun) {
    const std::string dir = SFCL_CONFIG_DIR;
    const std::string out = " --out " + (dir_ / "o").string();
    EXPECT_EQ(run("simulate --config " + dir + "/burgers.cfg --override solver.t_end=0.01" + out).status, 0);
    EXPECT_EQ(run("rate --config " + dir + "/rate.cfg" + out).status, 0);
    EXPECT_EQ(run("experiment clt --config " + dir +
                  "/clt.json --override grid.n=32 --override experiment.samples=100 --override solver.t_end=0.1" + out)
                  .status,
              0);
}

}  // namespace
