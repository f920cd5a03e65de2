// Drives the bench and mrf executables and checks exit codes and outputs.
#include "fpgnn/bench.hpp"
#include "fpgnn/mrf.hpp"
#include "support/mrf_gen.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fpgnn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
};

Outcome run(const std::string& cmd) {
    Outcome o;
    FILE* pipe = popen((cmd + " 2>/dev/null").c_str(), "r");
    if (!pipe) return o;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) o.out.append(buf, n);
    const int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

const std::string kBench = FPGNN_BENCH_BIN;
const std::string kMrf = FPGNN_MRF_BIN;

class Workspace : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("fpgnn_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
        testutil::SbmSpec s;
        s.n = 60;
        s.d = 20;
        s.train_per_class = 5;
        s.val = 15;
        s.test = 20;
        save_dataset(testutil::make_sbm(s), dir / "data");
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path config(const std::string& name, const std::string& extra_model = "", const std::string& extra_train = "") {
        const fs::path p = dir / name;
        std::ofstream(p) << "[experiment]\ndataset = data\nout = out\nruns = 2\n[model]\nvariant = gcn\nhidden = 8\n"
                         << extra_model << "[train]\nmax_epochs = 6\n"
                         << extra_train;
        return p;
    }
};

} // namespace

TEST_F(Workspace, RunWritesReportsAndExitsZero) {
    const Outcome o = run(kBench + " run " + quoted(config("a.ini")));
    ASSERT_EQ(o.code, 0) << o.out;
    for (const char* f : {"report.csv", "runs.csv", "curves.csv", "plot.dat", "timing.csv", "checkpoint.json"})
        EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
    EXPECT_EQ(o.out, slurp(dir / "out" / "report.csv"));
}

TEST_F(Workspace, UsageAndConfigErrorsExitTwo) {
    EXPECT_EQ(run(kBench).code, 2);
    EXPECT_EQ(run(kBench + " frobnicate").code, 2);
    EXPECT_EQ(run(kBench + " --help").code, 0);
    EXPECT_EQ(run(kBench + " run " + quoted(dir / "missing.ini")).code, 2);
    EXPECT_EQ(run(kBench + " run " + quoted(config("bad.ini", "depth = -1\n"))).code, 2);
    EXPECT_EQ(run(kBench + " sweep " + quoted(config("s.ini")) + " --depths 4,2").code, 2);
    EXPECT_EQ(run("BENCH_SEED=abc " + kBench + " run " + quoted(config("e.ini"))).code, 2);
}

TEST_F(Workspace, DataErrorsExitThree) {
    const fs::path edges = dir / "data" / "edges.txt";
    const std::string good = slurp(edges);
    std::ofstream(edges, std::ios::app) << "0 999\n";
    EXPECT_EQ(run(kBench + " run " + quoted(config("a.ini"))).code, 3);
    std::ofstream(edges) << good;
    ASSERT_EQ(run(kBench + " run " + quoted(config("a.ini"))).code, 0);
    fs::remove(dir / "data" / "features.csv");
    EXPECT_EQ(run(kBench + " run " + quoted(config("b.ini"))).code, 3);
}

TEST_F(Workspace, DivergenceExitsFour) {
    EXPECT_EQ(run(kBench + " run " + quoted(config("d.ini", "", "lr = 1e200\n"))).code, 4);
}

TEST_F(Workspace, SeedPrecedenceFlagOverEnvironmentOverConfig) {
    const std::string cfg7 = quoted(config("seed7.ini", "", "seed = 7\n"));
    const std::string cfg9 = quoted(config("seed9.ini", "", "seed = 9\n"));
    auto report = [&](const std::string& cmd) {
        const Outcome o = run(cmd);
        EXPECT_EQ(o.code, 0);
        return slurp(dir / "out" / "runs.csv");
    };
    const std::string from_config9 = report(kBench + " run " + cfg9);
    const std::string from_config7 = report(kBench + " run " + cfg7);
    ASSERT_NE(from_config7, from_config9);
    EXPECT_EQ(report("BENCH_SEED=9 " + kBench + " run " + cfg7), from_config9);
    EXPECT_EQ(report("BENCH_SEED=7 " + kBench + " run " + cfg7 + " --seed 9"), from_config9);
    EXPECT_EQ(report("BENCH_SEED= " + kBench + " run " + cfg7), from_config7);
}

TEST_F(Workspace, SweepAndDiagnose) {
    const std::string cfg = quoted(config("s.ini"));
    const Outcome sweep = run(kBench + " sweep " + cfg + " --depths 1,2,3 --jobs 2");
    ASSERT_EQ(sweep.code, 0);
    const auto rows = parse_report(slurp(dir / "out" / "report.csv"));
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[2].depth, 3u);
    EXPECT_EQ(rows[0].seconds, 0.0);

    const Outcome diag =
        run(kBench + " diagnose " + cfg + " --checkpoint " + quoted(dir / "out" / "checkpoint.json"));
    ASSERT_EQ(diag.code, 0);
    EXPECT_EQ(diag.out, slurp(dir / "out" / "diagnostic.csv"));
    // Input and output widths differ, so only the hidden-to-hidden step is reported.
    EXPECT_NE(diag.out.find("layer,residual\n1,"), std::string::npos);

    EXPECT_EQ(run(kBench + " diagnose " + cfg + " --checkpoint " + quoted(dir / "nope.json")).code, 3);
}

TEST_F(Workspace, ReportIsByteIdenticalAcrossInvocations) {
    const std::string cfg = quoted(config("a.ini"));
    ASSERT_EQ(run(kBench + " run " + cfg).code, 0);
    const std::string first = slurp(dir / "out" / "report.csv") + slurp(dir / "out" / "runs.csv");
    ASSERT_EQ(run(kBench + " run " + cfg + " --jobs 3").code, 0);
    EXPECT_EQ(slurp(dir / "out" / "report.csv") + slurp(dir / "out" / "runs.csv"), first);
}

TEST_F(Workspace, MrfSolvePrintsMarginalsAndFreeEnergy) {
    testutil::MrfSpec spec;
    spec.n = 6;
    spec.k = 2;
    const PairwiseMrf m = testutil::random_mrf(spec, 3);
    {
        std::ofstream out(dir / "m.mrf");
        write_mrf(out, m);
    }
    const Outcome o = run(kMrf + " solve " + quoted(dir / "m.mrf") + " --exact");
    ASSERT_EQ(o.code, 0);
    EXPECT_NE(o.out.find("# mean-field marginals\nnode,q0,q1\n"), std::string::npos);
    EXPECT_NE(o.out.find("converged yes"), std::string::npos);
    EXPECT_NE(o.out.find("# exact marginals"), std::string::npos);
    EXPECT_NE(o.out.find("# log Z "), std::string::npos);

    EXPECT_EQ(run(kMrf + " solve " + quoted(dir / "m.mrf") + " --schedule par --init-seed 4").code, 0);
    // An iteration cap is reported, not treated as a failure.
    const Outcome capped = run(kMrf + " solve " + quoted(dir / "m.mrf") + " --max-iters 1 --tol 1e-300");
    EXPECT_EQ(capped.code, 0);
    EXPECT_NE(capped.out.find("converged no"), std::string::npos);
}

TEST_F(Workspace, MrfErrors) {
    EXPECT_EQ(run(kMrf).code, 2);
    EXPECT_EQ(run(kMrf + " solve " + quoted(dir / "missing.mrf")).code, 3);
    std::ofstream(dir / "junk.mrf") << "not an mrf\n";
    EXPECT_EQ(run(kMrf + " solve " + quoted(dir / "junk.mrf")).code, 3);
    EXPECT_EQ(run(kMrf + " solve " + quoted(dir / "junk.mrf") + " --schedule sideways").code, 2);
}
