#include "fpgnn/bench.hpp"
#include "fpgnn/errors.hpp"
#include "fpgnn/textio.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace fpgnn;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text, const fs::path& base = {}) {
    std::istringstream in(text);
    return parse_experiment(in, base);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("fpgnn_bench_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

GraphDataset tiny_sbm() {
    testutil::SbmSpec s;
    s.n = 60;
    s.d = 20;
    s.train_per_class = 5;
    s.val = 15;
    s.test = 20;
    return testutil::make_sbm(s);
}

ExperimentConfig tiny_experiment(Variant v) {
    ExperimentConfig cfg;
    cfg.dataset = "unused";
    cfg.model = model_preset(v);
    cfg.model.hidden = 8;
    cfg.train = train_preset(v);
    cfg.train.max_epochs = 8;
    cfg.runs = 3;
    return cfg;
}

} // namespace

TEST(ParseExperiment, PresetsThenOverrides) {
    const ExperimentConfig cfg = parse(R"(
# comment
[experiment]
dataset = data/cora   ; trailing comment
runs = 4
depths = 2, 4,8

[model]
variant = GCNII
hidden = 32

[train]
lr = 0.005
seed = 7
)",
                                       "/base");
    EXPECT_EQ(cfg.dataset, fs::path("/base/data/cora"));
    EXPECT_EQ(cfg.out_dir, fs::path("/base/out"));
    EXPECT_EQ(cfg.runs, 4u);
    EXPECT_EQ(cfg.depths, (std::vector<std::size_t>{2, 4, 8}));
    EXPECT_EQ(cfg.model.variant, Variant::gcnii);
    EXPECT_EQ(cfg.model.hidden, 32u);
    EXPECT_EQ(cfg.model.alpha, model_preset(Variant::gcnii).alpha);
    EXPECT_EQ(cfg.train.lr, 0.005);
    EXPECT_EQ(cfg.train.seed, 7u);
    EXPECT_EQ(cfg.train.l2_input, train_preset(Variant::gcnii).l2_input);
    EXPECT_FALSE(cfg.report_wall_time);
}

TEST(ParseExperiment, DefaultsWithoutModelSection) {
    const ExperimentConfig cfg = parse("[experiment]\ndataset = /d\n");
    EXPECT_EQ(cfg.model.variant, Variant::gcn);
    EXPECT_EQ(cfg.effective_depths(), (std::vector<std::size_t>{cfg.model.depth}));
    EXPECT_EQ(cfg.runs, 10u);
}

TEST(ParseExperiment, Errors) {
    const char* bad[] = {
        "[model]\nvariant = gcn\n",                            // no dataset
        "[experiment]\ndataset = d\n[nonsense]\n",             // unknown section
        "[experiment]\ndataset = d\nfoo = 1\n",                // unknown key
        "[experiment]\ndataset = d\n[model]\nvariant = mlp\n", // unknown variant
        "[experiment]\ndataset = d\nruns = 0\n",
        "[experiment]\ndataset = d\ndepths = 4,2\n",
        "[experiment]\ndataset = d\ndepths = 2,2\n",
        "[experiment]\ndataset = d\n[model]\nhidden = -3\n",
        "[experiment]\ndataset = d\n[model]\ndropout = 1.5\n",
        "[experiment]\ndataset = d\n[train]\nlr = fast\n",
        "[experiment]\ndataset = d\n[train]\nlr = 0.1\nlr = 0.2\n",
        "dataset = d\n",
        "[experiment\ndataset = d\n",
        "[experiment]\ndataset d\n",
        "[experiment]\ndataset = d\n[model]\ninput_transform = maybe\n",
    };
    for (const char* text : bad) EXPECT_THROW(parse(text), ConfigError) << text;
}

TEST(ParseDepthList, AcceptsIncreasingLists) {
    EXPECT_EQ(parse_depth_list("2,4,8,16,32"), (std::vector<std::size_t>{2, 4, 8, 16, 32}));
    EXPECT_EQ(parse_depth_list(" 0 "), (std::vector<std::size_t>{0}));
    EXPECT_THROW(parse_depth_list(""), ConfigError);
    EXPECT_THROW(parse_depth_list("3,x"), ConfigError);
}

TEST(Report, RoundTripsThroughCsv) {
    const std::vector<ReportRow> rows{{"gcn", 2, 0.815, 0.0052, 10, 0.0}, {"gcnii", 64, 0.8531, 0.006, 10, 0.0}};
    const std::string csv = format_report(rows, false);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "variant,depth,mean_acc,std_acc,runs,seconds");
    EXPECT_EQ(parse_report(csv), rows);
}

TEST(Report, SecondsColumnIsZeroUnlessRequested) {
    const std::vector<ReportRow> rows{{"sgc", 2, 0.5, 0.1, 3, 12.5}};
    EXPECT_EQ(parse_report(format_report(rows, false))[0].seconds, 0.0);
    EXPECT_EQ(parse_report(format_report(rows, true))[0].seconds, 12.5);
}

TEST(Report, MalformedRowIsDataError) {
    EXPECT_THROW(parse_report("variant,depth,mean_acc,std_acc,runs,seconds\ngcn,2,0.8\n"), DataError);
}

TEST(PlotData, SortedBlocksRoundTrip) {
    const std::vector<ReportRow> rows{
        {"gcnii", 8, 0.84, 0.01, 5, 0.0}, {"gcn", 8, 0.6, 0.02, 5, 0.0}, {"gcn", 2, 0.81, 0.01, 5, 0.0}};
    const std::string text = emit_plot_data(rows);
    const std::vector<ReportRow> sorted{rows[2], rows[1], rows[0]};
    EXPECT_EQ(parse_plot_data(text), sorted);
    EXPECT_NE(text.find("\n\n\n# variant gcnii\n"), std::string::npos);
    EXPECT_THROW(parse_plot_data("8,0.5,0,1,0\n"), DataError);
}

TEST(CellSeed, DistinctPerVariantAndDepth) {
    EXPECT_EQ(cell_seed(42, Variant::gcn, 4), cell_seed(42, Variant::gcn, 4));
    EXPECT_NE(cell_seed(42, Variant::gcn, 4), cell_seed(42, Variant::gcn, 8));
    EXPECT_NE(cell_seed(42, Variant::gcn, 4), cell_seed(42, Variant::sgc, 4));
    EXPECT_NE(cell_seed(42, Variant::gcn, 4), cell_seed(43, Variant::gcn, 4));
}

TEST(DepthSweep, RowsMatchRunsAndCellsAreIndependent) {
    const GraphDataset g = tiny_sbm();
    const ExperimentConfig cfg = tiny_experiment(Variant::gcn);
    const std::vector<std::size_t> depths{1, 2, 3};
    const ExperimentResult r = depth_sweep(cfg, g, depths);
    ASSERT_EQ(r.rows.size(), 3u);
    ASSERT_EQ(r.runs.size(), 9u);
    for (std::size_t di = 0; di < 3; ++di) {
        std::vector<double> accs;
        for (const auto& run : r.runs)
            if (run.depth == depths[di]) accs.push_back(run.test_acc);
        ASSERT_EQ(accs.size(), 3u);
        double mean = 0.0;
        for (double a : accs) mean += a / 3.0;
        double var = 0.0;
        for (double a : accs) var += (a - mean) * (a - mean) / 2.0;
        EXPECT_NEAR(r.rows[di].mean_acc, mean, 1e-15);
        EXPECT_NEAR(r.rows[di].std_acc, std::sqrt(var), 1e-15);
        EXPECT_EQ(r.rows[di].runs, 3u);
    }
    for (const auto& run : r.runs)
        EXPECT_EQ(run.seed, run_seed(cell_seed(cfg.train.seed, Variant::gcn, run.depth), run.run));

    // A cell's results do not depend on which other depths are in the sweep.
    const std::vector<std::size_t> only{2};
    const ExperimentResult single = depth_sweep(cfg, g, only);
    EXPECT_EQ(single.rows[0].mean_acc, r.rows[1].mean_acc);
    EXPECT_EQ(single.rows[0].std_acc, r.rows[1].std_acc);
}

TEST(DepthSweep, FixedSeedGivesZeroStd) {
    ExperimentConfig cfg = tiny_experiment(Variant::sgc);
    cfg.fixed_seed = true;
    const std::vector<std::size_t> depths{2};
    EXPECT_EQ(depth_sweep(cfg, tiny_sbm(), depths).rows[0].std_acc, 0.0);
}

TEST(DepthSweep, JobsDoNotChangeResults) {
    const GraphDataset g = tiny_sbm();
    const ExperimentConfig cfg = tiny_experiment(Variant::appnp);
    const std::vector<std::size_t> depths{2, 4};
    EXPECT_EQ(format_runs(depth_sweep(cfg, g, depths, 1).runs, false),
              format_runs(depth_sweep(cfg, g, depths, 3).runs, false));
}

TEST(WriteOutputs, ByteIdenticalOnRerun) {
    const GraphDataset g = tiny_sbm();
    const ExperimentConfig cfg = tiny_experiment(Variant::cognet);
    TempDir a("rerun_a"), b("rerun_b");
    write_outputs(run_experiment(cfg, g), a.path, false);
    write_outputs(run_experiment(cfg, g), b.path, false);
    for (const char* f : {"report.csv", "runs.csv", "curves.csv", "plot.dat", "checkpoint.json"}) {
        EXPECT_TRUE(fs::exists(a.path / f)) << f;
        EXPECT_EQ(slurp(a.path / f), slurp(b.path / f)) << f;
    }
    EXPECT_TRUE(fs::exists(a.path / "timing.csv"));
}

TEST(WriteOutputs, RunsCsvRecomputesReport) {
    const GraphDataset g = tiny_sbm();
    ExperimentConfig cfg = tiny_experiment(Variant::gcn);
    TempDir dir("recompute");
    const std::vector<std::size_t> depths{1, 2};
    write_outputs(depth_sweep(cfg, g, depths), dir.path, false);
    const auto report = parse_report(slurp(dir.path / "report.csv"));
    std::istringstream runs(slurp(dir.path / "runs.csv"));
    std::string line;
    std::getline(runs, line);
    std::map<std::size_t, std::vector<double>> by_depth;
    while (std::getline(runs, line)) {
        const auto f = text::split(line, ',');
        by_depth[static_cast<std::size_t>(text::parse_int(f[1], "depth"))].push_back(text::parse_double(f[4], "acc"));
    }
    for (const auto& row : report) {
        const auto [mean, sd] = mean_std(by_depth.at(row.depth));
        EXPECT_NEAR(row.mean_acc, mean, 1e-12);
        EXPECT_NEAR(row.std_acc, sd, 1e-12);
    }
}

TEST(Checkpoint, JsonRoundTripRebuildsTheModel) {
    const GraphDataset g = tiny_sbm();
    const ExperimentConfig cfg = tiny_experiment(Variant::jknet);
    const ExperimentResult r = run_experiment(cfg, g);
    const Checkpoint back = checkpoint_from_json(checkpoint_to_json(r.checkpoint));
    EXPECT_EQ(back.values, r.checkpoint.values);
    EXPECT_EQ(back.names, r.checkpoint.names);
    EXPECT_EQ(back.model.variant, Variant::jknet);
    EXPECT_EQ(back.model.jk_mode, r.checkpoint.model.jk_mode);
    EXPECT_EQ(back.model.hidden, 8u);

    const Model model = model_from_checkpoint(back);
    const PreparedData data = prepare(g, back.normalize_features);
    EXPECT_EQ(model.values(), r.checkpoint.values);
    // Single depth: the checkpoint holds run 0's best parameters.
    EXPECT_EQ(evaluate(model, data, g.test), r.runs[0].test_acc);
}

TEST(Checkpoint, MalformedJsonIsDataError) {
    EXPECT_THROW(checkpoint_from_json("{"), DataError);
    EXPECT_THROW(checkpoint_from_json(R"({"model": {}})"), DataError);
}

TEST(Checkpoint, MismatchedParameterNamesRejected) {
    const GraphDataset g = tiny_sbm();
    Checkpoint c = run_experiment(tiny_experiment(Variant::gcn), g).checkpoint;
    c.names[0] = "bogus.W";
    EXPECT_THROW(model_from_checkpoint(c), DataError);
    c = run_experiment(tiny_experiment(Variant::gcn), g).checkpoint;
    c.values.pop_back();
    EXPECT_THROW(model_from_checkpoint(c), DataError);
}

TEST(Residuals, IdentityTraceIsZero) {
    const Tensor t = testutil::random_tensor({5, 3}, 1);
    const std::vector<Tensor> trace{t, t, t};
    const auto r = trace_residuals(trace);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].value, 0.0);
    EXPECT_EQ(r[1].layer, 1u);
}

TEST(Residuals, HandExampleAndShapeChangesSkipped) {
    const std::vector<Tensor> trace{Tensor::matrix({{3, 4}}), Tensor::matrix({{3, 4}, {0, 0}}),
                                    Tensor::matrix({{0, 4}, {0, 0}}), Tensor::matrix({{0, 4}, {0, 3}})};
    const auto r = trace_residuals(trace);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].layer, 1u);
    EXPECT_DOUBLE_EQ(r[0].value, 3.0 / 5.0);
    EXPECT_DOUBLE_EQ(r[1].value, 3.0 / 4.0);
}

TEST(Residuals, SgcOnRegularGraphWithUniformFeaturesIsZero) {
    // A ring is 2-regular, so every row of the normalised adjacency sums to 1.
    const std::size_t n = 8;
    std::vector<Edge> ring;
    for (std::size_t i = 0; i < n; ++i) ring.push_back({std::min(i, (i + 1) % n), std::max(i, (i + 1) % n)});
    const SparseMatrix adj = build_normalized_adjacency(n, canonicalize_edges(ring, n));
    Tensor x({n, 3});
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = 0.5;
        x(i, 1) = 0.25;
        x(i, 2) = 0.25;
    }
    ModelConfig m = model_preset(Variant::sgc);
    m.depth = 4;
    const auto r = layer_residuals(Model(m, 3, 2, 1), x, adj);
    ASSERT_EQ(r.size(), 4u);
    for (const auto& res : r) EXPECT_NEAR(res.value, 0.0, 1e-15);
    EXPECT_NE(format_residuals(r).find("layer,residual\n0,"), std::string::npos);
}
