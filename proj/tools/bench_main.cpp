// bench: run experiments, depth sweeps and the layer-residual diagnostic.
#include "exit_codes.hpp"

#include "fpgnn/bench.hpp"
#include "fpgnn/errors.hpp"
#include "fpgnn/graph.hpp"
#include "fpgnn/runtime.hpp"
#include "fpgnn/textio.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <iostream>
#include <optional>

using namespace fpgnn;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> jobs;
};

ExperimentConfig load_with_overrides(const Common& c) {
    ExperimentConfig cfg = load_experiment(c.config);
    if (const char* env = std::getenv("BENCH_SEED"); env && *env) {
        const std::string_view s = text::trim(env);
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
            throw ConfigError("BENCH_SEED is not an unsigned integer: '" + std::string(env) + "'");
        }
        cfg.train.seed = v;
    }
    if (c.seed) cfg.train.seed = *c.seed;
    if (c.out) cfg.out_dir = *c.out;
    if (c.jobs) cfg.jobs = std::max<std::size_t>(*c.jobs, 1);
    return cfg;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("config", c.config, "Experiment config file")->required();
    sub->add_option("--seed", c.seed, "Base seed (overrides BENCH_SEED and the config)");
    sub->add_option("--out", c.out, "Output directory");
    sub->add_option("--jobs", c.jobs, "Concurrent training runs");
}

int run_and_write(const ExperimentConfig& cfg, const std::vector<std::size_t>& depths) {
    const GraphDataset g = load_dataset(cfg.dataset);
    const ExperimentResult r = depth_sweep(cfg, g, depths, cfg.jobs);
    write_outputs(r, cfg.out_dir, cfg.report_wall_time);
    std::cout << format_report(r.rows, cfg.report_wall_time);
    return cli::ok;
}

} // namespace

int main(int argc, char** argv) {
    configure_allocator();
    CLI::App app{"Depth sweeps and accuracy reports for graph neural network variants"};
    app.require_subcommand(1);

    Common run_opts;
    auto* run = app.add_subcommand("run", "Train the configured model(s) and write reports");
    add_common(run, run_opts);

    Common sweep_opts;
    std::string depth_text;
    auto* sweep = app.add_subcommand("sweep", "Train one cell per depth");
    add_common(sweep, sweep_opts);
    sweep->add_option("--depths", depth_text, "Comma-separated, strictly increasing depths")->required();

    Common diag_opts;
    std::string checkpoint;
    auto* diagnose = app.add_subcommand("diagnose", "Per-layer relative residuals of a trained model");
    diagnose->add_option("config", diag_opts.config, "Experiment config file")->required();
    diagnose->add_option("--checkpoint", checkpoint, "checkpoint.json written by run/sweep")->required();
    diagnose->add_option("--out", diag_opts.out, "Directory for diagnostic.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::ok : cli::config_error;
    }

    try {
        if (*run) {
            const ExperimentConfig cfg = load_with_overrides(run_opts);
            return run_and_write(cfg, cfg.effective_depths());
        }
        if (*sweep) {
            const ExperimentConfig cfg = load_with_overrides(sweep_opts);
            return run_and_write(cfg, parse_depth_list(depth_text));
        }
        const ExperimentConfig cfg = load_with_overrides(diag_opts);
        const GraphDataset g = load_dataset(cfg.dataset);
        const Checkpoint ck = load_checkpoint(checkpoint);
        if (ck.in_dim != g.d || ck.classes != g.c) throw DataError("checkpoint does not match the dataset dimensions");
        const Model model = model_from_checkpoint(ck);
        const PreparedData data = prepare(g, ck.normalize_features);
        const std::string csv = format_residuals(layer_residuals(model, data.features, data.adj));
        std::filesystem::create_directories(cfg.out_dir);
        text::write_file_atomic((cfg.out_dir / "diagnostic.csv").string(), csv);
        std::cout << csv;
        return cli::ok;
    } catch (...) {
        return cli::report_current_exception("bench");
    }
}
