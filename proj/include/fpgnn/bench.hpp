#pragma once

#include "fpgnn/graph.hpp"
#include "fpgnn/trainer.hpp"
#include "fpgnn/zoo.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fpgnn {

/// One experiment file. Sections [experiment], [model] and [train] hold
/// `key = value` lines in any order; the variant's presets are applied first
/// and every explicit key overrides them.
struct ExperimentConfig {
    std::filesystem::path dataset;
    std::filesystem::path out_dir = "out";
    ModelConfig model;
    TrainConfig train;
    /// Strictly increasing; empty means "model.depth only".
    std::vector<std::size_t> depths;
    std::size_t runs = 10;
    bool fixed_seed = false;
    /// Off by default so report.csv stays byte-identical across reruns.
    bool report_wall_time = false;
    std::size_t jobs = 1;

    std::vector<std::size_t> effective_depths() const;
};

/// Relative dataset / output paths resolve against `base_dir`. Throws ConfigError.
ExperimentConfig parse_experiment(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment(const std::filesystem::path& file);
std::vector<std::size_t> parse_depth_list(std::string_view text);

struct ReportRow {
    std::string variant;
    std::size_t depth = 0;
    double mean_acc = 0.0;
    double std_acc = 0.0;
    std::size_t runs = 0;
    double seconds = 0.0;
    bool operator==(const ReportRow&) const = default;
};

struct RunRow {
    std::string variant;
    std::size_t depth = 0;
    std::size_t run = 0;
    std::uint64_t seed = 0;
    double test_acc = 0.0;
    double best_val_acc = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs = 0;
    double seconds = 0.0;
};

struct CurveRow {
    std::string variant;
    std::size_t depth = 0;
    EpochRecord record;
};

struct Checkpoint {
    ModelConfig model;
    std::size_t in_dim = 0;
    std::size_t classes = 0;
    std::uint64_t seed = 0;
    bool normalize_features = true;
    std::vector<std::string> names;
    std::vector<Tensor> values;
};

struct ExperimentResult {
    std::vector<ReportRow> rows;
    std::vector<RunRow> runs;
    /// Per-epoch metrics of the first run of every depth.
    std::vector<CurveRow> curves;
    /// Best parameters of the first run at the deepest depth.
    Checkpoint checkpoint;
};

/// Seed of the (variant, depth) cell: derive_seed(base, hash(variant), depth).
std::uint64_t cell_seed(std::uint64_t base, Variant v, std::size_t depth);

/// Trains `cfg.runs` models per depth. Cells run concurrently up to `jobs`.
ExperimentResult depth_sweep(const ExperimentConfig& cfg, const GraphDataset& g, std::span<const std::size_t> depths,
                             std::size_t jobs = 1);
/// depth_sweep over cfg.effective_depths().
ExperimentResult run_experiment(const ExperimentConfig& cfg, const GraphDataset& g, std::size_t jobs = 1);

std::string format_report(std::span<const ReportRow> rows, bool include_seconds);
std::string format_runs(std::span<const RunRow> runs, bool include_seconds);
std::string format_curves(std::span<const CurveRow> rows);
std::vector<ReportRow> parse_report(std::string_view text);

/// Gnuplot-readable comma-separated blocks, one per variant (separated by two
/// blank lines), rows sorted by (variant, depth).
std::string emit_plot_data(std::span<const ReportRow> rows);
std::vector<ReportRow> parse_plot_data(std::string_view text);

/// Writes report.csv, runs.csv, curves.csv, plot.dat, timing.csv and
/// checkpoint.json into `dir`, each via temp-then-rename.
void write_outputs(const ExperimentResult& r, const std::filesystem::path& dir, bool report_wall_time);

std::string checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(std::string_view text);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);
Model model_from_checkpoint(const Checkpoint& c);

struct Residual {
    /// Transition from H^(layer) to H^(layer+1); H^(0) is the first traced representation.
    std::size_t layer = 0;
    double value = 0.0;
};

/// r_l = ||H^(l+1) - H^(l)||_F / ||H^(l)||_F over consecutive same-shape
/// representations of a trace; shape-changing transitions are skipped. This is
/// a convergence / over-smoothing proxy, not a measured approximation error.
std::vector<Residual> trace_residuals(std::span<const Tensor> trace);
std::vector<Residual> layer_residuals(const Model& model, const Tensor& features, const SparseMatrix& adj);
std::string format_residuals(std::span<const Residual> residuals);

} // namespace fpgnn
