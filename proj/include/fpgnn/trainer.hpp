#pragma once

#include "fpgnn/graph.hpp"
#include "fpgnn/zoo.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fpgnn {

struct TrainConfig {
    double lr = 0.01;
    /// Decoupled (AdamW-style) decay applied to every parameter.
    double weight_decay = 0.0;
    /// Coupled L2 penalties (c/2)||W||^2 added to the loss, per parameter group.
    /// Only weight matrices (names ending in ".W") are penalised.
    double l2_input = 5e-4;
    double l2_propagation = 0.0;
    double l2_output = 0.0;
    std::size_t max_epochs = 200;
    /// Evaluations without improvement before stopping.
    std::size_t patience = 100;
    /// Overrides the model's dropout rate when set.
    std::optional<double> dropout;
    std::uint64_t seed = 42;
    double drop_edge_rate = 0.0;
    std::size_t eval_every = 1;
    bool normalize_features = true;

    /// Throws ConfigError.
    void validate() const;
};

/// Per-variant training defaults.
TrainConfig train_preset(Variant v);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct Metrics {
    /// One record per evaluated epoch.
    std::vector<EpochRecord> curve;
    std::size_t best_epoch = 0;
    double best_val_acc = 0.0;
    double best_val_loss = 0.0;
    /// Test accuracy of the parameters saved at best_epoch.
    double test_acc = 0.0;
    std::size_t epochs_run = 0;
    double seconds = 0.0;
};

struct TrainResult {
    Metrics metrics;
    /// Parameter values at the best-validation checkpoint, in Model::parameters() order.
    std::vector<Tensor> best_params;
};

/// Features and propagation operator shared (read-only) by every run on a dataset.
struct PreparedData {
    const GraphDataset* graph = nullptr;
    Tensor features;
    SparseMatrix adj;
};

PreparedData prepare(const GraphDataset& g, bool normalize_features);
/// PreparedData keeps a pointer to the graph.
PreparedData prepare(GraphDataset&& g, bool normalize_features) = delete;

/// Mean over masked rows of -log softmax(logits)_label. DomainError on an empty mask.
ad::Var masked_cross_entropy(const ad::Var& logits, const Labels& labels, const Mask& mask);

/// Fraction of masked rows whose argmax equals the label. Ties go to the
/// lowest class index. DomainError on an empty mask.
double accuracy(const Tensor& logits, const Labels& labels, const Mask& mask);

/// Eval-mode accuracy of `model` on `mask`.
double evaluate(const Model& model, const PreparedData& data, const Mask& mask);

/// Seeds used by train_model for initialisation and dropout.
std::uint64_t init_seed(std::uint64_t seed);

/// Full-batch training with early stopping on validation accuracy (ties broken
/// by lower validation loss). An empty validation mask selects on the training
/// mask instead. Throws DivergenceError on a non-finite loss.
TrainResult train_model(const PreparedData& data, const ModelConfig& mcfg, const TrainConfig& tcfg);
TrainResult train_model(const GraphDataset& g, const ModelConfig& mcfg, const TrainConfig& tcfg);

/// Builds a model with the initial parameters train_model would start from.
Model initial_model(const PreparedData& data, const ModelConfig& mcfg, const TrainConfig& tcfg);

struct RepeatResult {
    std::vector<std::uint64_t> seeds;
    std::vector<double> test_accs;
    std::vector<Metrics> metrics;
    double mean = 0.0;
    /// Sample standard deviation; 0 for a single run.
    double std = 0.0;
};

/// Seed of run r: derive_seed(base, r), or `base` for every run when fixed_seed.
std::uint64_t run_seed(std::uint64_t base, std::size_t r, bool fixed_seed = false);

/// Runs `runs` independent trainings, up to `jobs` at a time. Results are
/// ordered by run index regardless of scheduling.
RepeatResult repeat_runs(const PreparedData& data, const ModelConfig& mcfg, const TrainConfig& tcfg, std::size_t runs,
                         std::size_t jobs = 1, bool fixed_seed = false);

/// Sample mean and (n-1) standard deviation; std is 0 when n < 2.
std::pair<double, double> mean_std(const std::vector<double>& xs);

} // namespace fpgnn
