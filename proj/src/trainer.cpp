#include "fpgnn/trainer.hpp"

#include "fpgnn/errors.hpp"
#include "fpgnn/optim.hpp"
#include "fpgnn/parallel.hpp"
#include "fpgnn/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace fpgnn {

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("train: " + msg); };
    if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr must be a nonnegative number");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be nonnegative");
    if (!(l2_input >= 0.0 && l2_propagation >= 0.0 && l2_output >= 0.0)) fail("l2 penalties must be nonnegative");
    if (max_epochs == 0) fail("max_epochs must be positive");
    if (patience == 0) fail("patience must be at least 1");
    if (eval_every == 0) fail("eval_every must be positive");
    if (dropout && !(*dropout >= 0.0 && *dropout < 1.0)) fail("dropout must lie in [0,1)");
    if (!(drop_edge_rate >= 0.0 && drop_edge_rate < 1.0)) fail("drop_edge_rate must lie in [0,1)");
}

TrainConfig train_preset(Variant v) {
    TrainConfig t;
    switch (v) {
    case Variant::gcn: t.patience = 50; break;
    case Variant::sgc:
        t.lr = 0.2;
        t.l2_input = 0.0;
        t.l2_output = 5e-5;
        t.max_epochs = 100;
        break;
    case Variant::gat:
        t.lr = 0.005;
        t.l2_input = t.l2_propagation = t.l2_output = 5e-4;
        t.max_epochs = 500;
        break;
    case Variant::appnp:
        t.l2_input = 5e-3;
        t.max_epochs = 500;
        break;
    case Variant::jknet:
    case Variant::dgcn:
        t.l2_input = t.l2_propagation = t.l2_output = 5e-4;
        t.max_epochs = 500;
        break;
    case Variant::gcnii:
    case Variant::cognet:
        t.l2_input = t.l2_output = 5e-4;
        t.l2_propagation = 0.01;
        t.max_epochs = 500;
        break;
    }
    return t;
}

PreparedData prepare(const GraphDataset& g, bool normalize_features) {
    g.validate();
    PreparedData p;
    p.graph = &g;
    p.features = g.features;
    if (normalize_features) row_normalize(p.features);
    p.adj = build_normalized_adjacency(g);
    return p;
}

ad::Var masked_cross_entropy(const ad::Var& logits, const Labels& labels, const Mask& mask) {
    return ad::masked_nll(ad::log_row_softmax(logits), labels, mask);
}

double accuracy(const Tensor& logits, const Labels& labels, const Mask& mask) {
    if (logits.rank() != 2 || labels.size() != logits.rows() || mask.size() != logits.rows()) {
        throw ShapeError("accuracy: logits, labels and mask disagree in length");
    }
    std::size_t hit = 0, total = 0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        if (!mask[i]) continue;
        const auto row = logits.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < row.size(); ++j)
            if (row[j] > row[best]) best = j;
        ++total;
        if (labels[i] >= 0 && static_cast<std::size_t>(labels[i]) == best) ++hit;
    }
    if (total == 0) throw DomainError("accuracy: mask selects no nodes");
    return static_cast<double>(hit) / static_cast<double>(total);
}

double evaluate(const Model& model, const PreparedData& data, const Mask& mask) {
    return accuracy(forward_model(model, data.features, data.adj, Mode::eval).value(), data.graph->labels, mask);
}

std::uint64_t init_seed(std::uint64_t seed) { return derive_seed(seed, hash_string("init")); }

namespace {

ModelConfig effective_model(const ModelConfig& mcfg, const TrainConfig& tcfg) {
    ModelConfig m = mcfg;
    if (tcfg.dropout) m.dropout = *tcfg.dropout;
    return m;
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

ad::Var regularised_loss(const ad::Var& ce, const Model& model, const TrainConfig& t) {
    ad::Var loss = ce;
    for (const auto& p : model.parameters()) {
        if (!ends_with(p.name, ".W")) continue;
        const double c = p.group == ParamGroup::input ? t.l2_input
                         : p.group == ParamGroup::output ? t.l2_output
                                                         : t.l2_propagation;
        if (c > 0.0) loss = ad::add(loss, ad::scale(ad::sum_squares(p.var), 0.5 * c));
    }
    return loss;
}

} // namespace

Model initial_model(const PreparedData& data, const ModelConfig& mcfg, const TrainConfig& tcfg) {
    const GraphDataset& g = *data.graph;
    return Model(effective_model(mcfg, tcfg), g.d, g.c, init_seed(tcfg.seed));
}

TrainResult train_model(const PreparedData& data, const ModelConfig& mcfg, const TrainConfig& tcfg) {
    tcfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const GraphDataset& g = *data.graph;
    Model model = initial_model(data, mcfg, tcfg);

    std::vector<ad::Var> vars;
    for (const auto& p : model.parameters()) vars.push_back(p.var);
    Adam opt(vars, AdamOptions{.lr = tcfg.lr, .weight_decay = tcfg.weight_decay});

    const std::uint64_t dropout_seed = derive_seed(tcfg.seed, hash_string("dropout"));
    const ad::Var features = ad::constant(data.features);
    // Without validation nodes, model selection falls back to the training mask.
    const Mask& val = mask_count(g.val) ? g.val : g.train;

    TrainResult result;
    Metrics& m = result.metrics;
    std::size_t since_best = 0;
    bool have_best = false;

    for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        SparseMatrix dropped;
        const SparseMatrix* adj = &data.adj;
        if (tcfg.drop_edge_rate > 0.0) {
            dropped = build_normalized_adjacency(
                g.n, drop_edges(g.edges, tcfg.drop_edge_rate, derive_seed(tcfg.seed, epoch)));
            adj = &dropped;
        }

        double train_loss = 0.0;
        try {
            const ad::Var logits = model.forward(features, *adj, Mode::train, dropout_seed, epoch);
            const ad::Var ce = masked_cross_entropy(logits, g.labels, g.train);
            const ad::Var loss = regularised_loss(ce, model, tcfg);
            train_loss = ce.value().item();
            if (!std::isfinite(loss.value().item())) throw NumericError("non-finite loss");
            ad::backward(loss);
            opt.step();
        } catch (const NumericError& e) {
            throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        m.epochs_run = epoch;

        if (epoch % tcfg.eval_every != 0 && epoch != tcfg.max_epochs) continue;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss;
        Tensor eval_logits;
        try {
            const ad::Var logits = model.forward(features, data.adj, Mode::eval);
            eval_logits = logits.value();
            rec.val_loss = masked_cross_entropy(ad::constant(eval_logits), g.labels, val).value().item();
        } catch (const NumericError& e) {
            throw DivergenceError("evaluation diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        rec.train_acc = accuracy(eval_logits, g.labels, g.train);
        rec.val_acc = accuracy(eval_logits, g.labels, val);
        m.curve.push_back(rec);

        const bool improved = !have_best || rec.val_acc > m.best_val_acc ||
                              (rec.val_acc == m.best_val_acc && rec.val_loss < m.best_val_loss);
        if (improved) {
            have_best = true;
            since_best = 0;
            m.best_epoch = epoch;
            m.best_val_acc = rec.val_acc;
            m.best_val_loss = rec.val_loss;
            m.test_acc = mask_count(g.test) ? accuracy(eval_logits, g.labels, g.test) : 0.0;
            result.best_params = model.values();
        } else if (++since_best >= tcfg.patience) {
            break;
        }
    }
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

TrainResult train_model(const GraphDataset& g, const ModelConfig& mcfg, const TrainConfig& tcfg) {
    const PreparedData data = prepare(g, tcfg.normalize_features);
    return train_model(data, mcfg, tcfg);
}

std::uint64_t run_seed(std::uint64_t base, std::size_t r, bool fixed_seed) {
    return fixed_seed ? base : derive_seed(base, r);
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    // sum / n need not reproduce a repeated value exactly.
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs[0]; })) return {xs[0], 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

RepeatResult repeat_runs(const PreparedData& data, const ModelConfig& mcfg, const TrainConfig& tcfg, std::size_t runs,
                         std::size_t jobs, bool fixed_seed) {
    if (runs == 0) throw ConfigError("repeat_runs: runs must be at least 1");
    RepeatResult out;
    out.seeds.resize(runs);
    out.test_accs.resize(runs);
    out.metrics.resize(runs);
    for (std::size_t r = 0; r < runs; ++r) out.seeds[r] = run_seed(tcfg.seed, r, fixed_seed);
    parallel_for(runs, jobs, [&](std::size_t r) {
        TrainConfig t = tcfg;
        t.seed = out.seeds[r];
        out.metrics[r] = train_model(data, mcfg, t).metrics;
        out.test_accs[r] = out.metrics[r].test_acc;
    });
    std::tie(out.mean, out.std) = mean_std(out.test_accs);
    return out;
}

} // namespace fpgnn
