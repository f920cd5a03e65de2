#include "fpgnn/bench.hpp"

#include "fpgnn/errors.hpp"
#include "fpgnn/parallel.hpp"
#include "fpgnn/rng.hpp"
#include "fpgnn/textio.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <sstream>

namespace fpgnn {

using text::format_double;

namespace {

using Section = std::map<std::string, std::string>;

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        return text::parse_double(v, key);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

std::size_t to_size(const std::string& key, const std::string& v) {
    long long x = 0;
    try {
        x = text::parse_int(v, key);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    if (x < 0) throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
    return static_cast<std::size_t>(x);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto t = text::trim(v);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    }
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    const std::string s = lower(v);
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (auto field : text::split(v, ','))
        if (!field.empty()) out.push_back(to_double(key, std::string(field)));
    return out;
}

void apply_model_key(ModelConfig& m, const std::string& key, const std::string& v) {
    if (key == "variant") m.variant = parse_variant(v);
    else if (key == "depth") m.depth = to_size(key, v);
    else if (key == "hidden") m.hidden = to_size(key, v);
    else if (key == "dropout") m.dropout = to_double(key, v);
    else if (key == "alpha") m.alpha = to_double(key, v);
    else if (key == "theta") m.theta = to_double(key, v);
    else if (key == "beta_schedule") m.beta_schedule = to_double_list(key, v);
    else if (key == "jk_mode") m.jk_mode = parse_jk_mode(v);
    else if (key == "gate_mode") m.gate_mode = parse_gate_mode(v);
    else if (key == "gate_init") m.gate_init = to_double(key, v);
    else if (key == "lambda_init") m.lambda_init = to_double(key, v);
    else if (key == "gamma_init") m.gamma_init = to_double(key, v);
    else if (key == "fixed_lambda") m.fixed_lambda = to_double(key, v);
    else if (key == "fixed_gamma") m.fixed_gamma = to_double(key, v);
    else if (key == "deep_switch") m.deep_switch = to_size(key, v);
    else if (key == "heads") m.heads = to_size(key, v);
    else if (key == "output_heads") m.output_heads = to_size(key, v);
    else if (key == "gat_slope") m.gat_slope = to_double(key, v);
    else if (key == "input_transform") m.input_transform = to_bool(key, v);
    else if (key == "linear_propagation") m.linear_propagation = to_bool(key, v);
    else if (key == "bias") m.bias = to_bool(key, v);
    else throw ConfigError("unknown key '" + key + "' in [model]");
}

void apply_train_key(TrainConfig& t, const std::string& key, const std::string& v) {
    if (key == "lr") t.lr = to_double(key, v);
    else if (key == "weight_decay") t.weight_decay = to_double(key, v);
    else if (key == "l2_input") t.l2_input = to_double(key, v);
    else if (key == "l2_propagation") t.l2_propagation = to_double(key, v);
    else if (key == "l2_output") t.l2_output = to_double(key, v);
    else if (key == "max_epochs") t.max_epochs = to_size(key, v);
    else if (key == "patience") t.patience = to_size(key, v);
    else if (key == "dropout") t.dropout = to_double(key, v);
    else if (key == "seed") t.seed = to_u64(key, v);
    else if (key == "drop_edge_rate") t.drop_edge_rate = to_double(key, v);
    else if (key == "eval_every") t.eval_every = to_size(key, v);
    else if (key == "normalize_features") t.normalize_features = to_bool(key, v);
    else throw ConfigError("unknown key '" + key + "' in [train]");
}

} // namespace

std::vector<std::size_t> ExperimentConfig::effective_depths() const {
    return depths.empty() ? std::vector<std::size_t>{model.depth} : depths;
}

std::vector<std::size_t> parse_depth_list(std::string_view text) {
    std::vector<std::size_t> out;
    for (auto field : text::split(text, ',')) {
        if (field.empty()) continue;
        out.push_back(to_size("depths", std::string(field)));
    }
    if (out.empty()) throw ConfigError("depth list is empty");
    for (std::size_t k = 1; k < out.size(); ++k)
        if (out[k] <= out[k - 1]) throw ConfigError("depth list must be strictly increasing");
    return out;
}

ExperimentConfig parse_experiment(std::istream& in, const std::filesystem::path& base_dir) {
    std::map<std::string, Section> sections;
    std::string current;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        const auto body = text::trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const std::string where = "line " + std::to_string(lineno);
        if (body.front() == '[') {
            if (body.back() != ']') throw ConfigError(where + ": malformed section header");
            current = lower(text::trim(body.substr(1, body.size() - 2)));
            if (current != "experiment" && current != "model" && current != "train") {
                throw ConfigError(where + ": unknown section [" + current + "]");
            }
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
        if (current.empty()) throw ConfigError(where + ": key outside of a section");
        const std::string key = lower(text::trim(body.substr(0, eq)));
        const std::string value(text::trim(body.substr(eq + 1)));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (!sections[current].emplace(key, value).second) {
            throw ConfigError(where + ": duplicate key '" + key + "' in [" + current + "]");
        }
    }

    ExperimentConfig cfg;
    Section& model = sections["model"];
    const auto vit = model.find("variant");
    const Variant variant = vit == model.end() ? Variant::gcn : parse_variant(vit->second);
    cfg.model = model_preset(variant);
    cfg.train = train_preset(variant);
    for (const auto& [k, v] : model) apply_model_key(cfg.model, k, v);
    for (const auto& [k, v] : sections["train"]) apply_train_key(cfg.train, k, v);
    for (const auto& [k, v] : sections["experiment"]) {
        if (k == "dataset") cfg.dataset = v;
        else if (k == "out") cfg.out_dir = v;
        else if (k == "runs") cfg.runs = to_size(k, v);
        else if (k == "depths") cfg.depths = parse_depth_list(v);
        else if (k == "fixed_seed") cfg.fixed_seed = to_bool(k, v);
        else if (k == "report_wall_time") cfg.report_wall_time = to_bool(k, v);
        else if (k == "jobs") cfg.jobs = to_size(k, v);
        else throw ConfigError("unknown key '" + k + "' in [experiment]");
    }
    if (cfg.dataset.empty()) throw ConfigError("[experiment] dataset is required");
    if (cfg.runs == 0) throw ConfigError("runs must be at least 1");
    if (cfg.jobs == 0) cfg.jobs = 1;
    if (!base_dir.empty()) {
        if (cfg.dataset.is_relative()) cfg.dataset = base_dir / cfg.dataset;
        if (cfg.out_dir.is_relative()) cfg.out_dir = base_dir / cfg.out_dir;
    }
    for (std::size_t depth : cfg.effective_depths()) {
        ModelConfig m = cfg.model;
        m.depth = depth;
        m.validate();
    }
    cfg.train.validate();
    return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config " + file.string());
    return parse_experiment(in, file.parent_path());
}

std::uint64_t cell_seed(std::uint64_t base, Variant v, std::size_t depth) {
    return derive_seed(base, hash_string(to_string(v)), depth);
}

ExperimentResult depth_sweep(const ExperimentConfig& cfg, const GraphDataset& g, std::span<const std::size_t> depths,
                             std::size_t jobs) {
    if (depths.empty()) throw ConfigError("depth sweep needs at least one depth");
    const PreparedData data = prepare(g, cfg.train.normalize_features);
    const std::size_t runs = cfg.runs;
    const std::string variant(to_string(cfg.model.variant));

    struct Cell {
        TrainResult result;
        std::uint64_t seed = 0;
    };
    std::vector<Cell> cells(depths.size() * runs);
    parallel_for(cells.size(), jobs, [&](std::size_t idx) {
        const std::size_t di = idx / runs, r = idx % runs;
        ModelConfig m = cfg.model;
        m.depth = depths[di];
        TrainConfig t = cfg.train;
        t.seed = run_seed(cell_seed(cfg.train.seed, cfg.model.variant, depths[di]), r, cfg.fixed_seed);
        cells[idx].seed = t.seed;
        cells[idx].result = train_model(data, m, t);
    });

    ExperimentResult out;
    for (std::size_t di = 0; di < depths.size(); ++di) {
        std::vector<double> accs;
        double seconds = 0.0;
        for (std::size_t r = 0; r < runs; ++r) {
            const Cell& c = cells[di * runs + r];
            const Metrics& m = c.result.metrics;
            accs.push_back(m.test_acc);
            seconds += m.seconds;
            out.runs.push_back({variant, depths[di], r, c.seed, m.test_acc, m.best_val_acc, m.best_epoch, m.epochs_run,
                                m.seconds});
        }
        const auto [mean, sd] = mean_std(accs);
        out.rows.push_back({variant, depths[di], mean, sd, runs, seconds});
        for (const auto& rec : cells[di * runs].result.metrics.curve) out.curves.push_back({variant, depths[di], rec});
    }

    const Cell& last = cells[(depths.size() - 1) * runs];
    ModelConfig m = cfg.model;
    m.depth = depths.back();
    if (cfg.train.dropout) m.dropout = *cfg.train.dropout;
    Checkpoint& ck = out.checkpoint;
    ck.model = m;
    ck.in_dim = g.d;
    ck.classes = g.c;
    ck.seed = init_seed(last.seed);
    ck.normalize_features = cfg.train.normalize_features;
    const Model shape_model(m, g.d, g.c, ck.seed);
    for (const auto& p : shape_model.parameters()) ck.names.push_back(p.name);
    ck.values = last.result.best_params;
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const GraphDataset& g, std::size_t jobs) {
    const auto depths = cfg.effective_depths();
    return depth_sweep(cfg, g, depths, jobs);
}

// ---- CSV / plot data --------------------------------------------------------

std::string format_report(std::span<const ReportRow> rows, bool include_seconds) {
    std::string s = "variant,depth,mean_acc,std_acc,runs,seconds\n";
    for (const auto& r : rows) {
        s += r.variant + ',' + std::to_string(r.depth) + ',' + format_double(r.mean_acc) + ',' +
             format_double(r.std_acc) + ',' + std::to_string(r.runs) + ',' +
             format_double(include_seconds ? r.seconds : 0.0) + '\n';
    }
    return s;
}

std::string format_runs(std::span<const RunRow> runs, bool include_seconds) {
    std::string s = "variant,depth,run,seed,test_acc,best_val_acc,best_epoch,epochs,seconds\n";
    for (const auto& r : runs) {
        s += r.variant + ',' + std::to_string(r.depth) + ',' + std::to_string(r.run) + ',' + std::to_string(r.seed) +
             ',' + format_double(r.test_acc) + ',' + format_double(r.best_val_acc) + ',' +
             std::to_string(r.best_epoch) + ',' + std::to_string(r.epochs) + ',' +
             format_double(include_seconds ? r.seconds : 0.0) + '\n';
    }
    return s;
}

std::string format_curves(std::span<const CurveRow> rows) {
    std::string s = "variant,depth,epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (const auto& c : rows) {
        const auto& e = c.record;
        s += c.variant + ',' + std::to_string(c.depth) + ',' + std::to_string(e.epoch) + ',' +
             format_double(e.train_loss) + ',' + format_double(e.train_acc) + ',' + format_double(e.val_loss) + ',' +
             format_double(e.val_acc) + '\n';
    }
    return s;
}

namespace {

ReportRow parse_row_fields(const std::vector<std::string_view>& f, std::string variant, std::size_t offset) {
    ReportRow r;
    r.variant = std::move(variant);
    r.depth = static_cast<std::size_t>(text::parse_int(f[offset], "depth"));
    r.mean_acc = text::parse_double(f[offset + 1], "mean_acc");
    r.std_acc = text::parse_double(f[offset + 2], "std_acc");
    r.runs = static_cast<std::size_t>(text::parse_int(f[offset + 3], "runs"));
    r.seconds = text::parse_double(f[offset + 4], "seconds");
    return r;
}

} // namespace

std::vector<ReportRow> parse_report(std::string_view text) {
    std::vector<ReportRow> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (text::is_blank(line)) continue;
        if (header) {
            header = false;
            continue;
        }
        const auto f = text::split(line, ',');
        if (f.size() != 6) throw DataError("report row needs 6 fields: " + line);
        rows.push_back(parse_row_fields(f, std::string(f[0]), 1));
    }
    return rows;
}

std::string emit_plot_data(std::span<const ReportRow> rows) {
    std::vector<ReportRow> sorted(rows.begin(), rows.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const ReportRow& a, const ReportRow& b) {
        return std::tie(a.variant, a.depth) < std::tie(b.variant, b.depth);
    });
    std::string s = "# depth,mean_acc,std_acc,runs,seconds\n";
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        const auto& r = sorted[k];
        if (k == 0 || r.variant != sorted[k - 1].variant) {
            if (k != 0) s += "\n\n";
            s += "# variant " + r.variant + '\n';
        }
        s += std::to_string(r.depth) + ',' + format_double(r.mean_acc) + ',' + format_double(r.std_acc) + ',' +
             std::to_string(r.runs) + ',' + format_double(r.seconds) + '\n';
    }
    return s;
}

std::vector<ReportRow> parse_plot_data(std::string_view text) {
    std::vector<ReportRow> rows;
    std::istringstream in{std::string(text)};
    std::string line, variant;
    constexpr std::string_view tag = "# variant ";
    while (std::getline(in, line)) {
        if (text::is_blank(line)) continue;
        if (line.rfind(tag, 0) == 0) {
            variant = std::string(text::trim(std::string_view(line).substr(tag.size())));
            continue;
        }
        if (line.front() == '#') continue;
        const auto f = text::split(line, ',');
        if (f.size() != 5) throw DataError("plot row needs 5 fields: " + line);
        if (variant.empty()) throw DataError("plot row before any variant block");
        rows.push_back(parse_row_fields(f, variant, 0));
    }
    return rows;
}

void write_outputs(const ExperimentResult& r, const std::filesystem::path& dir, bool report_wall_time) {
    std::filesystem::create_directories(dir);
    auto put = [&](const char* name, const std::string& content) {
        text::write_file_atomic((dir / name).string(), content);
    };
    put("report.csv", format_report(r.rows, report_wall_time));
    put("runs.csv", format_runs(r.runs, report_wall_time));
    put("curves.csv", format_curves(r.curves));
    std::vector<ReportRow> plot_rows = r.rows;
    if (!report_wall_time)
        for (auto& row : plot_rows) row.seconds = 0.0;
    put("plot.dat", emit_plot_data(plot_rows));
    std::string timing = "variant,depth,seconds\n";
    for (const auto& row : r.rows)
        timing += row.variant + ',' + std::to_string(row.depth) + ',' + format_double(row.seconds) + '\n';
    put("timing.csv", timing);
    if (!r.checkpoint.values.empty()) put("checkpoint.json", checkpoint_to_json(r.checkpoint));
}

// ---- Checkpoints ------------------------------------------------------------

std::string checkpoint_to_json(const Checkpoint& c) {
    using nlohmann::json;
    const ModelConfig& m = c.model;
    json model = {
        {"variant", to_string(m.variant)},
        {"depth", m.depth},
        {"hidden", m.hidden},
        {"dropout", m.dropout},
        {"alpha", m.alpha},
        {"theta", m.theta},
        {"beta_schedule", m.beta_schedule},
        {"jk_mode", to_string(m.jk_mode)},
        {"gate_mode", m.gate_mode == GateMode::learned ? "learned" : "fixed"},
        {"gate_init", m.gate_init},
        {"lambda_init", m.lambda_init},
        {"gamma_init", m.gamma_init},
        {"fixed_lambda", m.fixed_lambda},
        {"fixed_gamma", m.fixed_gamma},
        {"deep_switch", m.deep_switch},
        {"heads", m.heads},
        {"output_heads", m.output_heads},
        {"gat_slope", m.gat_slope},
        {"input_transform", m.uses_input_transform()},
        {"linear_propagation", m.linear_propagation},
        {"bias", m.bias},
    };
    json params = json::array();
    for (std::size_t k = 0; k < c.values.size(); ++k) {
        const Tensor& t = c.values[k];
        params.push_back({{"name", k < c.names.size() ? c.names[k] : ""},
                          {"shape", t.shape()},
                          {"data", std::vector<double>(t.data().begin(), t.data().end())}});
    }
    json j = {{"model", model},
              {"in_dim", c.in_dim},
              {"classes", c.classes},
              {"seed", c.seed},
              {"normalize_features", c.normalize_features},
              {"params", params}};
    return j.dump(1) + '\n';
}

Checkpoint checkpoint_from_json(std::string_view text) {
    using nlohmann::json;
    Checkpoint c;
    try {
        const json j = json::parse(text);
        const json& m = j.at("model");
        ModelConfig& mc = c.model;
        mc.variant = parse_variant(m.at("variant").get<std::string>());
        mc.depth = m.at("depth").get<std::size_t>();
        mc.hidden = m.at("hidden").get<std::size_t>();
        mc.dropout = m.at("dropout").get<double>();
        mc.alpha = m.at("alpha").get<double>();
        mc.theta = m.at("theta").get<double>();
        mc.beta_schedule = m.at("beta_schedule").get<std::vector<double>>();
        mc.jk_mode = parse_jk_mode(m.at("jk_mode").get<std::string>());
        mc.gate_mode = parse_gate_mode(m.at("gate_mode").get<std::string>());
        mc.gate_init = m.at("gate_init").get<double>();
        mc.lambda_init = m.at("lambda_init").get<double>();
        mc.gamma_init = m.at("gamma_init").get<double>();
        mc.fixed_lambda = m.at("fixed_lambda").get<double>();
        mc.fixed_gamma = m.at("fixed_gamma").get<double>();
        mc.deep_switch = m.at("deep_switch").get<std::size_t>();
        mc.heads = m.at("heads").get<std::size_t>();
        mc.output_heads = m.at("output_heads").get<std::size_t>();
        mc.gat_slope = m.at("gat_slope").get<double>();
        mc.input_transform = m.at("input_transform").get<bool>();
        mc.linear_propagation = m.at("linear_propagation").get<bool>();
        mc.bias = m.at("bias").get<bool>();
        c.in_dim = j.at("in_dim").get<std::size_t>();
        c.classes = j.at("classes").get<std::size_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.normalize_features = j.value("normalize_features", true);
        for (const auto& p : j.at("params")) {
            c.names.push_back(p.at("name").get<std::string>());
            c.values.emplace_back(p.at("shape").get<Tensor::Shape>(), p.at("data").get<std::vector<double>>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& file) {
    text::write_file_atomic(file.string(), checkpoint_to_json(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open checkpoint " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

Model model_from_checkpoint(const Checkpoint& c) {
    Model model(c.model, c.in_dim, c.classes, c.seed);
    const auto& params = model.parameters();
    if (params.size() != c.values.size()) throw DataError("checkpoint parameter count does not match the model");
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!c.names.empty() && c.names[k] != params[k].name) {
            throw DataError("checkpoint parameter '" + c.names[k] + "' where '" + params[k].name + "' was expected");
        }
        model.set_param(params[k].name, c.values[k]);
    }
    return model;
}

// ---- Residual diagnostic ----------------------------------------------------

std::vector<Residual> trace_residuals(std::span<const Tensor> trace) {
    std::vector<Residual> out;
    for (std::size_t l = 0; l + 1 < trace.size(); ++l) {
        const Tensor& a = trace[l];
        const Tensor& b = trace[l + 1];
        if (!a.same_shape(b)) continue;
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < a.numel(); ++k) {
            num += (b[k] - a[k]) * (b[k] - a[k]);
            den += a[k] * a[k];
        }
        double r = 0.0;
        if (den > 0.0) r = std::sqrt(num / den);
        else if (num > 0.0) r = std::numeric_limits<double>::infinity();
        out.push_back({l, r});
    }
    return out;
}

std::vector<Residual> layer_residuals(const Model& model, const Tensor& features, const SparseMatrix& adj) {
    std::vector<Tensor> trace;
    model.forward(ad::constant(features), adj, Mode::eval, 0, 0, &trace);
    return trace_residuals(trace);
}

std::string format_residuals(std::span<const Residual> residuals) {
    std::string s = "# relative Frobenius change between consecutive layers (convergence proxy)\nlayer,residual\n";
    for (const auto& r : residuals) s += std::to_string(r.layer) + ',' + format_double(r.value) + '\n';
    return s;
}

} // namespace fpgnn
