#include "fpgnn/zoo.hpp"

#include "fpgnn/errors.hpp"
#include "fpgnn/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace fpgnn {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

ad::Var activate(const ad::Var& x, Activation act) {
    switch (act) {
    case Activation::relu: return ad::relu(x);
    case Activation::elu: return ad::elu(x);
    case Activation::identity: break;
    }
    return x;
}

ad::Var scalar_const(double v) { return ad::constant(Tensor::scalar(v)); }

} // namespace

std::string_view to_string(Variant v) noexcept {
    switch (v) {
    case Variant::gcn: return "gcn";
    case Variant::sgc: return "sgc";
    case Variant::gat: return "gat";
    case Variant::appnp: return "appnp";
    case Variant::gcnii: return "gcnii";
    case Variant::jknet: return "jknet";
    case Variant::dgcn: return "dgcn";
    case Variant::cognet: return "cognet";
    }
    return "?";
}

std::string_view to_string(JkMode m) noexcept {
    switch (m) {
    case JkMode::attention: return "attention";
    case JkMode::concat: return "concat";
    case JkMode::maxpool: return "maxpool";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    const std::string s = lower(name);
    for (Variant v : {Variant::gcn, Variant::sgc, Variant::gat, Variant::appnp, Variant::gcnii, Variant::jknet,
                      Variant::dgcn, Variant::cognet})
        if (s == to_string(v)) return v;
    throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

JkMode parse_jk_mode(std::string_view name) {
    const std::string s = lower(name);
    for (JkMode m : {JkMode::attention, JkMode::concat, JkMode::maxpool})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown jk combine mode '" + std::string(name) + "'");
}

GateMode parse_gate_mode(std::string_view name) {
    const std::string s = lower(name);
    if (s == "learned") return GateMode::learned;
    if (s == "fixed") return GateMode::fixed;
    throw ConfigError("unknown gate mode '" + std::string(name) + "'");
}

bool ModelConfig::uses_input_transform() const noexcept {
    if (input_transform) return *input_transform;
    switch (variant) {
    case Variant::gcn:
    case Variant::sgc:
    case Variant::gat: return false;
    default: return true;
    }
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("model: " + msg); };
    if (hidden == 0) fail("hidden must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0,1)");
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0,1]");
    if (!(theta >= 0.0)) fail("theta must be nonnegative");
    for (double b : beta_schedule)
        if (!(b >= 0.0 && b <= 1.0)) fail("beta schedule values must lie in [0,1]");
    if (!beta_schedule.empty() && beta_schedule.size() < depth) fail("beta schedule shorter than depth");
    for (double g : {gate_init, lambda_init, gamma_init})
        if (!(g > 0.0 && g < 1.0)) fail("gate initial values must lie in (0,1)");
    if (!(fixed_lambda >= 0.0 && fixed_lambda <= 1.0) || !(fixed_gamma >= 0.0 && fixed_gamma <= 1.0)) {
        fail("fixed gates must lie in [0,1]");
    }
    if (variant == Variant::gat) {
        if (heads == 0 || output_heads == 0) fail("GAT needs at least one head");
        if (hidden % heads != 0) fail("GAT hidden width must be divisible by heads");
    }
}

ModelConfig model_preset(Variant v) {
    ModelConfig c;
    c.variant = v;
    switch (v) {
    case Variant::gcn: c.depth = 2; c.hidden = 64; c.dropout = 0.5; break;
    case Variant::sgc: c.depth = 2; c.dropout = 0.0; break;
    case Variant::gat: c.depth = 2; c.hidden = 64; c.heads = 8; c.dropout = 0.6; break;
    case Variant::appnp: c.depth = 10; c.hidden = 64; c.alpha = 0.1; c.dropout = 0.5; break;
    case Variant::gcnii: c.depth = 16; c.hidden = 64; c.alpha = 0.1; c.theta = 0.5; c.dropout = 0.6; break;
    case Variant::jknet: c.depth = 4; c.hidden = 64; c.dropout = 0.5; break;
    case Variant::dgcn: c.depth = 8; c.hidden = 64; c.dropout = 0.5; break;
    case Variant::cognet: c.depth = 16; c.hidden = 64; c.dropout = 0.6; c.lambda_init = 0.02; c.gamma_init = 0.9; c.deep_switch = 2; break;
    }
    return c;
}

double gcnii_beta(const ModelConfig& cfg, std::size_t layer) {
    if (!cfg.beta_schedule.empty()) return cfg.beta_schedule.at(layer - 1);
    return std::log(cfg.theta / static_cast<double>(layer) + 1.0);
}

// ---- Layer operations -------------------------------------------------------

ad::Var gcn_layer(const ad::Var& h, const SparseMatrix& adj, const ad::Var& weight, const ad::Var& bias,
                  Activation act) {
    const auto& w = weight.value();
    if (h.value().rank() != 2 || w.rank() != 2 || h.value().cols() != w.rows()) {
        throw ShapeError("gcn_layer: features " + shape_string(h.shape()) + " vs weight " + shape_string(w.shape()));
    }
    // Propagate on the narrower side.
    ad::Var z = w.rows() > w.cols() ? ad::spmm(adj, ad::matmul(h, weight)) : ad::matmul(ad::spmm(adj, h), weight);
    if (bias) z = ad::add_bias(z, bias);
    return activate(z, act);
}

ad::Var sgc_propagate(const ad::Var& x, const SparseMatrix& adj, std::size_t k) {
    ad::Var h = x;
    for (std::size_t step = 0; step < k; ++step) h = ad::spmm(adj, h);
    return h;
}

namespace {

// Attention-weighted aggregation of per-head projections wh_q = H W_q.
ad::Var gat_heads(std::span<const ad::Var> whs, std::span<const GatHead> heads, const SparseMatrix& adj,
                  bool average_heads, double slope, Activation act) {
    std::vector<ad::Var> outs;
    outs.reserve(heads.size());
    for (std::size_t q = 0; q < heads.size(); ++q)
        outs.push_back(ad::gat_aggregate(whs[q], heads[q].att_dst, heads[q].att_src, adj, slope));
    ad::Var z;
    if (outs.size() == 1) {
        z = outs[0];
    } else if (average_heads) {
        z = outs[0];
        for (std::size_t q = 1; q < outs.size(); ++q) z = ad::add(z, outs[q]);
        z = ad::scale(z, 1.0 / static_cast<double>(outs.size()));
    } else {
        z = ad::concat_cols(outs);
    }
    return activate(z, act);
}

} // namespace

ad::Var gat_layer(const ad::Var& h, const SparseMatrix& adj, std::span<const GatHead> heads, bool average_heads,
                  double slope, Activation act) {
    if (heads.empty()) throw ShapeError("gat_layer needs at least one head");
    std::vector<ad::Var> whs;
    whs.reserve(heads.size());
    for (const auto& head : heads) whs.push_back(ad::matmul(h, head.weight));
    return gat_heads(whs, heads, adj, average_heads, slope, act);
}

ad::Var appnp_propagate(const ad::Var& h0, const SparseMatrix& adj, double alpha, std::size_t layers) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("appnp alpha must lie in [0,1]");
    ad::Var h = h0;
    for (std::size_t l = 0; l < layers; ++l) h = ad::add(ad::scale(ad::spmm(adj, h), 1.0 - alpha), ad::scale(h0, alpha));
    return h;
}

ad::Var identity_mapping(const ad::Var& s, const ad::Var& weight, const ad::Var& beta) {
    return ad::add(ad::mul_scalar(beta, ad::matmul(s, weight)), ad::mul_scalar(ad::one_minus(beta), s));
}

ad::Var gcnii_layer(const ad::Var& h, const ad::Var& h0, const SparseMatrix& adj, double alpha, double beta,
                    const ad::Var& weight, Activation act) {
    if (!(alpha >= 0.0 && alpha <= 1.0) || !(beta >= 0.0 && beta <= 1.0)) {
        throw DomainError("gcnii alpha and beta must lie in [0,1]");
    }
    if (h.shape() != h0.shape()) throw ShapeError("gcnii_layer: H and H0 differ in shape");
    ad::Var support = ad::add(ad::scale(ad::spmm(adj, h), 1.0 - alpha), ad::scale(h0, alpha));
    return activate(identity_mapping(support, weight, scalar_const(beta)), act);
}

ad::Var jk_combine(std::span<const ad::Var> reps, JkMode mode, const ad::Var& attention_logits) {
    if (reps.empty()) throw ShapeError("jk_combine needs at least one representation");
    switch (mode) {
    case JkMode::attention: {
        if (attention_logits.value().numel() != reps.size()) throw ShapeError("jk_combine: one logit per layer");
        ad::Var logits = attention_logits;
        if (logits.value().rank() != 2) throw ShapeError("jk_combine: logits must be a 1 x L matrix");
        return ad::weighted_sum(reps, ad::row_softmax(logits));
    }
    case JkMode::maxpool: return ad::elementwise_max(reps);
    case JkMode::concat: return ad::concat_cols(reps);
    }
    throw ShapeError("jk_combine: unknown mode");
}

ad::Var dgcn_combine(const ad::Var& x, const SparseMatrix& adj, std::size_t layers, const ad::Var& alpha_logits,
                     std::span<const ad::Var> betas, std::span<const ad::Var> weights) {
    if (layers == 0) throw ShapeError("dgcn_combine needs at least one layer");
    if (betas.size() != layers || weights.size() != layers) throw ShapeError("dgcn_combine: one beta and W per layer");
    std::vector<ad::Var> terms;
    terms.reserve(layers);
    ad::Var p = x;
    for (std::size_t l = 0; l < layers; ++l) {
        p = ad::spmm(adj, p);
        terms.push_back(identity_mapping(p, weights[l], betas[l]));
    }
    return jk_combine(terms, JkMode::attention, alpha_logits);
}

ad::Var coupling(const ad::Var& h, const ad::Var& h_prev, const SparseMatrix& adj, const ad::Var& gamma) {
    if (h.shape() != h_prev.shape()) throw ShapeError("coupling: H and H_prev differ in shape");
    return ad::add(ad::mul_scalar(gamma, ad::spmm(adj, h)), ad::mul_scalar(ad::one_minus(gamma), h_prev));
}

CouplingOutput cognet_layer(const ad::Var& h, const ad::Var& h_prev, const SparseMatrix& adj, const ad::Var& lambda,
                            const ad::Var& gamma, const ad::Var& weight, Activation act) {
    CouplingOutput out;
    out.coupled = coupling(h, h_prev, adj, gamma);
    out.p = identity_mapping(out.coupled, weight, lambda);
    out.h = activate(out.p, act);
    return out;
}

Tensor reversible_recover(const Tensor& coupled, const Tensor& h, const SparseMatrix& adj, double gamma) {
    if (!(std::abs(1.0 - gamma) > 1e-6)) {
        throw NumericError("reversible_recover: gamma=" + std::to_string(gamma) + " is too close to 1");
    }
    Tensor ah = sparse_dense_matmul(adj, h);
    if (!ah.same_shape(coupled)) throw ShapeError("reversible_recover: G and A H differ in shape");
    Tensor prev = coupled;
    const double inv = 1.0 / (1.0 - gamma);
    for (std::size_t k = 0; k < prev.numel(); ++k) prev[k] = (coupled[k] - gamma * ah[k]) * inv;
    return prev;
}

// ---- Model ------------------------------------------------------------------

ad::Var Model::add_param(const std::string& name, Tensor value, ParamGroup group) {
    ad::Var v = ad::parameter(std::move(value));
    index_[name] = params_.size();
    params_.push_back({name, v, group});
    return v;
}

ad::Var Model::add_glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out, ParamGroup group) {
    CounterRng rng(derive_seed(seed_, hash_string(name)));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w({fan_in, fan_out});
    for (double& v : w.storage()) v = rng.uniform(-limit, limit);
    return add_param(name, std::move(w), group);
}

Model::Model(ModelConfig cfg, std::size_t in_dim, std::size_t num_classes, std::uint64_t seed)
    : cfg_(std::move(cfg)), in_dim_(in_dim), classes_(num_classes), seed_(seed) {
    cfg_.validate();
    if (in_dim == 0 || num_classes == 0) throw ConfigError("model needs positive input and class dimensions");
    const std::size_t L = cfg_.depth;
    const std::size_t h = cfg_.hidden;
    const bool envelope = cfg_.uses_input_transform();
    const auto logit = [](double p) { return std::log(p / (1.0 - p)); };

    if (L == 0) {
        add_glorot("out.W", in_dim, num_classes, ParamGroup::output);
        add_param("out.b", Tensor({num_classes}), ParamGroup::output);
        return;
    }
    if (envelope) {
        add_glorot("in.W", in_dim, h, ParamGroup::input);
        add_param("in.b", Tensor({h}), ParamGroup::input);
    }
    const std::size_t width = envelope ? h : in_dim;

    auto add_gate = [&](const std::string& name, double init) {
        add_param(name, Tensor::scalar(logit(init)), ParamGroup::propagation);
    };

    switch (cfg_.variant) {
    case Variant::gcn:
        for (std::size_t l = 1; l <= L; ++l) {
            const std::string p = "layer" + std::to_string(l);
            if (envelope) {
                add_glorot(p + ".W", h, h, ParamGroup::propagation);
                if (cfg_.bias) add_param(p + ".b", Tensor({h}), ParamGroup::propagation);
            } else {
                const std::size_t fi = l == 1 ? in_dim : h;
                const std::size_t fo = l == L ? num_classes : h;
                const ParamGroup g = l == 1 ? ParamGroup::input : l == L ? ParamGroup::output : ParamGroup::propagation;
                add_glorot(p + ".W", fi, fo, g);
                if (cfg_.bias) add_param(p + ".b", Tensor({fo}), g);
            }
        }
        break;
    case Variant::gat: {
        const std::size_t per_head = h / cfg_.heads;
        for (std::size_t l = 1; l <= L; ++l) {
            const std::string p = "layer" + std::to_string(l);
            const bool last = !envelope && l == L;
            const std::size_t fi = (l == 1 && !envelope) ? in_dim : h;
            const std::size_t nh = last ? cfg_.output_heads : cfg_.heads;
            const std::size_t fo = last ? num_classes : per_head;
            const ParamGroup g = (l == 1 && !envelope) ? ParamGroup::input : last ? ParamGroup::output
                                                                                   : ParamGroup::propagation;
            for (std::size_t q = 0; q < nh; ++q) {
                const std::string hp = p + ".head" + std::to_string(q);
                add_glorot(hp + ".W", fi, fo, g);
                ad::Var dst = add_glorot(hp + ".att_dst", fo, 1, g);
                ad::Var src = add_glorot(hp + ".att_src", fo, 1, g);
                // Stored as column vectors by glorot; flatten to length fo.
                const auto flat = [fo](const Tensor& t) { return Tensor({fo}, {t.data().begin(), t.data().end()}); };
                dst.mutable_value() = flat(dst.value());
                src.mutable_value() = flat(src.value());
            }
            add_param(p + ".b", Tensor({last ? num_classes : h}), g);
        }
        break;
    }
    case Variant::sgc:
    case Variant::appnp: break;
    case Variant::gcnii:
        for (std::size_t l = 1; l <= L; ++l) add_glorot("layer" + std::to_string(l) + ".W", h, h, ParamGroup::propagation);
        break;
    case Variant::jknet:
        for (std::size_t l = 1; l <= L; ++l) add_glorot("layer" + std::to_string(l) + ".W", h, h, ParamGroup::propagation);
        if (cfg_.jk_mode == JkMode::attention) add_param("jk.logits", Tensor({1, L}), ParamGroup::propagation);
        break;
    case Variant::dgcn:
        for (std::size_t l = 1; l <= L; ++l) {
            const std::string p = "layer" + std::to_string(l);
            add_glorot(p + ".W", h, h, ParamGroup::propagation);
            if (cfg_.beta_schedule.empty()) add_gate(p + ".beta", cfg_.gate_init);
        }
        add_param("jk.logits", Tensor({1, L}), ParamGroup::propagation);
        break;
    case Variant::cognet:
        for (std::size_t l = 1; l <= L; ++l) {
            const std::string p = "layer" + std::to_string(l);
            add_glorot(p + ".W", h, h, ParamGroup::propagation);
            if (cfg_.gate_mode == GateMode::learned) {
                add_gate(p + ".lambda", cfg_.lambda_init);
                add_gate(p + ".gamma", cfg_.gamma_init);
            }
        }
        break;
    }

    const bool needs_head = envelope || cfg_.variant == Variant::sgc || cfg_.variant == Variant::appnp;
    if (needs_head) {
        const std::size_t head_in = (cfg_.variant == Variant::jknet && cfg_.jk_mode == JkMode::concat) ? width * L : width;
        add_glorot("out.W", head_in, num_classes, ParamGroup::output);
        add_param("out.b", Tensor({num_classes}), ParamGroup::output);
    }
}

const ad::Var& Model::param(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("model has no parameter '" + name + "'");
    return params_[it->second].var;
}

void Model::set_param(const std::string& name, const Tensor& value) {
    ad::Var v = param(name);
    if (!v.value().same_shape(value)) {
        throw ShapeError("set_param " + name + ": " + shape_string(value.shape()) + " vs " + shape_string(v.shape()));
    }
    v.mutable_value() = value;
}

std::vector<Tensor> Model::values() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.var.value());
    return out;
}

void Model::load_values(std::span<const Tensor> values) {
    if (values.size() != params_.size()) throw ShapeError("load_values: parameter count mismatch");
    for (std::size_t k = 0; k < values.size(); ++k) set_param(params_[k].name, values[k]);
}

ad::Var Model::gate(const std::string& name) const { return ad::sigmoid(param(name)); }

std::shared_ptr<const SparseMatrix> Model::feature_csr(const ad::Var& features) const {
    const std::lock_guard lock(cache_->mutex);
    const auto node = features.shared();
    if (cache_->node.lock() != node || !cache_->csr) {
        cache_->node = node;
        cache_->csr = std::make_shared<const SparseMatrix>(SparseMatrix::from_dense(features.value()));
    }
    return cache_->csr;
}

ad::Var Model::forward(const ad::Var& features, const SparseMatrix& adj, Mode mode, std::uint64_t dropout_seed,
                       std::uint64_t epoch, std::vector<Tensor>* trace) const {
    const auto& x = features.value();
    if (x.rank() != 2 || x.cols() != in_dim_) {
        throw ShapeError("model expects features with " + std::to_string(in_dim_) + " columns, got " +
                         shape_string(x.shape()));
    }
    if (adj.rows() != x.rows() || adj.cols() != x.rows()) throw ShapeError("adjacency does not match node count");

    const bool dropping = mode == Mode::train && cfg_.dropout > 0.0;
    // Site 1 is the raw feature matrix; every later dropout takes the next site.
    const std::uint64_t feature_key = derive_seed(dropout_seed, 1, epoch);
    std::uint64_t site = 1;
    auto drop = [&](const ad::Var& v) {
        ++site;
        if (!dropping) return v;
        return ad::dropout(v, cfg_.dropout, derive_seed(dropout_seed, site, epoch));
    };
    ad::Var x_dense;
    auto dropped_features = [&] {
        if (!x_dense) x_dense = dropping ? ad::dropout(features, cfg_.dropout, feature_key) : features;
        return x_dense;
    };
    // dropout(X) W. Constant features go through CSR, which gives the same
    // values as the dense product since both skip zeros in ascending order.
    std::shared_ptr<const SparseMatrix> x_sparse;
    auto features_times = [&](const ad::Var& w) {
        if (features.requires_grad()) return ad::matmul(dropped_features(), w);
        if (!x_sparse) x_sparse = ad::dropout_sparse(*feature_csr(features), dropping ? cfg_.dropout : 0.0, feature_key);
        return ad::spmm(x_sparse, w);
    };
    auto record = [&](const ad::Var& v) {
        if (trace) trace->push_back(v.value());
    };
    auto head = [&](const ad::Var& v) { return ad::add_bias(ad::matmul(drop(v), param("out.W")), param("out.b")); };
    const Activation act = cfg_.linear_propagation ? Activation::identity : Activation::relu;
    const std::size_t L = cfg_.depth;

    if (L == 0) return ad::add_bias(features_times(param("out.W")), param("out.b"));

    const bool envelope = cfg_.uses_input_transform();
    ad::Var h0 = envelope ? ad::relu(ad::add_bias(features_times(param("in.W")), param("in.b"))) : features;
    record(h0);

    switch (cfg_.variant) {
    case Variant::gcn: {
        ad::Var h = h0;
        for (std::size_t l = 1; l <= L; ++l) {
            const std::string p = "layer" + std::to_string(l);
            const bool last = !envelope && l == L;
            const ad::Var bias = cfg_.bias ? param(p + ".b") : ad::Var{};
            const Activation a = last ? Activation::identity : act;
            if (l == 1 && !envelope) {
                ad::Var z = ad::spmm(adj, features_times(param(p + ".W")));
                h = activate(bias ? ad::add_bias(z, bias) : z, a);
            } else {
                h = gcn_layer(drop(h), adj, param(p + ".W"), bias, a);
            }
            record(h);
        }
        return envelope ? head(h) : h;
    }
    case Variant::sgc: {
        ad::Var h = h0;
        for (std::size_t l = 0; l < L; ++l) {
            h = ad::spmm(adj, h);
            record(h);
        }
        return head(h);
    }
    case Variant::gat: {
        ad::Var h = h0;
        for (std::size_t l = 1; l <= L; ++l) {
            const std::string p = "layer" + std::to_string(l);
            const bool last = !envelope && l == L;
            const std::size_t nh = last ? cfg_.output_heads : cfg_.heads;
            std::vector<GatHead> heads;
            for (std::size_t q = 0; q < nh; ++q) {
                const std::string hp = p + ".head" + std::to_string(q);
                heads.push_back({param(hp + ".W"), param(hp + ".att_dst"), param(hp + ".att_src")});
            }
            std::vector<ad::Var> whs;
            const ad::Var hd = (l == 1 && !envelope) ? ad::Var{} : drop(h);
            for (const auto& hq : heads) whs.push_back(hd ? ad::matmul(hd, hq.weight) : features_times(hq.weight));
            ad::Var z = gat_heads(whs, heads, adj, last, cfg_.gat_slope, Activation::identity);
            z = ad::add_bias(z, param(p + ".b"));
            h = last ? z : (cfg_.linear_propagation ? z : ad::elu(z));
            record(h);
        }
        return envelope ? head(h) : h;
    }
    case Variant::appnp: {
        ad::Var h = envelope ? h0 : dropped_features();
        const ad::Var start = h;
        for (std::size_t l = 0; l < L; ++l) {
            h = ad::add(ad::scale(ad::spmm(adj, h), 1.0 - cfg_.alpha), ad::scale(start, cfg_.alpha));
            record(h);
        }
        return envelope ? head(h) : ad::add_bias(ad::matmul(h, param("out.W")), param("out.b"));
    }
    case Variant::gcnii: {
        ad::Var h = h0;
        for (std::size_t l = 1; l <= L; ++l) {
            h = gcnii_layer(drop(h), h0, adj, cfg_.alpha, gcnii_beta(cfg_, l), param("layer" + std::to_string(l) + ".W"),
                            act);
            record(h);
        }
        return head(h);
    }
    case Variant::jknet: {
        std::vector<ad::Var> reps;
        ad::Var h = h0;
        for (std::size_t l = 1; l <= L; ++l) {
            h = gcn_layer(drop(h), adj, param("layer" + std::to_string(l) + ".W"), ad::Var{}, act);
            reps.push_back(h);
            record(h);
        }
        const ad::Var logits = cfg_.jk_mode == JkMode::attention ? param("jk.logits") : ad::Var{};
        return head(jk_combine(reps, cfg_.jk_mode, logits));
    }
    case Variant::dgcn: {
        std::vector<ad::Var> betas, weights;
        for (std::size_t l = 1; l <= L; ++l) {
            const std::string p = "layer" + std::to_string(l);
            weights.push_back(param(p + ".W"));
            betas.push_back(cfg_.beta_schedule.empty() ? gate(p + ".beta") : scalar_const(cfg_.beta_schedule[l - 1]));
        }
        if (trace) {
            ad::Var p = h0;
            for (std::size_t l = 0; l < L; ++l) record(p = ad::spmm(adj, p));
        }
        return head(dgcn_combine(drop(h0), adj, L, param("jk.logits"), betas, weights));
    }
    case Variant::cognet: {
        std::vector<ad::Var> hs{h0};
        for (std::size_t l = 1; l <= L; ++l) {
            const std::string p = "layer" + std::to_string(l);
            const ad::Var& prev = (l == 1 || l > cfg_.deep_switch) ? hs[0] : hs[l - 2];
            ad::Var lambda, gamma;
            if (cfg_.gate_mode == GateMode::learned) {
                lambda = gate(p + ".lambda");
                gamma = gate(p + ".gamma");
            } else {
                lambda = scalar_const(cfg_.fixed_lambda);
                gamma = scalar_const(cfg_.fixed_gamma);
            }
            hs.push_back(cognet_layer(drop(hs[l - 1]), prev, adj, lambda, gamma, param(p + ".W"), act).h);
            record(hs.back());
        }
        return head(hs.back());
    }
    }
    throw ConfigError("unhandled variant");
}

ad::Var forward_model(const Model& model, const Tensor& features, const SparseMatrix& adj, Mode mode,
                      std::uint64_t dropout_seed, std::uint64_t epoch) {
    return model.forward(ad::constant(features), adj, mode, dropout_seed, epoch);
}

} // namespace fpgnn
