#pragma once

#include "fpgnn/autograd.hpp"
#include "fpgnn/tensor.hpp"

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fpgnn {

enum class Variant { gcn, sgc, gat, appnp, gcnii, jknet, dgcn, cognet };
enum class JkMode { attention, concat, maxpool };
enum class GateMode { learned, fixed };
enum class Activation { identity, relu, elu };
enum class Mode { train, eval };

std::string_view to_string(Variant v) noexcept;
std::string_view to_string(JkMode m) noexcept;
/// Case-insensitive; throws ConfigError on unknown names.
Variant parse_variant(std::string_view name);
JkMode parse_jk_mode(std::string_view name);
GateMode parse_gate_mode(std::string_view name);

/// Architecture of one model.
///
/// Variants with `input_transform` wrap their propagation in a linear-in
/// (relu) / linear-out envelope: H0 = relu(X W_in + b_in), logits = H_L W_out +
/// b_out. Without it, GCN and GAT stack d -> hidden -> ... -> classes layers
/// and the propagation-only variants operate on the raw features.
struct ModelConfig {
    Variant variant = Variant::gcn;
    std::size_t depth = 2;
    std::size_t hidden = 64;
    double dropout = 0.5;
    /// Initial-residual weight (APPNP, GCNII).
    double alpha = 0.1;
    /// GCNII identity-mapping schedule beta_l = log(theta / l + 1).
    double theta = 0.5;
    /// Explicit per-layer betas; overrides theta for GCNII and freezes DGCN's betas.
    std::vector<double> beta_schedule;
    JkMode jk_mode = JkMode::attention;
    GateMode gate_mode = GateMode::learned;
    /// Initial value of DGCN's learned betas, in (0,1).
    double gate_init = 0.5;
    /// Initial values of CoGNet's learned gates, in (0,1).
    double lambda_init = 0.5;
    double gamma_init = 0.5;
    /// CoGNet gate values used when gate_mode == fixed; [0,1] allowed.
    double fixed_lambda = 0.5;
    double fixed_gamma = 0.5;
    /// CoGNet layers with index > deep_switch couple with H0 instead of H^(l-2).
    std::size_t deep_switch = 2;
    std::size_t heads = 8;
    std::size_t output_heads = 1;
    double gat_slope = 0.2;
    /// Defaults per variant when unset (see uses_input_transform).
    std::optional<bool> input_transform;
    /// Drops sigma inside propagation layers; used for the linear reduction identities.
    bool linear_propagation = false;
    /// Bias on GCN convolutions.
    bool bias = true;

    bool uses_input_transform() const noexcept;
    /// Throws ConfigError on an inconsistent configuration.
    void validate() const;
};

/// Default architecture per variant.
ModelConfig model_preset(Variant v);

/// GCNII beta for 1-based layer index.
double gcnii_beta(const ModelConfig& cfg, std::size_t layer);

// ---- Layer operations -------------------------------------------------------

/// sigma(A H W + b); pass an empty bias handle for no bias.
ad::Var gcn_layer(const ad::Var& h, const SparseMatrix& adj, const ad::Var& weight, const ad::Var& bias,
                  Activation act);

/// A^K X by K repeated sparse products.
ad::Var sgc_propagate(const ad::Var& x, const SparseMatrix& adj, std::size_t k);

struct GatHead {
    ad::Var weight;   // in x f
    ad::Var att_dst;  // f
    ad::Var att_src;  // f
};

/// Multi-head attention layer over the sparsity pattern of `adj` (self-loops
/// included). Heads are concatenated, or averaged when `average_heads`.
ad::Var gat_layer(const ad::Var& h, const SparseMatrix& adj, std::span<const GatHead> heads, bool average_heads,
                  double slope, Activation act);

/// H <- (1 - alpha) A H + alpha H0, applied L times starting from H0.
ad::Var appnp_propagate(const ad::Var& h0, const SparseMatrix& adj, double alpha, std::size_t layers);

/// beta * (S W) + (1 - beta) * S.
ad::Var identity_mapping(const ad::Var& s, const ad::Var& weight, const ad::Var& beta);

/// sigma(((1 - alpha) A H + alpha H0)((1 - beta) I + beta W)).
ad::Var gcnii_layer(const ad::Var& h, const ad::Var& h0, const SparseMatrix& adj, double alpha, double beta,
                    const ad::Var& weight, Activation act);

/// Attention: sum_l softmax(logits)_l R_l. Maxpool: entrywise max. Concat:
/// feature-axis concatenation (a linear head is applied by the caller).
ad::Var jk_combine(std::span<const ad::Var> reps, JkMode mode, const ad::Var& attention_logits);

/// Z = sum_l alpha_l A^l X (beta_l W_l + (1 - beta_l) I), alpha = softmax(logits).
ad::Var dgcn_combine(const ad::Var& x, const SparseMatrix& adj, std::size_t layers, const ad::Var& alpha_logits,
                     std::span<const ad::Var> betas, std::span<const ad::Var> weights);

struct CouplingOutput {
    ad::Var coupled; // G = gamma A H + (1 - gamma) H_prev
    ad::Var p;       // G (lambda W + (1 - lambda) I)
    ad::Var h;       // sigma(P)
};

ad::Var coupling(const ad::Var& h, const ad::Var& h_prev, const SparseMatrix& adj, const ad::Var& gamma);
CouplingOutput cognet_layer(const ad::Var& h, const ad::Var& h_prev, const SparseMatrix& adj, const ad::Var& lambda,
                            const ad::Var& gamma, const ad::Var& weight, Activation act = Activation::relu);

/// H_prev = (G - gamma A H) / (1 - gamma). NumericError when gamma is within
/// 1e-6 of 1.
Tensor reversible_recover(const Tensor& coupled, const Tensor& h, const SparseMatrix& adj, double gamma);

// ---- Models -----------------------------------------------------------------

enum class ParamGroup { input, propagation, output };

struct Parameter {
    std::string name;
    ad::Var var;
    ParamGroup group;
};

/// Parameters plus the per-variant layer stack.
class Model {
public:
    /// Parameter values are a pure function of (seed, parameter name, shape).
    Model(ModelConfig cfg, std::size_t in_dim, std::size_t num_classes, std::uint64_t seed);

    const ModelConfig& config() const noexcept { return cfg_; }
    std::size_t in_dim() const noexcept { return in_dim_; }
    std::size_t num_classes() const noexcept { return classes_; }

    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }
    const ad::Var& param(const std::string& name) const;
    bool has_param(const std::string& name) const { return index_.count(name) != 0; }
    void set_param(const std::string& name, const Tensor& value);
    /// Snapshot / restore of all parameter values, in parameters() order.
    std::vector<Tensor> values() const;
    void load_values(std::span<const Tensor> values);

    /// Per-node logits. Dropout masks are keyed by (dropout_seed, site, epoch)
    /// and active only in train mode. When `trace` is given it receives the
    /// node representation entering and leaving every propagation step.
    ad::Var forward(const ad::Var& features, const SparseMatrix& adj, Mode mode, std::uint64_t dropout_seed = 0,
                    std::uint64_t epoch = 0, std::vector<Tensor>* trace = nullptr) const;

private:
    ad::Var add_param(const std::string& name, Tensor value, ParamGroup group);
    ad::Var add_glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out, ParamGroup group);
    ad::Var gate(const std::string& name) const;
    /// CSR form of a constant feature matrix, cached per feature node.
    std::shared_ptr<const SparseMatrix> feature_csr(const ad::Var& features) const;

    struct FeatureCache {
        std::mutex mutex;
        std::weak_ptr<ad::Node> node;
        std::shared_ptr<const SparseMatrix> csr;
    };

    ModelConfig cfg_;
    std::size_t in_dim_;
    std::size_t classes_;
    std::uint64_t seed_;
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
    std::shared_ptr<FeatureCache> cache_ = std::make_shared<FeatureCache>();
};

/// Convenience wrapper over Model::forward with a constant feature node.
ad::Var forward_model(const Model& model, const Tensor& features, const SparseMatrix& adj, Mode mode,
                      std::uint64_t dropout_seed = 0, std::uint64_t epoch = 0);

} // namespace fpgnn
