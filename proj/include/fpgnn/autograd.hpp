#pragma once

#include "fpgnn/tensor.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fpgnn {

using Labels = std::vector<int>;
/// Node mask; nonzero entries are selected.
using Mask = std::vector<std::uint8_t>;

namespace ad {

/// One vertex of the reverse-mode tape.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::string op;
    std::vector<std::shared_ptr<Node>> inputs;
    /// Reads this node's grad and accumulates into the inputs that require it.
    std::function<void(Node&)> backprop;
};

/// Shared handle to a tape node. Copies alias the same node.
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    const Tensor::Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return node_->has_grad; }
    /// Gradient from the last backward pass; a zero tensor when none was produced.
    Tensor grad() const;
    /// Leaf values only; used by optimizers and checkpoint loading.
    Tensor& mutable_value();
    void zero_grad();

    Node* node() const noexcept { return node_.get(); }
    const std::shared_ptr<Node>& shared() const noexcept { return node_; }
    explicit operator bool() const noexcept { return static_cast<bool>(node_); }

private:
    std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
Var parameter(Tensor value);

/// Populates grads of every requires-grad leaf reachable from `loss`.
/// Throws AutogradError for a non-scalar loss, for a cycle, or when a reachable
/// leaf still holds a gradient from an earlier pass (call zero_grad first).
void backward(const Var& loss);

// Linear algebra
Var matmul(const Var& a, const Var& b);
/// `s` is captured by reference and must outlive the backward pass.
Var spmm(const SparseMatrix& s, const Var& d);
/// As above, but the tape shares ownership of `s`.
Var spmm(std::shared_ptr<const SparseMatrix> s, const Var& d);

// Elementwise and broadcasting
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double c);
/// s * a where s holds a single value.
Var mul_scalar(const Var& s, const Var& a);
/// 1 - s, elementwise.
Var one_minus(const Var& s);
/// Adds a length-h bias to every row of an n x h matrix.
Var add_bias(const Var& a, const Var& bias);
Var relu(const Var& a);
Var elu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
/// Zeroes each entry with probability p and rescales survivors by 1/(1-p).
/// The mask is a pure function of `key`.
Var dropout(const Var& a, double p, std::uint64_t key);
/// dropout(constant(x), p, key) in CSR form, where `x` is the CSR form of a
/// constant dense matrix.
std::shared_ptr<const SparseMatrix> dropout_sparse(const SparseMatrix& x, double p, std::uint64_t key);

// Row-wise
Var row_softmax(const Var& a);
Var log_row_softmax(const Var& a);

// Reductions
Var sum(const Var& a);
Var mean(const Var& a);
Var sum_squares(const Var& a);

// Combination of several same-shaped tensors
Var concat_cols(std::span<const Var> parts);
Var elementwise_max(std::span<const Var> parts);
/// Sum_l weights[l] * reps[l]; weights may have any shape with reps.size() entries.
Var weighted_sum(std::span<const Var> reps, const Var& weights);

/// Mean over masked rows of -logp[i, labels[i]].
Var masked_nll(const Var& logp, const Labels& labels, const Mask& mask);

/// Attention coefficients over the sparsity pattern of `pattern`, aligned with
/// its CSR entries: alpha_ij = softmax_j leaky(wh_i . att_dst + wh_j . att_src).
std::vector<double> gat_attention(const Tensor& wh, const Tensor& att_dst, const Tensor& att_src,
                                  const SparseMatrix& pattern, double slope);
/// out_i = sum_j alpha_ij wh_j with alpha from gat_attention. Differentiable in
/// wh and both attention vectors. `pattern` must outlive the backward pass.
Var gat_aggregate(const Var& wh, const Var& att_dst, const Var& att_src, const SparseMatrix& pattern,
                  double slope);

} // namespace ad
} // namespace fpgnn
