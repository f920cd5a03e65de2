#include "fpgnn/autograd.hpp"

#include "fpgnn/errors.hpp"
#include "fpgnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace fpgnn::ad {

namespace {

using NodePtr = std::shared_ptr<Node>;

// Zero-filled grad buffer for an input, allocated on first use.
Tensor& grad_of(Node& n) {
    if (n.grad.numel() != n.value.numel() || n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

Var make(std::string op, Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backprop) {
    if (!value.all_finite()) throw NumericError(op + " produced non-finite values");
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = std::move(op);
    for (const auto& in : inputs) node->requires_grad = node->requires_grad || in.requires_grad();
    if (node->requires_grad) {
        node->inputs.reserve(inputs.size());
        for (const auto& in : inputs) node->inputs.push_back(in.shared());
        node->backprop = std::move(backprop);
    }
    return Var(std::move(node));
}

void require_matrix(const Var& a, const char* op) {
    if (a.value().rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

void require_same(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
}

template <typename F>
Var unary(const char* op, const Var& a, F&& f, std::function<void(Node&)> bp) {
    Tensor out = a.value();
    for (double& v : out.storage()) v = f(v);
    return make(op, std::move(out), {a}, std::move(bp));
}

} // namespace

Tensor Var::grad() const {
    if (node_->has_grad) return node_->grad;
    return Tensor(node_->value.shape());
}

Tensor& Var::mutable_value() {
    if (!node_->inputs.empty()) throw AutogradError("mutable_value() is only available on leaves");
    return node_->value;
}

void Var::zero_grad() {
    node_->grad = Tensor();
    node_->has_grad = false;
}

Var constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = "constant";
    return Var(std::move(node));
}

Var parameter(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = "parameter";
    node->requires_grad = true;
    return Var(std::move(node));
}

void backward(const Var& loss) {
    if (!loss) throw AutogradError("backward on an empty handle");
    if (loss.value().numel() != 1) {
        throw AutogradError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
    }
    if (!loss.requires_grad()) return;

    // Iterative DFS; state 1 = on stack, 2 = finished.
    std::vector<Node*> order;
    std::unordered_map<Node*, int> state;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
    state[loss.node()] = 1;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (!child->requires_grad) continue;
            auto it = state.find(child);
            if (it == state.end()) {
                state[child] = 1;
                stack.emplace_back(child, 0);
            } else if (it->second == 1) {
                throw AutogradError("cycle detected in computation graph at op '" + child->op + "'");
            }
            continue;
        }
        state[node] = 2;
        order.push_back(node);
        stack.pop_back();
    }

    for (Node* n : order) {
        if (n->has_grad) {
            throw AutogradError("backward called again without zero_grad (node '" + n->op + "' holds a gradient)");
        }
    }

    loss.node()->grad = Tensor(loss.shape(), 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        grad_of(*n);
        n->has_grad = true;
        if (n->backprop) n->backprop(*n);
    }
    // Interior gradients are transient; only leaves keep theirs.
    for (Node* n : order) {
        if (!n->inputs.empty()) {
            n->grad = Tensor();
            n->has_grad = false;
        }
    }
}

Var matmul(const Var& a, const Var& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    Tensor out = dense_matmul(a.value(), b.value());
    return make("matmul", std::move(out), {a, b}, [](Node& self) {
        Node& an = *self.inputs[0];
        Node& bn = *self.inputs[1];
        const Tensor& g = self.grad;
        if (an.requires_grad) matmul_accumulate(g, transpose(bn.value), grad_of(an));
        if (bn.requires_grad) matmul_accumulate(transpose(an.value), g, grad_of(bn));
    });
}

Var spmm(std::shared_ptr<const SparseMatrix> sp, const Var& d) {
    require_matrix(d, "spmm");
    Tensor out = sparse_dense_matmul(*sp, d.value());
    return make("spmm", std::move(out), {d}, [sp](Node& self) {
        Node& dn = *self.inputs[0];
        Tensor& gd = grad_of(dn);
        const Tensor& g = self.grad;
        const std::size_t n = g.cols();
        for (std::size_t i = 0; i < sp->rows(); ++i) {
            const auto cols = sp->row_cols(i);
            const auto vals = sp->row_values(i);
            const double* gr = &g(i, 0);
            for (std::size_t p = 0; p < cols.size(); ++p) {
                double* o = &gd(cols[p], 0);
                for (std::size_t j = 0; j < n; ++j) o[j] += vals[p] * gr[j];
            }
        }
    });
}

Var spmm(const SparseMatrix& s, const Var& d) {
    return spmm(std::shared_ptr<const SparseMatrix>(std::shared_ptr<const SparseMatrix>{}, &s), d);
}

Var add(const Var& a, const Var& b) {
    require_same(a, b, "add");
    Tensor out = a.value();
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] += b.value()[k];
    return make("add", std::move(out), {a, b}, [](Node& self) {
        for (auto& in : self.inputs) {
            if (!in->requires_grad) continue;
            Tensor& g = grad_of(*in);
            for (std::size_t k = 0; k < g.numel(); ++k) g[k] += self.grad[k];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same(a, b, "sub");
    Tensor out = a.value();
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] -= b.value()[k];
    return make("sub", std::move(out), {a, b}, [](Node& self) {
        if (self.inputs[0]->requires_grad) {
            Tensor& g = grad_of(*self.inputs[0]);
            for (std::size_t k = 0; k < g.numel(); ++k) g[k] += self.grad[k];
        }
        if (self.inputs[1]->requires_grad) {
            Tensor& g = grad_of(*self.inputs[1]);
            for (std::size_t k = 0; k < g.numel(); ++k) g[k] -= self.grad[k];
        }
    });
}

Var scale(const Var& a, double c) {
    Tensor out = a.value();
    for (double& v : out.storage()) v *= c;
    return make("scale", std::move(out), {a}, [c](Node& self) {
        Tensor& g = grad_of(*self.inputs[0]);
        for (std::size_t k = 0; k < g.numel(); ++k) g[k] += c * self.grad[k];
    });
}

Var mul_scalar(const Var& s, const Var& a) {
    if (s.value().numel() != 1) throw ShapeError("mul_scalar: factor must hold one value, got " + shape_string(s.shape()));
    const double c = s.value()[0];
    Tensor out = a.value();
    for (double& v : out.storage()) v *= c;
    return make("mul_scalar", std::move(out), {s, a}, [](Node& self) {
        Node& sn = *self.inputs[0];
        Node& an = *self.inputs[1];
        if (sn.requires_grad) {
            double acc = 0.0;
            for (std::size_t k = 0; k < self.grad.numel(); ++k) acc += self.grad[k] * an.value[k];
            grad_of(sn)[0] += acc;
        }
        if (an.requires_grad) {
            const double c = sn.value[0];
            Tensor& g = grad_of(an);
            for (std::size_t k = 0; k < g.numel(); ++k) g[k] += c * self.grad[k];
        }
    });
}

Var one_minus(const Var& s) {
    Tensor out = s.value();
    for (double& v : out.storage()) v = 1.0 - v;
    return make("one_minus", std::move(out), {s}, [](Node& self) {
        Tensor& g = grad_of(*self.inputs[0]);
        for (std::size_t k = 0; k < g.numel(); ++k) g[k] -= self.grad[k];
    });
}

Var add_bias(const Var& a, const Var& bias) {
    require_matrix(a, "add_bias");
    const std::size_t n = a.value().rows(), h = a.value().cols();
    if (bias.value().numel() != h) {
        throw ShapeError("add_bias: bias " + shape_string(bias.shape()) + " for matrix " + shape_string(a.shape()));
    }
    Tensor out = a.value();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < h; ++j) out(i, j) += bias.value()[j];
    return make("add_bias", std::move(out), {a, bias}, [n, h](Node& self) {
        if (self.inputs[0]->requires_grad) {
            Tensor& g = grad_of(*self.inputs[0]);
            for (std::size_t k = 0; k < g.numel(); ++k) g[k] += self.grad[k];
        }
        if (self.inputs[1]->requires_grad) {
            Tensor& g = grad_of(*self.inputs[1]);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < h; ++j) g[j] += self.grad(i, j);
        }
    });
}

Var relu(const Var& a) {
    return unary("relu", a, [](double v) { return v > 0.0 ? v : 0.0; }, [](Node& self) {
        Node& in = *self.inputs[0];
        Tensor& g = grad_of(in);
        for (std::size_t k = 0; k < g.numel(); ++k)
            if (in.value[k] > 0.0) g[k] += self.grad[k];
    });
}

Var elu(const Var& a) {
    return unary("elu", a, [](double v) { return v > 0.0 ? v : std::expm1(v); }, [](Node& self) {
        Node& in = *self.inputs[0];
        Tensor& g = grad_of(in);
        for (std::size_t k = 0; k < g.numel(); ++k)
            g[k] += self.grad[k] * (in.value[k] > 0.0 ? 1.0 : self.value[k] + 1.0);
    });
}

Var leaky_relu(const Var& a, double slope) {
    return unary("leaky_relu", a, [slope](double v) { return v > 0.0 ? v : slope * v; }, [slope](Node& self) {
        Node& in = *self.inputs[0];
        Tensor& g = grad_of(in);
        for (std::size_t k = 0; k < g.numel(); ++k) g[k] += self.grad[k] * (in.value[k] > 0.0 ? 1.0 : slope);
    });
}

Var sigmoid(const Var& a) {
    return unary("sigmoid", a, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](Node& self) {
        Tensor& g = grad_of(*self.inputs[0]);
        for (std::size_t k = 0; k < g.numel(); ++k) g[k] += self.grad[k] * self.value[k] * (1.0 - self.value[k]);
    });
}

Var dropout(const Var& a, double p, std::uint64_t key) {
    if (!(p >= 0.0 && p < 1.0)) throw DomainError("dropout rate must lie in [0,1), got " + std::to_string(p));
    if (p == 0.0) return a;
    const CounterRng rng(key);
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> factor(a.value().numel());
    for (std::size_t k = 0; k < factor.size(); ++k) factor[k] = rng.uniform_at(k) < p ? 0.0 : keep_scale;
    Tensor out = a.value();
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] *= factor[k];
    return make("dropout", std::move(out), {a}, [factor = std::move(factor)](Node& self) {
        Tensor& g = grad_of(*self.inputs[0]);
        for (std::size_t k = 0; k < g.numel(); ++k) g[k] += self.grad[k] * factor[k];
    });
}

std::shared_ptr<const SparseMatrix> dropout_sparse(const SparseMatrix& x, double p, std::uint64_t key) {
    if (!(p >= 0.0 && p < 1.0)) throw DomainError("dropout rate must lie in [0,1), got " + std::to_string(p));
    if (p == 0.0) return std::make_shared<const SparseMatrix>(x);
    const CounterRng rng(key);
    const double keep_scale = 1.0 / (1.0 - p);
    const std::size_t d = x.cols();
    std::vector<std::size_t> offsets{0}, cols;
    std::vector<double> vals;
    cols.reserve(x.nnz());
    vals.reserve(x.nnz());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto rc = x.row_cols(i);
        const auto rv = x.row_values(i);
        for (std::size_t q = 0; q < rc.size(); ++q) {
            if (rng.uniform_at(i * d + rc[q]) < p) continue;
            cols.push_back(rc[q]);
            vals.push_back(rv[q] * keep_scale);
        }
        offsets.push_back(cols.size());
    }
    return std::make_shared<const SparseMatrix>(x.rows(), d, std::move(offsets), std::move(cols), std::move(vals));
}

Var row_softmax(const Var& a) {
    require_matrix(a, "row_softmax");
    Tensor out = a.value();
    const std::size_t n = out.rows(), c = out.cols();
    for (std::size_t i = 0; i < n; ++i) {
        auto r = out.row(i);
        const double mx = *std::max_element(r.begin(), r.end());
        double z = 0.0;
        for (double& v : r) z += (v = std::exp(v - mx));
        for (double& v : r) v /= z;
    }
    return make("row_softmax", std::move(out), {a}, [n, c](Node& self) {
        Tensor& g = grad_of(*self.inputs[0]);
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += self.grad(i, j) * self.value(i, j);
            for (std::size_t j = 0; j < c; ++j) g(i, j) += self.value(i, j) * (self.grad(i, j) - dot);
        }
    });
}

Var log_row_softmax(const Var& a) {
    require_matrix(a, "log_row_softmax");
    Tensor out = a.value();
    const std::size_t n = out.rows(), c = out.cols();
    for (std::size_t i = 0; i < n; ++i) {
        auto r = out.row(i);
        const double mx = *std::max_element(r.begin(), r.end());
        double z = 0.0;
        for (double v : r) z += std::exp(v - mx);
        const double lse = mx + std::log(z);
        for (double& v : r) v -= lse;
    }
    return make("log_row_softmax", std::move(out), {a}, [n, c](Node& self) {
        Tensor& g = grad_of(*self.inputs[0]);
        for (std::size_t i = 0; i < n; ++i) {
            double gs = 0.0;
            for (std::size_t j = 0; j < c; ++j) gs += self.grad(i, j);
            for (std::size_t j = 0; j < c; ++j) g(i, j) += self.grad(i, j) - std::exp(self.value(i, j)) * gs;
        }
    });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return make("sum", Tensor::scalar(s), {a}, [](Node& self) {
        Tensor& g = grad_of(*self.inputs[0]);
        const double gv = self.grad[0];
        for (std::size_t k = 0; k < g.numel(); ++k) g[k] += gv;
    });
}

Var mean(const Var& a) {
    if (a.value().numel() == 0) throw ShapeError("mean of an empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.value().numel()));
}

Var sum_squares(const Var& a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v * v;
    return make("sum_squares", Tensor::scalar(s), {a}, [](Node& self) {
        Node& in = *self.inputs[0];
        Tensor& g = grad_of(in);
        const double gv = self.grad[0];
        for (std::size_t k = 0; k < g.numel(); ++k) g[k] += 2.0 * gv * in.value[k];
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols of zero tensors");
    const std::size_t n = parts[0].value().rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_cols");
        if (p.value().rows() != n) throw ShapeError("concat_cols: row counts differ");
        widths.push_back(p.value().cols());
        total += widths.back();
    }
    Tensor out({n, total});
    std::size_t off = 0;
    for (std::size_t q = 0; q < parts.size(); ++q) {
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(&parts[q].value()(i, 0), widths[q], &out(i, off));
        off += widths[q];
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return make("concat_cols", std::move(out), std::move(inputs), [n, widths](Node& self) {
        std::size_t off = 0;
        for (std::size_t q = 0; q < self.inputs.size(); ++q) {
            if (self.inputs[q]->requires_grad) {
                Tensor& g = grad_of(*self.inputs[q]);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < widths[q]; ++j) g(i, j) += self.grad(i, off + j);
            }
            off += widths[q];
        }
    });
}

Var elementwise_max(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("elementwise_max of zero tensors");
    for (const auto& p : parts) require_same(parts[0], p, "elementwise_max");
    Tensor out = parts[0].value();
    std::vector<std::uint32_t> winner(out.numel(), 0);
    for (std::size_t q = 1; q < parts.size(); ++q)
        for (std::size_t k = 0; k < out.numel(); ++k)
            if (parts[q].value()[k] > out[k]) {
                out[k] = parts[q].value()[k];
                winner[k] = static_cast<std::uint32_t>(q);
            }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return make("elementwise_max", std::move(out), std::move(inputs), [winner = std::move(winner)](Node& self) {
        for (std::size_t k = 0; k < winner.size(); ++k) {
            Node& in = *self.inputs[winner[k]];
            if (in.requires_grad) grad_of(in)[k] += self.grad[k];
        }
    });
}

Var weighted_sum(std::span<const Var> reps, const Var& weights) {
    if (reps.empty()) throw ShapeError("weighted_sum of zero tensors");
    if (weights.value().numel() != reps.size()) {
        throw ShapeError("weighted_sum: " + std::to_string(reps.size()) + " tensors but " +
                         std::to_string(weights.value().numel()) + " weights");
    }
    for (const auto& r : reps) require_same(reps[0], r, "weighted_sum");
    Tensor out(reps[0].shape());
    for (std::size_t q = 0; q < reps.size(); ++q) {
        const double w = weights.value()[q];
        for (std::size_t k = 0; k < out.numel(); ++k) out[k] += w * reps[q].value()[k];
    }
    std::vector<Var> inputs(reps.begin(), reps.end());
    inputs.push_back(weights);
    return make("weighted_sum", std::move(out), std::move(inputs), [](Node& self) {
        const std::size_t count = self.inputs.size() - 1;
        Node& wn = *self.inputs.back();
        for (std::size_t q = 0; q < count; ++q) {
            Node& rn = *self.inputs[q];
            if (wn.requires_grad) {
                double acc = 0.0;
                for (std::size_t k = 0; k < self.grad.numel(); ++k) acc += self.grad[k] * rn.value[k];
                grad_of(wn)[q] += acc;
            }
            if (rn.requires_grad) {
                const double w = wn.value[q];
                Tensor& g = grad_of(rn);
                for (std::size_t k = 0; k < g.numel(); ++k) g[k] += w * self.grad[k];
            }
        }
    });
}

Var masked_nll(const Var& logp, const Labels& labels, const Mask& mask) {
    require_matrix(logp, "masked_nll");
    const std::size_t n = logp.value().rows(), c = logp.value().cols();
    if (labels.size() != n || mask.size() != n) throw ShapeError("masked_nll: labels/mask length != rows");
    std::size_t count = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
            throw IndexError("masked_nll: label " + std::to_string(labels[i]) + " outside [0," + std::to_string(c) + ")");
        }
        total -= logp.value()(i, static_cast<std::size_t>(labels[i]));
        ++count;
    }
    if (count == 0) throw DomainError("masked_nll: mask selects no nodes");
    const double inv = 1.0 / static_cast<double>(count);
    return make("masked_nll", Tensor::scalar(total * inv), {logp}, [labels, mask, inv](Node& self) {
        Tensor& g = grad_of(*self.inputs[0]);
        const double gv = self.grad[0] * inv;
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i]) g(i, static_cast<std::size_t>(labels[i])) -= gv;
    });
}

namespace {

struct AttentionTerms {
    std::vector<double> dst;   // wh_i . att_dst
    std::vector<double> src;   // wh_j . att_src
    std::vector<double> alpha; // aligned with CSR entries
};

AttentionTerms compute_attention(const Tensor& wh, const Tensor& att_dst, const Tensor& att_src,
                                 const SparseMatrix& pattern, double slope) {
    const std::size_t n = wh.rows(), f = wh.cols();
    if (att_dst.numel() != f || att_src.numel() != f) throw ShapeError("gat: attention vectors must have width of wh");
    if (pattern.rows() != n || pattern.cols() != n) throw ShapeError("gat: pattern must be n x n");
    AttentionTerms t{std::vector<double>(n), std::vector<double>(n), std::vector<double>(pattern.nnz())};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t q = 0; q < f; ++q) {
            t.dst[i] += wh(i, q) * att_dst[q];
            t.src[i] += wh(i, q) * att_src[q];
        }
    for (std::size_t i = 0; i < n; ++i) {
        const auto cols = pattern.row_cols(i);
        if (cols.empty()) throw ShapeError("gat: node " + std::to_string(i) + " has an empty neighborhood");
        const std::size_t base = pattern.row_offsets()[i];
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < cols.size(); ++p) {
            const double z = t.dst[i] + t.src[cols[p]];
            const double e = z > 0.0 ? z : slope * z;
            t.alpha[base + p] = e;
            mx = std::max(mx, e);
        }
        double total = 0.0;
        for (std::size_t p = 0; p < cols.size(); ++p) total += (t.alpha[base + p] = std::exp(t.alpha[base + p] - mx));
        for (std::size_t p = 0; p < cols.size(); ++p) t.alpha[base + p] /= total;
    }
    return t;
}

} // namespace

std::vector<double> gat_attention(const Tensor& wh, const Tensor& att_dst, const Tensor& att_src,
                                  const SparseMatrix& pattern, double slope) {
    return compute_attention(wh, att_dst, att_src, pattern, slope).alpha;
}

Var gat_aggregate(const Var& wh, const Var& att_dst, const Var& att_src, const SparseMatrix& pattern, double slope) {
    require_matrix(wh, "gat_aggregate");
    AttentionTerms terms = compute_attention(wh.value(), att_dst.value(), att_src.value(), pattern, slope);
    const std::size_t n = wh.value().rows(), f = wh.value().cols();
    Tensor out({n, f});
    for (std::size_t i = 0; i < n; ++i) {
        const auto cols = pattern.row_cols(i);
        const std::size_t base = pattern.row_offsets()[i];
        for (std::size_t p = 0; p < cols.size(); ++p) {
            const double a = terms.alpha[base + p];
            for (std::size_t q = 0; q < f; ++q) out(i, q) += a * wh.value()(cols[p], q);
        }
    }
    const SparseMatrix* sp = &pattern;
    return make("gat_aggregate", std::move(out), {wh, att_dst, att_src},
                [sp, slope, terms = std::move(terms), n, f](Node& self) {
        const Tensor& whv = self.inputs[0]->value;
        const Tensor& adst = self.inputs[1]->value;
        const Tensor& asrc = self.inputs[2]->value;
        const Tensor& g = self.grad;
        Tensor gwh({n, f});
        std::vector<double> gdst(n, 0.0), gsrc(n, 0.0);
        std::vector<double> dalpha;
        for (std::size_t i = 0; i < n; ++i) {
            const auto cols = sp->row_cols(i);
            const std::size_t base = sp->row_offsets()[i];
            dalpha.assign(cols.size(), 0.0);
            double weighted = 0.0;
            for (std::size_t p = 0; p < cols.size(); ++p) {
                const std::size_t j = cols[p];
                const double a = terms.alpha[base + p];
                double d = 0.0;
                for (std::size_t q = 0; q < f; ++q) {
                    d += g(i, q) * whv(j, q);
                    gwh(j, q) += a * g(i, q);
                }
                dalpha[p] = d;
                weighted += a * d;
            }
            for (std::size_t p = 0; p < cols.size(); ++p) {
                const std::size_t j = cols[p];
                const double a = terms.alpha[base + p];
                const double de = a * (dalpha[p] - weighted);
                const double z = terms.dst[i] + terms.src[j];
                const double dz = de * (z > 0.0 ? 1.0 : slope);
                gdst[i] += dz;
                gsrc[j] += dz;
            }
        }
        Node& whn = *self.inputs[0];
        Node& dn = *self.inputs[1];
        Node& sn = *self.inputs[2];
        if (whn.requires_grad) {
            Tensor& gw = grad_of(whn);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t q = 0; q < f; ++q)
                    gw(i, q) += gwh(i, q) + gdst[i] * adst[q] + gsrc[i] * asrc[q];
        }
        if (dn.requires_grad) {
            Tensor& gd = grad_of(dn);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t q = 0; q < f; ++q) gd[q] += gdst[i] * whv(i, q);
        }
        if (sn.requires_grad) {
            Tensor& gs = grad_of(sn);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t q = 0; q < f; ++q) gs[q] += gsrc[i] * whv(i, q);
        }
    });
}

} // namespace fpgnn::ad
