#include "fpgnn/optim.hpp"

#include "fpgnn/errors.hpp"

#include <cmath>

namespace fpgnn {

void adam_step(Tensor& param, const Tensor& grad, AdamMoments& state, std::size_t step, const AdamOptions& opts) {
    if (!param.same_shape(grad)) {
        throw ShapeError("adam_step: param " + shape_string(param.shape()) + " vs grad " + shape_string(grad.shape()));
    }
    if (state.m.numel() == 0 && state.v.numel() == 0) {
        state.m = Tensor(param.shape());
        state.v = Tensor(param.shape());
    }
    if (!state.m.same_shape(param) || !state.v.same_shape(param)) {
        throw ShapeError("adam_step: moment shapes do not match param " + shape_string(param.shape()));
    }
    if (step == 0) throw DomainError("adam_step: step index is 1-based");
    const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
    const double shrink = 1.0 - opts.lr * opts.weight_decay;
    for (std::size_t k = 0; k < param.numel(); ++k) {
        const double g = grad[k];
        state.m[k] = opts.beta1 * state.m[k] + (1.0 - opts.beta1) * g;
        state.v[k] = opts.beta2 * state.v[k] + (1.0 - opts.beta2) * g * g;
        const double mhat = state.m[k] / bc1;
        const double vhat = state.v[k] / bc2;
        param[k] = param[k] * shrink - opts.lr * mhat / (std::sqrt(vhat) + opts.eps);
    }
}

Adam::Adam(std::vector<ad::Var> params, AdamOptions opts)
    : params_(std::move(params)), moments_(params_.size()), opts_(opts) {}

void Adam::step() {
    ++steps_;
    for (std::size_t p = 0; p < params_.size(); ++p) {
        auto& var = params_[p];
        adam_step(var.mutable_value(), var.grad(), moments_[p], steps_, opts_);
    }
    zero_grad();
}

void Adam::zero_grad() {
    for (auto& var : params_) var.zero_grad();
}

} // namespace fpgnn
