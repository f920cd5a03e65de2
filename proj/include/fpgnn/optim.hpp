#pragma once

#include "fpgnn/autograd.hpp"

#include <cstddef>
#include <vector>

namespace fpgnn {

struct AdamOptions {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Decoupled decay: param *= (1 - lr * weight_decay) before the adaptive step.
    double weight_decay = 0.0;
};

struct AdamMoments {
    Tensor m;
    Tensor v;
};

/// One Adam update of `param` in place. `step` is the 1-based step index used
/// for bias correction. Empty moments are initialised to zero.
void adam_step(Tensor& param, const Tensor& grad, AdamMoments& state, std::size_t step, const AdamOptions& opts);

/// Adam over a fixed list of leaf parameters.
class Adam {
public:
    Adam(std::vector<ad::Var> params, AdamOptions opts);

    /// Applies one update from the current grads (missing grads count as zero),
    /// then clears them.
    void step();
    void zero_grad();

    std::size_t steps() const noexcept { return steps_; }
    const AdamOptions& options() const noexcept { return opts_; }

private:
    std::vector<ad::Var> params_;
    std::vector<AdamMoments> moments_;
    AdamOptions opts_;
    std::size_t steps_ = 0;
};

} // namespace fpgnn
