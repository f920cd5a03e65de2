#pragma once

#include "fpgnn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace fpgnn::testutil {

struct GradCheck {
    /// Largest normwise relative error over the checked leaves.
    double max_rel_error = 0.0;
    std::size_t entries = 0;
};

/// Compares backward() with central differences for every entry of `leaves`.
/// Per leaf the error is ||g_ad - g_fd|| / max(||g_ad||, ||g_fd||, floor).
inline GradCheck check_gradients(const std::function<ad::Var()>& loss_fn, std::vector<ad::Var> leaves,
                                 double h = 1e-5, double floor = 1e-6) {
    for (auto& v : leaves) v.zero_grad();
    ad::backward(loss_fn());
    GradCheck out;
    for (auto& v : leaves) {
        const Tensor analytic = v.grad();
        Tensor& x = v.mutable_value();
        double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
        for (std::size_t k = 0; k < x.numel(); ++k) {
            const double orig = x[k];
            x[k] = orig + h;
            const double up = loss_fn().value().item();
            x[k] = orig - h;
            const double down = loss_fn().value().item();
            x[k] = orig;
            const double numeric = (up - down) / (2.0 * h);
            diff2 += (analytic[k] - numeric) * (analytic[k] - numeric);
            a2 += analytic[k] * analytic[k];
            n2 += numeric * numeric;
            ++out.entries;
        }
        const double denom = std::max({std::sqrt(a2), std::sqrt(n2), floor});
        out.max_rel_error = std::max(out.max_rel_error, std::sqrt(diff2) / denom);
        v.zero_grad();
    }
    return out;
}

} // namespace fpgnn::testutil
