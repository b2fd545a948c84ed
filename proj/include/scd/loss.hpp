#pragma once

// Training objective: class-weighted cross-entropy plus weighted soft Dice.
// Both take the ground truth p (constant) and the prediction p_hat (graph
// node) and return rank-0 graph nodes, so the total is differentiable w.r.t.
// the prediction.

#include <scd/tensor.hpp>

#include <string>

namespace scd {

/// Mean-reduced weighted binary cross-entropy,
///   -(beta * p * log q + (1 - p) * log(1 - q)),  q = p_hat clamped.
/// Predictions are clamped to [eps, 1-eps] so saturated sigmoids cannot hit
/// log(0).
template <typename T>
TensorPtr<T> weighted_cross_entropy(const TensorPtr<T>& p, const TensorPtr<T>& p_hat, T beta, T eps = T(1e-7)) {
    if (p->shape != p_hat->shape)
        throw std::invalid_argument("weighted_cross_entropy: shape mismatch " + shape_str(p->shape) + " vs " +
                                    shape_str(p_hat->shape));
    auto q = clamp(p_hat, eps, T(1) - eps);
    auto pos = scalar_mul(mul(p, log(q)), beta);
    auto neg_part = mul(scalar_add(neg(p), T(1)), log(scalar_add(neg(q), T(1))));
    return neg(mean(add(pos, neg_part)));
}

/// Weighted soft Dice loss with +1 smoothing,
///   1 - (2 beta * sum(p*p_hat) + 1) / (beta * sum(p) + beta * sum(p_hat) + 1).
/// Sums are global over all pixels. The prediction enters unclamped: the
/// expression has no logs, and clamping would perturb the exact closed forms.
template <typename T>
TensorPtr<T> weighted_dice(const TensorPtr<T>& p, const TensorPtr<T>& p_hat, T beta) {
    if (p->shape != p_hat->shape)
        throw std::invalid_argument("weighted_dice: shape mismatch " + shape_str(p->shape) + " vs " +
                                    shape_str(p_hat->shape));
    auto inter = sum(mul(p, p_hat));
    auto denom = scalar_add(scalar_mul(add(sum(p), sum(p_hat)), beta), T(1));
    auto num = scalar_add(scalar_mul(inter, T(2) * beta), T(1));
    return scalar_add(neg(divide(num, denom)), T(1));
}

/// E = E_wce + E_wdice.
template <typename T>
TensorPtr<T> total_loss(const TensorPtr<T>& p, const TensorPtr<T>& p_hat, T beta, T eps = T(1e-7)) {
    return add(weighted_cross_entropy(p, p_hat, beta, eps), weighted_dice(p, p_hat, beta));
}

/// Class-balance weight over a training split: unchanged / changed pixel
/// count. Degenerate splits are an error — pick beta by hand for those.
template <typename T>
double balance_beta(const std::vector<TensorPtr<T>>& labels) {
    std::uint64_t pos = 0, total = 0;
    for (const auto& l : labels) {
        for (const T v : l->data) pos += (v > T(0.5)) ? 1 : 0;
        total += l->numel();
    }
    const std::uint64_t neg_count = total - pos;
    if (pos == 0)
        throw std::runtime_error("balance_beta: training labels contain no changed pixels; set beta manually");
    if (neg_count == 0)
        throw std::runtime_error("balance_beta: training labels contain no unchanged pixels; set beta manually");
    return double(neg_count) / double(pos);
}

}  // namespace scd
