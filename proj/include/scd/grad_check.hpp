#pragma once

#include <scd/tensor.hpp>

namespace scd {

struct GradCheckReport {
    double max_rel_err = 0.0;
    bool pass = false;
};

/// Central-difference check of reverse-mode gradients. `f` must build a fresh
/// graph from the inputs' current data and return a scalar; inputs flagged
/// requires_grad are perturbed element by element. Relative error uses a
/// max(|analytic|, |numeric|, 1e-8) denominator. Meant for 64-bit tensors.
template <typename F>
GradCheckReport grad_check(F&& f, const std::vector<TensorPtr<double>>& inputs, double h = 1e-5,
                           double tol = 1e-4) {
    for (const auto& in : inputs) in->zero_grad();
    auto loss = f();
    if (!loss->is_scalar()) throw std::invalid_argument("grad_check: f must return a rank-0 scalar");
    backward(loss);

    std::vector<std::vector<double>> analytic(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i]->requires_grad) continue;
        inputs[i]->ensure_grad();
        analytic[i] = inputs[i]->grad;
    }

    GradCheckReport report;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i]->requires_grad) continue;
        auto& x = inputs[i]->data;
        for (std::size_t e = 0; e < x.size(); ++e) {
            const double saved = x[e];
            x[e] = saved + h;
            const double up = f()->item();
            x[e] = saved - h;
            const double down = f()->item();
            x[e] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double ad = analytic[i][e];
            const double denom = std::max({std::abs(ad), std::abs(numeric), 1e-8});
            report.max_rel_err = std::max(report.max_rel_err, std::abs(ad - numeric) / denom);
        }
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

}  // namespace scd
