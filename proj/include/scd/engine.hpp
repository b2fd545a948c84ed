#pragma once

// Training loop, optimizers, and inference orchestration. One logical thread
// owns the model; every run is sequential and fully seeded, so identical
// configs produce byte-identical checkpoints.

#include <scd/checkpoint.hpp>
#include <scd/data.hpp>
#include <scd/loss.hpp>
#include <scd/metrics.hpp>
#include <scd/model.hpp>

#include <cmath>
#include <numeric>
#include <random>

namespace scd {

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
    int steps = 500;
    int batch_size = 4;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    int eval_every = 0;       // 0 = no periodic eval rows
    double loss_beta = 0.0;   // <= 0: balance_beta over the training split
    double loss_epsilon = 1e-7;
    bool deterministic = true;  // runs are always sequential+seeded; kept as config surface
};

struct TrainLogEntry {
    int step = 0;
    double loss = 0.0;
    bool has_eval = false;
    Scores eval;
};

/// Raised when the loss goes non-finite; the step number is in the message.
struct TrainDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    std::int64_t t = 0;
};

/// Standard Adam with bias correction. Gradients are read from each
/// parameter's grad buffer; missing buffers count as zero.
template <typename T>
void adam_step(const std::vector<TensorPtr<T>>& params, AdamState<T>& st, double lr, double beta1, double beta2,
               double eps) {
    if (st.m.empty()) {
        st.m.resize(params.size());
        st.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            st.m[i].assign(params[i]->numel(), T(0));
            st.v[i].assign(params[i]->numel(), T(0));
        }
    }
    if (st.m.size() != params.size()) throw std::invalid_argument("adam_step: state/parameter count mismatch");
    ++st.t;
    const double bc1 = 1.0 - std::pow(beta1, double(st.t));
    const double bc2 = 1.0 - std::pow(beta2, double(st.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        p.ensure_grad();
        if (st.m[i].size() != p.numel()) throw std::invalid_argument("adam_step: state shape mismatch");
        for (std::size_t e = 0; e < p.numel(); ++e) {
            const double g = double(p.grad[e]);
            const double m = beta1 * double(st.m[i][e]) + (1.0 - beta1) * g;
            const double v = beta2 * double(st.v[i][e]) + (1.0 - beta2) * g * g;
            st.m[i][e] = T(m);
            st.v[i][e] = T(v);
            p.data[e] -= T(lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
        }
    }
}

template <typename T>
void sgd_step(const std::vector<TensorPtr<T>>& params, double lr) {
    for (const auto& p : params) {
        p->ensure_grad();
        for (std::size_t e = 0; e < p->numel(); ++e) p->data[e] -= T(lr * double(p->grad[e]));
    }
}

template <typename T>
struct InferenceResult {
    TensorPtr<T> prob;               // [1 x H x W] change probabilities
    std::vector<std::uint8_t> mask;  // thresholded, 1 = changed
};

/// Probability + binary change map. Inputs larger than the configured
/// geometry are tiled at stride = patch size (final row/column flush with the
/// border) and stitched back; smaller inputs are an error.
template <typename T>
InferenceResult<T> infer(const ModelState<T>& model, const TensorPtr<T>& t1, const TensorPtr<T>& t2,
                         double threshold = 0.5) {
    if (t1->shape != t2->shape)
        throw std::invalid_argument("infer: image shapes disagree " + shape_str(t1->shape) + " vs " +
                                    shape_str(t2->shape));
    const auto& cfg = model.config;
    const int h = t1->shape[1], w = t1->shape[2];
    InferenceResult<T> r;
    if (h == cfg.input_h && w == cfg.input_w) {
        r.prob = forward(model, t1, t2);
    } else {
        if (h < cfg.input_h || w < cfg.input_w)
            throw std::invalid_argument("infer: input " + std::to_string(h) + "x" + std::to_string(w) +
                                        " is smaller than the configured patch " + std::to_string(cfg.input_h) +
                                        "x" + std::to_string(cfg.input_w));
        r.prob = Tensor<T>::create({1, h, w});
        for (int y0 : detail::patch_starts(h, cfg.input_h, cfg.input_h))
            for (int x0 : detail::patch_starts(w, cfg.input_w, cfg.input_w)) {
                auto p1 = detail::crop(*t1, y0, x0, cfg.input_h, cfg.input_w);
                auto p2 = detail::crop(*t2, y0, x0, cfg.input_h, cfg.input_w);
                auto tile = forward(model, p1, p2);
                for (int y = 0; y < cfg.input_h; ++y)
                    std::copy(tile->data.begin() + std::size_t(y) * cfg.input_w,
                              tile->data.begin() + std::size_t(y + 1) * cfg.input_w,
                              r.prob->data.begin() + std::size_t(y0 + y) * w + x0);
            }
    }
    r.mask = binarize(r.prob, threshold);
    return r;
}

/// Global confusion over a sample list; optionally also per-tile counts.
template <typename T>
ConfusionCounts evaluate(const ModelState<T>& model, const std::vector<SamplePair<T>>& samples,
                         double threshold = 0.5,
                         std::vector<std::pair<std::string, ConfusionCounts>>* per_tile = nullptr) {
    if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
    ConfusionCounts global;
    for (const auto& s : samples) {
        auto res = infer(model, s.t1, s.t2, threshold);
        auto c = confusion(res.prob, s.label, threshold);
        global += c;
        if (per_tile) per_tile->emplace_back(s.id, c);
    }
    return global;
}

/// cfg.steps optimizer steps on total_loss over shuffled mini-batches. The
/// batch loss is the mean of per-sample losses. Shuffling derives each
/// epoch's permutation from (seed, epoch); dataset tensors are never written.
template <typename T>
std::vector<TrainLogEntry> train(ModelState<T>& model, const DatasetSplit<T>& data, const TrainConfig& cfg) {
    if (data.train.empty()) throw std::invalid_argument("train: empty training split");
    if (cfg.steps < 1 || cfg.batch_size < 1 || !(cfg.learning_rate >= 0.0))
        throw std::invalid_argument("train: steps/batch_size/learning_rate out of range");
    const std::vector<int> want{model.config.input_channels, model.config.input_h, model.config.input_w};
    for (const auto& s : data.train)
        if (s.t1->shape != want)
            throw std::invalid_argument("train: sample '" + s.id + "' " + shape_str(s.t1->shape) +
                                        " does not match configured geometry " + shape_str(want));

    double beta = cfg.loss_beta;
    if (beta <= 0.0) {
        std::vector<TensorPtr<T>> labels;
        for (const auto& s : data.train) labels.push_back(s.label);
        beta = balance_beta(labels);
    }

    auto params = model.parameters();
    AdamState<T> adam;
    std::vector<TrainLogEntry> log;
    log.reserve(cfg.steps);

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();  // force a shuffle before the first draw
    std::uint64_t epoch = 0;

    for (int step = 1; step <= cfg.steps; ++step) {
        TensorPtr<T> batch_loss;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                std::seed_seq seq{std::uint32_t(cfg.seed), std::uint32_t(cfg.seed >> 32), std::uint32_t(epoch),
                                  std::uint32_t(epoch >> 32)};
                std::mt19937_64 gen(seq);
                std::shuffle(order.begin(), order.end(), gen);
                cursor = 0;
                ++epoch;
            }
            const auto& s = data.train[order[cursor++]];
            try {
                auto prob = forward(model, s.t1, s.t2);
                auto l = total_loss(s.label, prob, T(beta), T(cfg.loss_epsilon));
                batch_loss = b == 0 ? l : add(batch_loss, l);
            } catch (const std::domain_error& e) {
                // log() met a non-positive/NaN activation: the run has diverged.
                throw TrainDivergence("train: non-finite activations at step " + std::to_string(step) + " (" +
                                      e.what() + "); lower the learning rate or check the data");
            }
        }
        if (cfg.batch_size > 1) batch_loss = scalar_mul(batch_loss, T(1) / T(cfg.batch_size));

        const double loss_value = double(batch_loss->item());
        if (!std::isfinite(loss_value))
            throw TrainDivergence("train: non-finite loss at step " + std::to_string(step) +
                                  "; lower the learning rate or check the data");

        backward(batch_loss);
        if (cfg.optimizer == Optimizer::Adam)
            adam_step(params, adam, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
        else
            sgd_step(params, cfg.learning_rate);
        zero_grad(params);

        TrainLogEntry entry;
        entry.step = step;
        entry.loss = loss_value;
        if (cfg.eval_every > 0 && step % cfg.eval_every == 0) {
            const auto& split = data.test.empty() ? data.train : data.test;
            entry.eval = scores(evaluate(model, split));
            entry.has_eval = true;
        }
        log.push_back(entry);
    }
    return log;
}

}  // namespace scd
