#pragma once

// Siamese encoder-decoder change-detection network, four variants: skip
// fusion by channel concatenation (conc) or absolute difference (diff), each
// with or without attention gates on the fused skips. Both temporal branches
// run through ONE set of encoder weights.

#include <scd/conv.hpp>
#include <scd/tensor.hpp>

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace scd {

enum class Fusion { Concatenate, AbsDifference };

inline std::string fusion_name(Fusion f) { return f == Fusion::Concatenate ? "concatenate" : "abs-difference"; }

inline Fusion fusion_from_name(const std::string& s) {
    if (s == "concatenate" || s == "conc") return Fusion::Concatenate;
    if (s == "abs-difference" || s == "diff") return Fusion::AbsDifference;
    throw std::invalid_argument("unknown fusion '" + s + "' (want conc or diff)");
}

struct ModelConfig {
    Fusion fusion = Fusion::Concatenate;
    bool gated = false;
    std::vector<int> encoder_filters = {16, 32, 64, 128};
    std::vector<int> decoder_filters = {128, 64, 32, 16};
    int kernel = 3;
    int input_channels = 3;
    int input_h = 112;
    int input_w = 112;

    int levels() const { return int(encoder_filters.size()); }
    bool operator==(const ModelConfig&) const = default;
};

/// Table-style variant label: FC-Siam-{conc,diff}[-Att].
inline std::string variant_name(const ModelConfig& cfg) {
    std::string name = cfg.fusion == Fusion::Concatenate ? "FC-Siam-conc" : "FC-Siam-diff";
    if (cfg.gated) name += "-Att";
    return name;
}

inline void validate(const ModelConfig& cfg) {
    const int L = cfg.levels();
    if (L < 2 || cfg.decoder_filters.size() != std::size_t(L))
        throw std::invalid_argument("model config: encoder/decoder ladders must have equal length >= 2");
    for (int c : cfg.encoder_filters)
        if (c < 1) throw std::invalid_argument("model config: encoder filter counts must be positive");
    for (int c : cfg.decoder_filters)
        if (c < 1) throw std::invalid_argument("model config: decoder filter counts must be positive");
    if (cfg.kernel < 1 || cfg.kernel % 2 == 0) throw std::invalid_argument("model config: kernel must be odd");
    if (cfg.input_channels < 1) throw std::invalid_argument("model config: input_channels must be positive");
    const int div = 1 << (L - 1);
    if (cfg.input_h < div || cfg.input_w < div || cfg.input_h % div || cfg.input_w % div)
        throw std::invalid_argument("model config: input dims must be divisible by 2^(levels-1) = " +
                                    std::to_string(div));
}

/// Canonical (name, shape) list for every learnable tensor, in checkpoint
/// order. Shapes: conv weights [out x in x k x k], upsample kernels
/// [in x out x 2 x 2] (bias-free), biases [out].
inline std::vector<std::pair<std::string, std::vector<int>>> parameter_spec(const ModelConfig& cfg) {
    validate(cfg);
    const int L = cfg.levels();
    const int k = cfg.kernel;
    const int fuse_mult = cfg.fusion == Fusion::Concatenate ? 2 : 1;
    const auto& E = cfg.encoder_filters;
    const auto& D = cfg.decoder_filters;
    std::vector<std::pair<std::string, std::vector<int>>> spec;

    auto conv_block = [&](const std::string& prefix, int in, int out) {
        spec.push_back({prefix + ".conv1.w", {out, in, k, k}});
        spec.push_back({prefix + ".conv1.b", {out}});
        spec.push_back({prefix + ".conv2.w", {out, out, k, k}});
        spec.push_back({prefix + ".conv2.b", {out}});
    };

    int in_ch = cfg.input_channels;
    for (int l = 0; l < L; ++l) {
        conv_block("enc" + std::to_string(l), in_ch, E[l]);
        in_ch = E[l];
    }

    conv_block("dec0", fuse_mult * E[L - 1], D[0]);
    for (int i = 1; i < L; ++i) {
        const std::string si = std::to_string(i);
        const int skip_ch = fuse_mult * E[L - 1 - i];
        spec.push_back({"up" + si + ".w", {D[i - 1], D[i], 2, 2}});
        if (cfg.gated) {
            const int f_int = D[i];
            spec.push_back({"gate" + si + ".wx.w", {f_int, skip_ch, 1, 1}});
            spec.push_back({"gate" + si + ".wx.b", {f_int}});
            spec.push_back({"gate" + si + ".wg.w", {f_int, D[i], 1, 1}});
            spec.push_back({"gate" + si + ".wg.b", {f_int}});
            spec.push_back({"gate" + si + ".psi.w", {1, f_int, 1, 1}});
            spec.push_back({"gate" + si + ".psi.b", {1}});
        }
        conv_block("dec" + si, D[i] + skip_ch, D[i]);
    }
    spec.push_back({"out.w", {1, D[L - 1], 1, 1}});
    spec.push_back({"out.b", {1}});
    return spec;
}

inline std::size_t count_params(const ModelConfig& cfg) {
    std::size_t n = 0;
    for (const auto& [name, shape] : parameter_spec(cfg)) n += shape_numel(shape);
    return n;
}

template <typename T>
struct ModelState {
    ModelConfig config;
    std::vector<std::pair<std::string, TensorPtr<T>>> params;  // checkpoint order

    TensorPtr<T> p(const std::string& name) const {
        for (const auto& [n, t] : params)
            if (n == name) return t;
        throw std::logic_error("model: no parameter named '" + name + "'");
    }

    std::vector<TensorPtr<T>> parameters() const {
        std::vector<TensorPtr<T>> out;
        out.reserve(params.size());
        for (const auto& [n, t] : params) out.push_back(t);
        return out;
    }
};

/// Fan-in-scaled uniform init (bound sqrt(6/fan_in)) for weights, zeros for
/// biases; all draws come from one seeded generator in spec order, so equal
/// seeds give bit-identical states.
template <typename T>
ModelState<T> build(const ModelConfig& cfg, std::uint64_t seed) {
    ModelState<T> state;
    state.config = cfg;
    std::mt19937_64 gen(seed);
    for (const auto& [name, shape] : parameter_spec(cfg)) {
        auto t = Tensor<T>::create(shape, true);
        if (name.ends_with(".w")) {
            // Upsample kernels are [in x out x 2 x 2] with stride 2: each
            // output pixel sees one tap per input channel.
            const double fan_in = name.starts_with("up") ? double(shape[0])
                                                         : double(shape[1]) * shape[2] * shape[3];
            const double bound = std::sqrt(6.0 / fan_in);
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (auto& v : t->data) v = T(dist(gen));
        }
        state.params.emplace_back(name, std::move(t));
    }
    return state;
}

template <typename T>
struct EncodeResult {
    std::vector<TensorPtr<T>> skips;  // pre-pool activations, shallow to deep
    TensorPtr<T> bottleneck;
};

/// One branch of the shared encoder: per level two conv+ReLU blocks, then
/// 2x2 maxpool everywhere except the last level.
template <typename T>
EncodeResult<T> encode(const ModelState<T>& state, const TensorPtr<T>& image) {
    const auto& cfg = state.config;
    if (image->rank() != 3 || image->shape[0] != cfg.input_channels)
        throw std::invalid_argument("encode: image " + shape_str(image->shape) + " does not match config channels");
    const int pad = cfg.kernel / 2;
    EncodeResult<T> r;
    auto x = image;
    for (int l = 0; l < cfg.levels(); ++l) {
        const std::string el = "enc" + std::to_string(l);
        x = relu(conv2d(x, state.p(el + ".conv1.w"), state.p(el + ".conv1.b"), pad));
        x = relu(conv2d(x, state.p(el + ".conv2.w"), state.p(el + ".conv2.b"), pad));
        if (l < cfg.levels() - 1) {
            r.skips.push_back(x);
            x = maxpool2d(x);
        }
    }
    r.bottleneck = x;
    return r;
}

template <typename T>
TensorPtr<T> fuse(const TensorPtr<T>& a, const TensorPtr<T>& b, Fusion fusion) {
    if (a->shape != b->shape)
        throw std::invalid_argument("fuse: branch shapes disagree " + shape_str(a->shape) + " vs " +
                                    shape_str(b->shape));
    return fusion == Fusion::Concatenate ? concat(a, b) : abs(sub(a, b));
}

template <typename T>
std::vector<TensorPtr<T>> fuse_skips(const std::vector<TensorPtr<T>>& a, const std::vector<TensorPtr<T>>& b,
                                     Fusion fusion) {
    if (a.size() != b.size()) throw std::invalid_argument("fuse_skips: branch skip counts disagree");
    std::vector<TensorPtr<T>> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(fuse(a[i], b[i], fusion));
    return out;
}

template <typename T>
struct AttentionGateParams {
    TensorPtr<T> wx_w, wx_b;    // 1x1 conv on the skip features
    TensorPtr<T> wg_w, wg_b;    // 1x1 conv on the gating signal
    TensorPtr<T> psi_w, psi_b;  // 1x1 conv down to the single attention channel
};

template <typename T>
AttentionGateParams<T> gate_params(const ModelState<T>& state, int stage) {
    const std::string g = "gate" + std::to_string(stage);
    return {state.p(g + ".wx.w"), state.p(g + ".wx.b"), state.p(g + ".wg.w"),
            state.p(g + ".wg.b"), state.p(g + ".psi.w"), state.p(g + ".psi.b")};
}

/// alpha = sigmoid(psi(ReLU(Wx*x + Wg*g))), one channel, broadcast onto x.
template <typename T>
TensorPtr<T> attention_gate(const TensorPtr<T>& x, const TensorPtr<T>& g, const AttentionGateParams<T>& p) {
    if (x->shape[1] != g->shape[1] || x->shape[2] != g->shape[2])
        throw std::invalid_argument("attention_gate: skip " + shape_str(x->shape) + " and gating signal " +
                                    shape_str(g->shape) + " are not spatially aligned");
    auto pre = relu(add(conv2d(x, p.wx_w, p.wx_b, 0), conv2d(g, p.wg_w, p.wg_b, 0)));
    auto alpha = sigmoid(conv2d(pre, p.psi_w, p.psi_b, 0));
    return channel_broadcast_mul(x, alpha);
}

struct ForwardOptions {
    bool zero_fused_skips = false;  // replace every fused skip with zeros
    int force_gate = 0;             // +1: alpha := 1, -1: alpha := 0, 0: learned
};

/// Full change-probability map for a co-registered pair, [1 x H x W] with
/// every value strictly inside (0,1).
template <typename T>
TensorPtr<T> forward(const ModelState<T>& state, const TensorPtr<T>& t1, const TensorPtr<T>& t2,
                     const ForwardOptions& opts = {}) {
    const auto& cfg = state.config;
    const std::vector<int> want{cfg.input_channels, cfg.input_h, cfg.input_w};
    if (t1->shape != want || t2->shape != want)
        throw std::invalid_argument("forward: inputs " + shape_str(t1->shape) + "/" + shape_str(t2->shape) +
                                    " do not match configured geometry " + shape_str(want));

    auto ea = encode(state, t1);
    auto eb = encode(state, t2);
    auto skips = fuse_skips(ea.skips, eb.skips, cfg.fusion);
    auto bottleneck = fuse(ea.bottleneck, eb.bottleneck, cfg.fusion);
    if (opts.zero_fused_skips)
        for (auto& s : skips) s = Tensor<T>::zeros(s->shape);

    const int pad = cfg.kernel / 2;
    auto conv_block = [&](const TensorPtr<T>& in, const std::string& prefix) {
        auto h = relu(conv2d(in, state.p(prefix + ".conv1.w"), state.p(prefix + ".conv1.b"), pad));
        return relu(conv2d(h, state.p(prefix + ".conv2.w"), state.p(prefix + ".conv2.b"), pad));
    };

    auto d = conv_block(bottleneck, "dec0");
    for (int i = 1; i < cfg.levels(); ++i) {
        const std::string si = std::to_string(i);
        auto g = conv_transpose2d(d, state.p("up" + si + ".w"));
        auto s = skips[cfg.levels() - 1 - i];
        if (cfg.gated) {
            if (opts.force_gate != 0) {
                auto alpha = opts.force_gate > 0 ? Tensor<T>::ones({1, s->shape[1], s->shape[2]})
                                                 : Tensor<T>::zeros({1, s->shape[1], s->shape[2]});
                s = channel_broadcast_mul(s, alpha);
            } else {
                s = attention_gate(s, g, gate_params(state, i));
            }
        }
        d = conv_block(concat(g, s), "dec" + si);
    }
    return sigmoid(conv2d(d, state.p("out.w"), state.p("out.b"), 0));
}

}  // namespace scd
