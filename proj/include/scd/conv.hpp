#pragma once

#include <scd/tensor.hpp>

namespace scd {

/// 2-D cross-correlation over a [C_in x H x W] input with [C_out x C_in x k x k]
/// kernels and per-output-channel bias. Zero padding on all sides; with
/// padding = (k-1)/2 and odd k the spatial size is preserved. Inner loops run
/// along the contiguous width axis.
template <typename T>
TensorPtr<T> conv2d(const TensorPtr<T>& input, const TensorPtr<T>& kernels, const TensorPtr<T>& bias,
                    int padding) {
    if (input->rank() != 3) throw std::invalid_argument("conv2d: input must be [C_in x H x W]");
    if (kernels->rank() != 4) throw std::invalid_argument("conv2d: kernels must be [C_out x C_in x k x k]");
    if (padding < 0) throw std::invalid_argument("conv2d: negative padding");
    const int c_in = input->shape[0], h = input->shape[1], w = input->shape[2];
    const int c_out = kernels->shape[0], kh = kernels->shape[2], kw = kernels->shape[3];
    if (kernels->shape[1] != c_in)
        throw std::invalid_argument("conv2d: kernel input channels " + std::to_string(kernels->shape[1]) +
                                    " vs input channels " + std::to_string(c_in));
    if (kh != kw || kh % 2 == 0) throw std::invalid_argument("conv2d: square odd kernel required");
    if (bias->rank() != 1 || bias->shape[0] != c_out)
        throw std::invalid_argument("conv2d: bias must be [C_out]");
    const int oh = h + 2 * padding - kh + 1;
    const int ow = w + 2 * padding - kw + 1;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: kernel larger than padded input");

    auto out = detail::make_node<T>(
        {c_out, oh, ow}, {input, kernels, bias}, "conv2d",
        [input, kernels, bias, padding, c_in, h, w, c_out, kh, kw, oh, ow](Tensor<T>& self) {
            const T* g = self.grad.data();
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (int co = 0; co < c_out; ++co) {
                    T acc(0);
                    const T* gp = g + std::size_t(co) * oh * ow;
                    for (int i = 0; i < oh * ow; ++i) acc += gp[i];
                    bias->grad[co] += acc;
                }
            }
            if (kernels->requires_grad) {
                kernels->ensure_grad();
                for (int co = 0; co < c_out; ++co)
                    for (int ci = 0; ci < c_in; ++ci)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                T acc(0);
                                for (int y = 0; y < oh; ++y) {
                                    const int iy = y + ky - padding;
                                    if (iy < 0 || iy >= h) continue;
                                    const int x0 = std::max(0, padding - kx);
                                    const int x1 = std::min(ow, w + padding - kx);
                                    const T* gp = g + (std::size_t(co) * oh + y) * ow;
                                    const T* ip = input->data.data() + (std::size_t(ci) * h + iy) * w + (kx - padding);
                                    for (int x = x0; x < x1; ++x) acc += gp[x] * ip[x];
                                }
                                kernels->grad[((std::size_t(co) * c_in + ci) * kh + ky) * kw + kx] += acc;
                            }
            }
            if (input->requires_grad) {
                input->ensure_grad();
                for (int co = 0; co < c_out; ++co)
                    for (int ci = 0; ci < c_in; ++ci)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const T wv = kernels->data[((std::size_t(co) * c_in + ci) * kh + ky) * kw + kx];
                                for (int y = 0; y < oh; ++y) {
                                    const int iy = y + ky - padding;
                                    if (iy < 0 || iy >= h) continue;
                                    const int x0 = std::max(0, padding - kx);
                                    const int x1 = std::min(ow, w + padding - kx);
                                    const T* gp = g + (std::size_t(co) * oh + y) * ow;
                                    T* dp = input->grad.data() + (std::size_t(ci) * h + iy) * w + (kx - padding);
                                    for (int x = x0; x < x1; ++x) dp[x] += wv * gp[x];
                                }
                            }
            }
        });

    // Forward: per output channel start from the bias, then add one shifted
    // row-scaled input row per (ci, ky, kx) tap.
    for (int co = 0; co < c_out; ++co) {
        T* op = out->data.data() + std::size_t(co) * oh * ow;
        std::fill(op, op + std::size_t(oh) * ow, bias->data[co]);
    }
    for (int co = 0; co < c_out; ++co)
        for (int ci = 0; ci < c_in; ++ci)
            for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx) {
                    const T wv = kernels->data[((std::size_t(co) * c_in + ci) * kh + ky) * kw + kx];
                    for (int y = 0; y < oh; ++y) {
                        const int iy = y + ky - padding;
                        if (iy < 0 || iy >= h) continue;
                        const int x0 = std::max(0, padding - kx);
                        const int x1 = std::min(ow, w + padding - kx);
                        T* op = out->data.data() + (std::size_t(co) * oh + y) * ow;
                        const T* ip = input->data.data() + (std::size_t(ci) * h + iy) * w + (kx - padding);
                        for (int x = x0; x < x1; ++x) op[x] += wv * ip[x];
                    }
                }
    return out;
}

/// 2x2 stride-2 max pooling. The backward pass routes the gradient to the
/// first maximal element of each window in row-major scan order.
template <typename T>
TensorPtr<T> maxpool2d(const TensorPtr<T>& input) {
    if (input->rank() != 3) throw std::invalid_argument("maxpool2d: input must be [C x H x W]");
    const int c = input->shape[0], h = input->shape[1], w = input->shape[2];
    if (h % 2 != 0 || w % 2 != 0)
        throw std::invalid_argument("maxpool2d: spatial dims must be even, got " + shape_str(input->shape));
    const int oh = h / 2, ow = w / 2;
    auto argmax = std::make_shared<std::vector<std::size_t>>(std::size_t(c) * oh * ow);

    auto out = detail::make_node<T>({c, oh, ow}, {input}, "maxpool2d", [input, argmax](Tensor<T>& self) {
        input->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) input->grad[(*argmax)[i]] += self.grad[i];
    });
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                std::size_t best = (std::size_t(ch) * h + 2 * y) * w + 2 * x;
                T best_v = input->data[best];
                const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
                for (std::size_t k = 0; k < 3; ++k)
                    if (input->data[cand[k]] > best_v) {
                        best_v = input->data[cand[k]];
                        best = cand[k];
                    }
                const std::size_t oi = (std::size_t(ch) * oh + y) * ow + x;
                out->data[oi] = best_v;
                (*argmax)[oi] = best;
            }
    return out;
}

/// Stride-2 transposed convolution with a fixed 2x2 kernel per channel pair:
/// out[co, 2y+a, 2x+b] += in[ci, y, x] * k[ci, co, a, b]. Doubles both spatial
/// dims; the adjoint of a stride-2 2x2 valid convolution.
template <typename T>
TensorPtr<T> conv_transpose2d(const TensorPtr<T>& input, const TensorPtr<T>& kernels) {
    if (input->rank() != 3) throw std::invalid_argument("conv_transpose2d: input must be [C_in x H x W]");
    if (kernels->rank() != 4 || kernels->shape[2] != 2 || kernels->shape[3] != 2)
        throw std::invalid_argument("conv_transpose2d: kernels must be [C_in x C_out x 2 x 2]");
    const int c_in = input->shape[0], h = input->shape[1], w = input->shape[2];
    if (kernels->shape[0] != c_in)
        throw std::invalid_argument("conv_transpose2d: kernel input channels " + std::to_string(kernels->shape[0]) +
                                    " vs input channels " + std::to_string(c_in));
    const int c_out = kernels->shape[1];
    const int oh = 2 * h, ow = 2 * w;

    auto out = detail::make_node<T>(
        {c_out, oh, ow}, {input, kernels}, "conv_transpose2d",
        [input, kernels, c_in, c_out, h, w, oh, ow](Tensor<T>& self) {
            const T* g = self.grad.data();
            if (input->requires_grad) {
                input->ensure_grad();
                for (int ci = 0; ci < c_in; ++ci)
                    for (int co = 0; co < c_out; ++co)
                        for (int a = 0; a < 2; ++a)
                            for (int b = 0; b < 2; ++b) {
                                const T kv = kernels->data[((std::size_t(ci) * c_out + co) * 2 + a) * 2 + b];
                                for (int y = 0; y < h; ++y) {
                                    T* dp = input->grad.data() + (std::size_t(ci) * h + y) * w;
                                    const T* gp = g + (std::size_t(co) * oh + 2 * y + a) * ow + b;
                                    for (int x = 0; x < w; ++x) dp[x] += kv * gp[2 * x];
                                }
                            }
            }
            if (kernels->requires_grad) {
                kernels->ensure_grad();
                for (int ci = 0; ci < c_in; ++ci)
                    for (int co = 0; co < c_out; ++co)
                        for (int a = 0; a < 2; ++a)
                            for (int b = 0; b < 2; ++b) {
                                T acc(0);
                                for (int y = 0; y < h; ++y) {
                                    const T* ip = input->data.data() + (std::size_t(ci) * h + y) * w;
                                    const T* gp = g + (std::size_t(co) * oh + 2 * y + a) * ow + b;
                                    for (int x = 0; x < w; ++x) acc += ip[x] * gp[2 * x];
                                }
                                kernels->grad[((std::size_t(ci) * c_out + co) * 2 + a) * 2 + b] += acc;
                            }
            }
        });

    for (int ci = 0; ci < c_in; ++ci)
        for (int co = 0; co < c_out; ++co)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    const T kv = kernels->data[((std::size_t(ci) * c_out + co) * 2 + a) * 2 + b];
                    for (int y = 0; y < h; ++y) {
                        const T* ip = input->data.data() + (std::size_t(ci) * h + y) * w;
                        T* op = out->data.data() + (std::size_t(co) * oh + 2 * y + a) * ow + b;
                        for (int x = 0; x < w; ++x) op[2 * x] += kv * ip[x];
                    }
                }
    return out;
}

}  // namespace scd
