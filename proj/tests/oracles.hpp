#pragma once

// Brute-force reference implementations used as independent oracles by the
// unit and acceptance tests. Everything here is deliberately written as
// plain nested loops over std::vector<double>, with no dependency on the
// library's op implementations.

#include <scd/tensor.hpp>

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline scd::TensorPtr<double> random_tensor(std::vector<int> shape, std::mt19937_64& gen, bool requires_grad = false,
                                            double lo = -1.0, double hi = 1.0) {
    auto t = scd::Tensor<double>::create(std::move(shape), requires_grad);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t->data) v = dist(gen);
    return t;
}

// C = A[m x k] * B[k x n], triple loop.
inline std::vector<double> ref_matmul(const std::vector<double>& a, const std::vector<double>& b, int m, int k,
                                      int n) {
    std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[std::size_t(i) * k + p] * b[std::size_t(p) * n + j];
            c[std::size_t(i) * n + j] = acc;
        }
    return c;
}

// Direct 6-nested-loop cross-correlation with zero padding.
inline std::vector<double> ref_conv2d(const std::vector<double>& in, const std::vector<double>& k,
                                      const std::vector<double>& bias, int c_in, int h, int w, int c_out, int kh,
                                      int kw, int pad) {
    const int oh = h + 2 * pad - kh + 1;
    const int ow = w + 2 * pad - kw + 1;
    std::vector<double> out(static_cast<std::size_t>(c_out) * oh * ow, 0.0);
    for (int co = 0; co < c_out; ++co)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double acc = bias[co];
                for (int ci = 0; ci < c_in; ++ci)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const int iy = y + ky - pad;
                            const int ix = x + kx - pad;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                            acc += in[(std::size_t(ci) * h + iy) * w + ix] *
                                   k[((std::size_t(co) * c_in + ci) * kh + ky) * kw + kx];
                        }
                out[(std::size_t(co) * oh + y) * ow + x] = acc;
            }
    return out;
}

// 2x2 stride-2 max pooling by explicit window scan.
inline std::vector<double> ref_maxpool(const std::vector<double>& in, int c, int h, int w) {
    const int oh = h / 2, ow = w / 2;
    std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double best = -1e300;
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                        best = std::max(best, in[(std::size_t(ch) * h + 2 * y + a) * w + 2 * x + b]);
                out[(std::size_t(ch) * oh + y) * ow + x] = best;
            }
    return out;
}

// Scatter-add transposed convolution, kernel [c_in x c_out x 2 x 2], stride 2.
inline std::vector<double> ref_conv_transpose(const std::vector<double>& in, const std::vector<double>& k, int c_in,
                                              int h, int w, int c_out) {
    const int oh = 2 * h, ow = 2 * w;
    std::vector<double> out(static_cast<std::size_t>(c_out) * oh * ow, 0.0);
    for (int ci = 0; ci < c_in; ++ci)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double v = in[(std::size_t(ci) * h + y) * w + x];
                for (int co = 0; co < c_out; ++co)
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b)
                            out[(std::size_t(co) * oh + 2 * y + a) * ow + 2 * x + b] +=
                                v * k[((std::size_t(ci) * c_out + co) * 2 + a) * 2 + b];
            }
    return out;
}

// Adjoint of ref_conv_transpose: stride-2 2x2 valid convolution.
inline std::vector<double> ref_stride2_conv(const std::vector<double>& v, const std::vector<double>& k, int c_in,
                                            int h, int w, int c_out) {
    std::vector<double> out(static_cast<std::size_t>(c_in) * h * w, 0.0);
    for (int ci = 0; ci < c_in; ++ci)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int co = 0; co < c_out; ++co)
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b)
                            acc += v[(std::size_t(co) * 2 * h + 2 * y + a) * 2 * w + 2 * x + b] *
                                   k[((std::size_t(ci) * c_out + co) * 2 + a) * 2 + b];
                out[(std::size_t(ci) * h + y) * w + x] = acc;
            }
    return out;
}

// Per-channel glimpse g = A_y * I * A_x^T as three explicit loops.
inline std::vector<double> ref_glimpse(const std::vector<double>& image, int channels, int ih, int iw,
                                       const std::vector<double>& ay, int oh, const std::vector<double>& ax,
                                       int ow) {
    std::vector<double> out(static_cast<std::size_t>(channels) * oh * ow, 0.0);
    for (int c = 0; c < channels; ++c)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                double acc = 0.0;
                for (int y = 0; y < ih; ++y)
                    for (int x = 0; x < iw; ++x)
                        acc += ay[std::size_t(i) * ih + y] * image[(std::size_t(c) * ih + y) * iw + x] *
                               ax[std::size_t(j) * iw + x];
                out[(std::size_t(c) * oh + i) * ow + j] = acc;
            }
    return out;
}

// Plain unweighted binary cross-entropy with mean reduction.
inline double plain_bce(const std::vector<double>& p, const std::vector<double>& p_hat, double eps = 1e-7) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::min(1.0 - eps, std::max(eps, p_hat[i]));
        acc += -(p[i] * std::log(q) + (1.0 - p[i]) * std::log(1.0 - q));
    }
    return acc / static_cast<double>(p.size());
}

// Plain soft Dice loss with +1 smoothing.
inline double plain_dice(const std::vector<double>& p, const std::vector<double>& p_hat) {
    double inter = 0.0, sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += p[i] * p_hat[i];
        sp += p[i];
        sq += p_hat[i];
    }
    return 1.0 - (2.0 * inter + 1.0) / (sp + sq + 1.0);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

template <typename T>
inline double max_abs_diff(const std::vector<T>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - b[i]));
    return m;
}

}  // namespace oracle
