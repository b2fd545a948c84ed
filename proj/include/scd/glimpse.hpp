#pragma once

// Gaussian-attention glimpse preprocessing. A glimpse resamples an image
// through two banks of 1-D Gaussian masks: g = A_y * I * A_x^T, applied per
// channel. Mask row i places a Gaussian at mu_i = u*(N-1) + i*d over the N
// input positions, with shared width s; rows are normalized to sum to 1.

#include <scd/tensor.hpp>

#include <cmath>
#include <utility>

namespace scd {

struct GlimpseParams {
    double u = 0.0;  // center offset, fraction of the input extent
    double s = 1.0;  // Gaussian width (pixels)
    double d = 1.0;  // stride between consecutive mask centers (pixels)
    int rows = 0;    // output height
    int cols = 0;    // output width
};

/// [out_count x in_size] bank of normalized Gaussian rows. Row i is
/// exp(-(x - mu_i)^2 / (2 s^2)) over x = 0..in_size-1, scaled to unit sum.
/// A row whose raw sum underflows below 1e-12 falls back to uniform weights
/// so the glimpse stays an average rather than producing NaNs.
template <typename T>
TensorPtr<T> gaussian_mask(double u, double s, double d, int out_count, int in_size) {
    if (out_count <= 0 || in_size <= 0) throw std::invalid_argument("gaussian_mask: sizes must be positive");
    if (!(s > 0.0)) throw std::invalid_argument("gaussian_mask: width s must be positive");
    auto mask = Tensor<T>::create({out_count, in_size});
    const double inv2s2 = 1.0 / (2.0 * s * s);
    for (int i = 0; i < out_count; ++i) {
        const double mu = u * (in_size - 1) + i * d;
        double sum = 0.0;
        std::vector<double> row(in_size);
        for (int x = 0; x < in_size; ++x) {
            const double t = x - mu;
            row[x] = std::exp(-t * t * inv2s2);
            sum += row[x];
        }
        T* out = mask->data.data() + std::size_t(i) * in_size;
        if (sum < 1e-12) {
            const T uniform = T(1) / T(in_size);
            for (int x = 0; x < in_size; ++x) out[x] = uniform;
        } else {
            for (int x = 0; x < in_size; ++x) out[x] = T(row[x] / sum);
        }
    }
    return mask;
}

/// Per-channel g = A_y * I * A_x^T. The image is [C x H x W]; the result is
/// [C x rows x cols]. Plain preprocessing — never part of the autograd graph.
template <typename T>
TensorPtr<T> apply_glimpse(const TensorPtr<T>& image, const GlimpseParams& p) {
    if (image->rank() != 3) throw std::invalid_argument("apply_glimpse: image must be CxHxW");
    if (p.rows <= 0 || p.cols <= 0) throw std::invalid_argument("apply_glimpse: output size unset");
    const int c = image->shape[0], h = image->shape[1], w = image->shape[2];
    auto ay = gaussian_mask<T>(p.u, p.s, p.d, p.rows, h);
    auto ax = gaussian_mask<T>(p.u, p.s, p.d, p.cols, w);
    auto out = Tensor<T>::create({c, p.rows, p.cols});

    std::vector<T> tmp(std::size_t(p.rows) * w);  // A_y * I for one channel
    for (int ch = 0; ch < c; ++ch) {
        const T* img = image->data.data() + std::size_t(ch) * h * w;
        std::fill(tmp.begin(), tmp.end(), T(0));
        for (int i = 0; i < p.rows; ++i) {
            T* trow = tmp.data() + std::size_t(i) * w;
            for (int y = 0; y < h; ++y) {
                const T a = ay->data[std::size_t(i) * h + y];
                const T* irow = img + std::size_t(y) * w;
                for (int x = 0; x < w; ++x) trow[x] += a * irow[x];
            }
        }
        T* orow = out->data.data() + std::size_t(ch) * p.rows * p.cols;
        for (int i = 0; i < p.rows; ++i)
            for (int j = 0; j < p.cols; ++j) {
                const T* arow = ax->data.data() + std::size_t(j) * w;
                const T* trow = tmp.data() + std::size_t(i) * w;
                T acc = 0;
                for (int x = 0; x < w; ++x) acc += trow[x] * arow[x];
                orow[std::size_t(i) * p.cols + j] = acc;
            }
    }
    return out;
}

/// Glimpse both images of a co-registered pair with identical parameters.
template <typename T>
std::pair<TensorPtr<T>, TensorPtr<T>> preprocess_pair(const TensorPtr<T>& t1, const TensorPtr<T>& t2,
                                                      const GlimpseParams& p) {
    if (t1->shape != t2->shape)
        throw std::invalid_argument("preprocess_pair: images disagree " + shape_str(t1->shape) + " vs " +
                                    shape_str(t2->shape));
    return {apply_glimpse(t1, p), apply_glimpse(t2, p)};
}

}  // namespace scd
