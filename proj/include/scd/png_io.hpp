#pragma once

// Thin libpng wrappers: 8-bit PNG <-> [C x H x W] tensors scaled to [0,1].
// Gray files load as one plane, color as three; palette/16-bit/alpha inputs
// are normalized down to 8-bit gray or RGB on the way in.

#include <scd/tensor.hpp>

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

namespace scd {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

template <typename T>
TensorPtr<T> read_png(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("read_png: cannot open " + path);

    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
        throw std::runtime_error("read_png: not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("read_png: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("read_png: libpng init failed");
    }

    std::vector<png_byte> pixels;
    std::vector<png_bytep> rows;
    int width = 0, height = 0, channels = 0;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: corrupt PNG: " + path);
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_packing(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(png);
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);

    width = int(png_get_image_width(png, info));
    height = int(png_get_image_height(png, info));
    channels = int(png_get_channels(png, info));
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: unsupported channel count in " + path);
    }

    pixels.resize(std::size_t(height) * width * channels);
    rows.resize(height);
    for (int y = 0; y < height; ++y) rows[y] = pixels.data() + std::size_t(y) * width * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    auto out = Tensor<T>::create({channels, height, width});
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                out->data[(std::size_t(c) * height + y) * width + x] =
                    T(pixels[(std::size_t(y) * width + x) * channels + c]) / T(255);
    return out;
}

/// Writes [1 x H x W] as 8-bit gray or [3 x H x W] as 8-bit RGB. Values are
/// clamped to [0,1] and rounded.
template <typename T>
void write_png(const std::string& path, const Tensor<T>& image) {
    if (image.rank() != 3 || (image.shape[0] != 1 && image.shape[0] != 3))
        throw std::invalid_argument("write_png: image must be [1|3 x H x W], got " + shape_str(image.shape));
    const int channels = image.shape[0], height = image.shape[1], width = image.shape[2];

    std::vector<png_byte> pixels(std::size_t(height) * width * channels);
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double v = double(image.data[(std::size_t(c) * height + y) * width + x]);
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                pixels[(std::size_t(y) * width + x) * channels + c] = png_byte(v * 255.0 + 0.5);
            }

    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("write_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("write_png: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("write_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) rows[y] = pixels.data() + std::size_t(y) * width * channels;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// 0/1 mask to 0/255 gray PNG.
inline void write_png_mask(const std::string& path, const std::vector<std::uint8_t>& mask, int height, int width) {
    if (mask.size() != std::size_t(height) * width) throw std::invalid_argument("write_png_mask: size mismatch");
    auto img = Tensor<float>::create({1, height, width});
    for (std::size_t i = 0; i < mask.size(); ++i) img->data[i] = mask[i] ? 1.0f : 0.0f;
    write_png(path, *img);
}

}  // namespace scd
