#pragma once

// Dataset handling: directory ingestion (PNG pairs with binary labels, SCDT1
// drop-ins for multi-band data), patch extraction, resizing, and a synthetic
// change-pair generator whose labels are exact by construction.

#include <scd/png_io.hpp>
#include <scd/tensor.hpp>
#include <scd/tensor_io.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace scd {

/// A co-registered image pair with its change mask. The label is a
/// single-channel [1 x H x W] tensor holding strictly 0/1 values (1=changed).
template <typename T>
struct SamplePair {
    TensorPtr<T> t1;
    TensorPtr<T> t2;
    TensorPtr<T> label;
    std::string id;
};

template <typename T>
struct DatasetSplit {
    std::vector<SamplePair<T>> train;
    std::vector<SamplePair<T>> test;
    std::uint64_t seed = 0;
};

namespace detail {

template <typename T>
TensorPtr<T> load_plane(const std::filesystem::path& dir, const char* stem, const std::string& id) {
    const auto png = dir / (std::string(stem) + ".png");
    const auto scdt = dir / (std::string(stem) + ".scdt");
    if (std::filesystem::exists(png)) return read_png<T>(png.string());
    if (std::filesystem::exists(scdt)) return read_tensor<T>(scdt.string());
    throw std::runtime_error("load_dataset: sample '" + id + "' is missing " + stem + ".png (or .scdt)");
}

template <typename T>
void binarize_label(Tensor<T>& label) {
    for (auto& v : label.data) v = (v != T(0)) ? T(1) : T(0);
}

}  // namespace detail

/// Loads root/<id>/{t1,t2,label}.{png|scdt} for one id.
template <typename T>
SamplePair<T> load_sample(const std::filesystem::path& root, const std::string& id) {
    const auto dir = root / id;
    if (!std::filesystem::is_directory(dir))
        throw std::runtime_error("load_dataset: no sample directory for id '" + id + "'");
    SamplePair<T> s;
    s.id = id;
    s.t1 = detail::load_plane<T>(dir, "t1", id);
    s.t2 = detail::load_plane<T>(dir, "t2", id);
    s.label = detail::load_plane<T>(dir, "label", id);
    if (s.label->shape[0] != 1)
        throw std::runtime_error("load_dataset: sample '" + id + "' label has " +
                                 std::to_string(s.label->shape[0]) + " channels, expected 1");
    detail::binarize_label(*s.label);
    if (s.t1->shape != s.t2->shape || s.t1->shape[1] != s.label->shape[1] || s.t1->shape[2] != s.label->shape[2])
        throw std::runtime_error("load_dataset: sample '" + id + "' shapes disagree: t1 " + shape_str(s.t1->shape) +
                                 ", t2 " + shape_str(s.t2->shape) + ", label " + shape_str(s.label->shape));
    return s;
}

/// Every well-formed sample directory under root, sorted by id.
template <typename T>
std::vector<SamplePair<T>> load_dataset(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root))
        throw std::runtime_error("load_dataset: not a directory: " + root.string());
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    std::vector<SamplePair<T>> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(load_sample<T>(root, id));
    if (out.empty()) throw std::runtime_error("load_dataset: no samples under " + root.string());
    return out;
}

inline std::vector<std::string> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_manifest: cannot open " + path.string());
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

/// Split from train.txt/test.txt manifests when present; otherwise every
/// sample lands in train and test stays empty.
template <typename T>
DatasetSplit<T> load_split(const std::filesystem::path& root) {
    DatasetSplit<T> split;
    const auto train_manifest = root / "train.txt";
    const auto test_manifest = root / "test.txt";
    if (std::filesystem::exists(train_manifest)) {
        for (const auto& id : read_manifest(train_manifest)) split.train.push_back(load_sample<T>(root, id));
        if (std::filesystem::exists(test_manifest))
            for (const auto& id : read_manifest(test_manifest)) split.test.push_back(load_sample<T>(root, id));
    } else {
        split.train = load_dataset<T>(root);
    }
    for (const auto& tr : split.train)
        for (const auto& te : split.test)
            if (tr.id == te.id) throw std::runtime_error("load_split: id '" + tr.id + "' is in both manifests");
    return split;
}

namespace detail {

inline std::vector<int> patch_starts(int extent, int size, int stride) {
    std::vector<int> starts;
    for (int p = 0; p + size <= extent; p += stride) starts.push_back(p);
    if (starts.empty() || starts.back() + size < extent) starts.push_back(extent - size);  // flush to border
    return starts;
}

template <typename T>
TensorPtr<T> crop(const Tensor<T>& src, int y0, int x0, int h, int w) {
    auto out = Tensor<T>::create({src.shape[0], h, w});
    for (int c = 0; c < src.shape[0]; ++c)
        for (int y = 0; y < h; ++y) {
            const T* s = src.data.data() + (std::size_t(c) * src.shape[1] + y0 + y) * src.shape[2] + x0;
            std::copy(s, s + w, out->data.data() + (std::size_t(c) * h + y) * w);
        }
    return out;
}

}  // namespace detail

/// Aligned crops over a stride grid; the trailing row/column is covered by a
/// final patch flush with the border (no padding pixels).
template <typename T>
std::vector<SamplePair<T>> extract_patches(const SamplePair<T>& pair, int ph, int pw, int sy, int sx) {
    const int h = pair.t1->shape[1], w = pair.t1->shape[2];
    if (ph <= 0 || pw <= 0 || sy <= 0 || sx <= 0) throw std::invalid_argument("extract_patches: non-positive size/stride");
    if (ph > h || pw > w)
        throw std::invalid_argument("extract_patches: patch " + std::to_string(ph) + "x" + std::to_string(pw) +
                                    " exceeds image " + std::to_string(h) + "x" + std::to_string(w));
    std::vector<SamplePair<T>> out;
    for (int y0 : detail::patch_starts(h, ph, sy))
        for (int x0 : detail::patch_starts(w, pw, sx)) {
            SamplePair<T> p;
            p.id = pair.id + "_y" + std::to_string(y0) + "x" + std::to_string(x0);
            p.t1 = detail::crop(*pair.t1, y0, x0, ph, pw);
            p.t2 = detail::crop(*pair.t2, y0, x0, ph, pw);
            p.label = detail::crop(*pair.label, y0, x0, ph, pw);
            out.push_back(std::move(p));
        }
    return out;
}

enum class ResizeMode { Bilinear, Nearest };

/// Corner-aligned resampling: source coordinate for output index i is
/// i*(in-1)/(out-1). Bilinear for image channels; nearest for labels so they
/// stay binary.
template <typename T>
TensorPtr<T> resize(const Tensor<T>& src, int th, int tw, ResizeMode mode) {
    if (th <= 0 || tw <= 0) throw std::invalid_argument("resize: target dims must be positive");
    const int c = src.shape[0], h = src.shape[1], w = src.shape[2];
    auto out = Tensor<T>::create({c, th, tw});
    const double sy = th > 1 ? double(h - 1) / double(th - 1) : 0.0;
    const double sx = tw > 1 ? double(w - 1) / double(tw - 1) : 0.0;
    for (int ch = 0; ch < c; ++ch) {
        const T* plane = src.data.data() + std::size_t(ch) * h * w;
        T* oplane = out->data.data() + std::size_t(ch) * th * tw;
        for (int i = 0; i < th; ++i) {
            const double fy = i * sy;
            for (int j = 0; j < tw; ++j) {
                const double fx = j * sx;
                if (mode == ResizeMode::Nearest) {
                    const int yy = int(std::lround(fy)), xx = int(std::lround(fx));
                    oplane[std::size_t(i) * tw + j] = plane[std::size_t(yy) * w + xx];
                } else {
                    const int y0 = int(fy), x0 = int(fx);
                    const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
                    const double dy = fy - y0, dx = fx - x0;
                    const double v = (1 - dy) * ((1 - dx) * plane[std::size_t(y0) * w + x0] +
                                                 dx * plane[std::size_t(y0) * w + x1]) +
                                     dy * ((1 - dx) * plane[std::size_t(y1) * w + x0] +
                                           dx * plane[std::size_t(y1) * w + x1]);
                    oplane[std::size_t(i) * tw + j] = T(v);
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic change pairs
// ---------------------------------------------------------------------------

/// Geometry of one generated shape, exposed so tests can re-rasterize labels
/// independently of the generator's own label output.
struct SynthShape {
    bool ellipse = false;
    int cy = 0, cx = 0, ry = 1, rx = 1;  // center and half-extents, pixels
    bool removed = false;                // true: present in T1 only; false: added in T2 only
};

struct SynthRecord {
    std::vector<SynthShape> change_shapes;
};

namespace detail {

inline bool shape_covers(const SynthShape& s, int y, int x) {
    if (s.ellipse) {
        const double dy = double(y - s.cy) / double(s.ry);
        const double dx = double(x - s.cx) / double(s.rx);
        return dy * dy + dx * dx <= 1.0;
    }
    return std::abs(y - s.cy) <= s.ry && std::abs(x - s.cx) <= s.rx;
}

// Paints the shape into a [3 x h x w] image with one color per channel.
template <typename T>
void paint_shape(Tensor<T>& img, const SynthShape& s, const double color[3]) {
    const int h = img.shape[1], w = img.shape[2];
    const int y0 = std::max(0, s.cy - s.ry), y1 = std::min(h - 1, s.cy + s.ry);
    const int x0 = std::max(0, s.cx - s.rx), x1 = std::min(w - 1, s.cx + s.rx);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (shape_covers(s, y, x))
                for (int c = 0; c < 3; ++c) img.data[(std::size_t(c) * h + y) * w + x] = T(color[c]);
}

inline std::uint64_t rasterize_into(const SynthShape& s, std::vector<std::uint8_t>& mask, int h, int w,
                                    bool* overlaps = nullptr) {
    std::uint64_t painted = 0;
    const int y0 = std::max(0, s.cy - s.ry), y1 = std::min(h - 1, s.cy + s.ry);
    const int x0 = std::max(0, s.cx - s.rx), x1 = std::min(w - 1, s.cx + s.rx);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (shape_covers(s, y, x)) {
                if (mask[std::size_t(y) * w + x]) {
                    if (overlaps) *overlaps = true;
                } else {
                    mask[std::size_t(y) * w + x] = 1;
                    ++painted;
                }
            }
    return painted;
}

inline std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(index),
                      std::uint32_t(index >> 32), 0x5c0du};
    return std::mt19937_64(seq);
}

}  // namespace detail

/// Deterministic synthetic change pairs. T1 is a smooth textured background
/// with a few persistent mid-tone shapes; T2 repeats the scene, adds/removes
/// high-contrast shapes (the change set), and layers 2%-amplitude uniform
/// noise. The label is exactly the union of the change shapes' pixels; the
/// shapes are kept mutually disjoint so the symmetric difference equals that
/// union. Sample k's randomness derives from (seed, k), so any subsequence
/// regenerates identically.
template <typename T>
std::vector<SamplePair<T>> synth_generate(std::uint64_t seed, int count, int h, int w, double change_fraction,
                                          std::vector<SynthRecord>* records = nullptr) {
    if (count <= 0 || h < 8 || w < 8) throw std::invalid_argument("synth_generate: count>0 and size>=8 required");
    if (!(change_fraction > 0.0 && change_fraction < 0.5))
        throw std::invalid_argument("synth_generate: change_fraction must lie in (0, 0.5)");

    std::vector<SamplePair<T>> out;
    out.reserve(count);
    if (records) records->clear();

    for (int k = 0; k < count; ++k) {
        auto gen = detail::sample_rng(seed, std::uint64_t(k));
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        auto t1 = Tensor<T>::create({3, h, w});
        // Smooth background: per-channel bilinear blend of four mid-range corners.
        double corners[3][4];
        for (auto& ch : corners)
            for (double& v : ch) v = 0.25 + 0.4 * unit(gen);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y) {
                const double fy = h > 1 ? double(y) / (h - 1) : 0.0;
                for (int x = 0; x < w; ++x) {
                    const double fx = w > 1 ? double(x) / (w - 1) : 0.0;
                    const double v = (1 - fy) * ((1 - fx) * corners[c][0] + fx * corners[c][1]) +
                                     fy * ((1 - fx) * corners[c][2] + fx * corners[c][3]);
                    t1->data[(std::size_t(c) * h + y) * w + x] = T(v);
                }
            }

        auto draw_shape = [&](int max_half) {
            SynthShape s;
            s.ellipse = unit(gen) < 0.5;
            s.ry = 1 + int(unit(gen) * max_half);
            s.rx = 1 + int(unit(gen) * max_half);
            s.cy = int(unit(gen) * h);
            s.cx = int(unit(gen) * w);
            return s;
        };

        // Persistent mid-tone clutter, identical in both frames.
        const int n_persistent = 2 + int(unit(gen) * 3);
        std::vector<std::pair<SynthShape, std::array<double, 3>>> persistent;
        for (int i = 0; i < n_persistent; ++i) {
            auto s = draw_shape(std::min(h, w) / 5);
            std::array<double, 3> color;
            for (double& v : color) v = 0.15 + 0.7 * unit(gen);
            detail::paint_shape(*t1, s, color.data());
            persistent.emplace_back(s, color);
        }

        auto t2 = Tensor<T>::create({3, h, w});
        t2->data = t1->data;

        // Change shapes: disjoint, extreme-tone, drawn on top of everything.
        const auto target = std::uint64_t(change_fraction * h * w + 0.5);
        std::vector<std::uint8_t> change_mask(std::size_t(h) * w, 0);
        SynthRecord rec;
        std::uint64_t covered = 0;
        int attempts = 0;
        while (covered < target && attempts < 200) {
            ++attempts;
            const std::uint64_t remaining = target - covered;
            // Half-extent from the remaining pixel budget (area ~ 4*ry*rx).
            const int half = std::max(1, std::min(std::min(h, w) / 3, int(std::sqrt(double(remaining)) / 2.0)));
            auto s = draw_shape(half);
            // Reject overlap with previous change shapes so the label equals
            // the plain union of shape rasterizations.
            std::vector<std::uint8_t> trial = change_mask;
            bool overlaps = false;
            const std::uint64_t painted = detail::rasterize_into(s, trial, h, w, &overlaps);
            if (overlaps || painted == 0) continue;
            s.removed = unit(gen) < 0.5;
            double color[3];
            for (double& v : color) v = unit(gen) < 0.5 ? 0.05 * unit(gen) : 1.0 - 0.05 * unit(gen);
            detail::paint_shape(s.removed ? *t1 : *t2, s, color);
            change_mask.swap(trial);
            covered += painted;
            rec.change_shapes.push_back(s);
        }

        // Low-amplitude sensor noise on the second acquisition only.
        std::uniform_real_distribution<double> noise(-0.02, 0.02);
        for (auto& v : t2->data) {
            double nv = double(v) + noise(gen);
            v = T(nv < 0.0 ? 0.0 : (nv > 1.0 ? 1.0 : nv));
        }

        SamplePair<T> s;
        s.id = "synth" + std::to_string(k);
        s.t1 = t1;
        s.t2 = t2;
        s.label = Tensor<T>::create({1, h, w});
        for (std::size_t i = 0; i < change_mask.size(); ++i) s.label->data[i] = T(change_mask[i]);
        out.push_back(std::move(s));
        if (records) records->push_back(std::move(rec));
    }
    return out;
}

}  // namespace scd
