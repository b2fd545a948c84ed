#pragma once

// Binarization, confusion counting, and the four evaluation scores
// (precision, recall, F1, overall accuracy) for binary change maps.
// Positive class = changed = 1.

#include <scd/tensor.hpp>

#include <cstdint>
#include <vector>

namespace scd {

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }

    // Counts from disjoint tiles merge by plain addition.
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }
    friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
    bool operator==(const ConfusionCounts&) const = default;
};

struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    // False when the split has no positives at all (gt and prediction both
    // all-negative): precision/recall carry no information there, and
    // reporting 1.0 would be misleading.
    bool positives_defined = true;
};

/// pixel = 1 iff prob >= threshold (the boundary counts as changed).
template <typename T>
std::vector<std::uint8_t> binarize(const TensorPtr<T>& prob_map, double threshold = 0.5) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("binarize: threshold must be in (0,1)");
    std::vector<std::uint8_t> mask(prob_map->numel());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (double(prob_map->data[i]) >= threshold) ? 1 : 0;
    return mask;
}

inline ConfusionCounts confusion(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt) {
    if (pred.size() != gt.size()) throw std::invalid_argument("confusion: mask sizes disagree");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] > 1 || gt[i] > 1) throw std::invalid_argument("confusion: masks must be strictly 0/1");
        if (gt[i]) {
            (pred[i] ? c.tp : c.fn)++;
        } else {
            (pred[i] ? c.fp : c.tn)++;
        }
    }
    return c;
}

/// Convenience: threshold a probability map against a {0,1} label tensor.
template <typename T>
ConfusionCounts confusion(const TensorPtr<T>& prob_map, const TensorPtr<T>& gt, double threshold = 0.5) {
    if (prob_map->shape != gt->shape)
        throw std::invalid_argument("confusion: shape mismatch " + shape_str(prob_map->shape) + " vs " +
                                    shape_str(gt->shape));
    std::vector<std::uint8_t> gt_mask(gt->numel());
    for (std::size_t i = 0; i < gt_mask.size(); ++i) {
        const double v = double(gt->data[i]);
        if (v != 0.0 && v != 1.0) throw std::invalid_argument("confusion: ground truth must be strictly 0/1");
        gt_mask[i] = v != 0.0;
    }
    return confusion(binarize(prob_map, threshold), gt_mask);
}

/// Ratios in [0,1]; zero-numerator convention: any score whose TP numerator
/// is zero reports 0 rather than dividing by zero.
inline Scores scores(const ConfusionCounts& c) {
    if (c.total() == 0) throw std::invalid_argument("scores: empty confusion (no pixels evaluated)");
    Scores s;
    s.accuracy = double(c.tp + c.tn) / double(c.total());
    if (c.tp + c.fn + c.fp == 0) {
        s.positives_defined = false;
        return s;
    }
    s.precision = (c.tp + c.fp) ? double(c.tp) / double(c.tp + c.fp) : 0.0;
    s.recall = (c.tp + c.fn) ? double(c.tp) / double(c.tp + c.fn) : 0.0;
    s.f1 = (s.precision + s.recall > 0.0) ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

}  // namespace scd
