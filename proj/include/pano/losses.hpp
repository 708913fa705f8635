// Compound training objective: per-pixel cross entropy with optional
// hard-pixel mining, center-heatmap MSE, boundary-aware weighted L1 offset
// loss, and the weighted total. Each loss reports its scalar together with
// the exact analytic gradient with respect to the prediction tensor.
//
// Scalars and reductions run in 64-bit, in row-major order, so results are
// bit-reproducible.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "pano/pixelgrid.hpp"
#include "pano/predictions.hpp"
#include "pano/targetgen.hpp"

namespace pano {

struct LossConfig {
    double lambda_sem = 1.0;
    double lambda_cen = 200.0;
    double lambda_baol = 0.0025;
    // weight of the offset term when boundary weights are disabled (the
    // plain-L1 baseline)
    double plain_l1_lambda = 0.01;
    double hard_pixel_fraction = 1.0;  // 0.2 when mining is enabled
    bool use_boundary_weights = true;

    static constexpr double kHardFractionDefault = 0.2;

    void validate() const {
        if (lambda_sem < 0.0 || lambda_cen < 0.0 || lambda_baol < 0.0 ||
            plain_l1_lambda < 0.0)
            throw std::invalid_argument("LossConfig: weights must be non-negative");
        if (!(hard_pixel_fraction > 0.0) || hard_pixel_fraction > 1.0)
            throw std::invalid_argument("LossConfig: hard_pixel_fraction must be in (0,1]");
    }
};

struct LossValue {
    double value = 0.0;
    Tensor3 gradient;  // shaped like the prediction input
};

// Softmax cross entropy over valid pixels (label 255 is ignored). With
// fraction < 1 only the ceil(fraction * n_valid) pixels with the largest
// loss are averaged; ties at the cutoff resolve in row-major order. The
// gradient differentiates the reported scalar with the selection held fixed,
// so it is zero on unselected and ignored pixels.
inline LossValue semantic_loss(const Tensor3& logits, const LabelGrid& labels,
                               double hard_pixel_fraction = 1.0) {
    if (logits.channels < 2)
        throw std::invalid_argument("semantic_loss: need at least 2 classes");
    if (logits.height != labels.height || logits.width != labels.width)
        throw std::invalid_argument("semantic_loss: logits/labels shape mismatch");
    if (!(hard_pixel_fraction > 0.0) || hard_pixel_fraction > 1.0)
        throw std::invalid_argument("semantic_loss: fraction must be in (0,1]");

    const int C = logits.channels;
    const size_t plane = logits.plane();
    std::vector<double> pixel_loss(plane, 0.0);
    std::vector<double> lse(plane, 0.0);
    std::vector<size_t> valid;
    valid.reserve(plane);
    for (size_t i = 0; i < plane; ++i) {
        const uint32_t label = labels.data[i];
        if (label == kIgnoreClass) continue;
        if (label >= static_cast<uint32_t>(C))
            throw std::invalid_argument("semantic_loss: label out of range");
        double m = logits.data[i];
        for (int c = 1; c < C; ++c) m = std::max(m, static_cast<double>(logits.data[c * plane + i]));
        double sum = 0.0;
        for (int c = 0; c < C; ++c) sum += std::exp(logits.data[c * plane + i] - m);
        lse[i] = m + std::log(sum);
        pixel_loss[i] = lse[i] - logits.data[label * plane + i];
        valid.push_back(i);
    }
    if (valid.empty())
        throw std::invalid_argument("semantic_loss: no valid pixels");

    std::vector<size_t> selected;
    if (hard_pixel_fraction < 1.0) {
        const size_t k = static_cast<size_t>(
            std::ceil(hard_pixel_fraction * static_cast<double>(valid.size())));
        selected = valid;
        std::stable_sort(selected.begin(), selected.end(), [&](size_t a, size_t b) {
            if (pixel_loss[a] != pixel_loss[b]) return pixel_loss[a] > pixel_loss[b];
            return a < b;
        });
        selected.resize(std::max<size_t>(k, 1));
        std::sort(selected.begin(), selected.end());
    } else {
        selected = valid;
    }

    LossValue out;
    out.gradient = Tensor3(C, logits.height, logits.width);
    double acc = 0.0;
    const double inv_k = 1.0 / static_cast<double>(selected.size());
    for (size_t i : selected) {
        acc += pixel_loss[i];
        const uint32_t label = labels.data[i];
        for (int c = 0; c < C; ++c) {
            const double p = std::exp(logits.data[c * plane + i] - lse[i]);
            const double onehot = (static_cast<uint32_t>(c) == label) ? 1.0 : 0.0;
            out.gradient.data[c * plane + i] = static_cast<float>((p - onehot) * inv_k);
        }
    }
    out.value = acc * inv_k;
    return out;
}

// Mean squared error over all pixels.
inline LossValue center_loss(const Tensor3& pred, const Tensor3& gt) {
    if (!pred.same_shape(gt) || pred.channels != 1)
        throw std::invalid_argument("center_loss: expects matching 1-channel tensors");
    const double inv_n = 1.0 / static_cast<double>(pred.plane());
    LossValue out;
    out.gradient = Tensor3(1, pred.height, pred.width);
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - gt.data[i];
        acc += d * d;
        out.gradient.data[i] = static_cast<float>(2.0 * d * inv_n);
    }
    out.value = acc * inv_n;
    return out;
}

// Boundary-aware offset loss: (1/(H*W)) sum of w * (|dr| + |dc|), with the
// subgradient convention sign(0) = 0.
inline LossValue offset_loss_bal(const Tensor3& pred, const Tensor3& gt_offsets,
                                 const Tensor3& weights) {
    if (!pred.same_shape(gt_offsets) || pred.channels != 2)
        throw std::invalid_argument("offset_loss_bal: expects matching 2-channel tensors");
    if (weights.channels != 1 || weights.height != pred.height ||
        weights.width != pred.width)
        throw std::invalid_argument("offset_loss_bal: weight map shape mismatch");
    for (float w : weights.data)
        if (w < 0.0f)
            throw std::invalid_argument("offset_loss_bal: negative weight");

    const size_t plane = pred.plane();
    const double inv_n = 1.0 / static_cast<double>(plane);
    LossValue out;
    out.gradient = Tensor3(2, pred.height, pred.width);
    double acc = 0.0;
    for (size_t i = 0; i < plane; ++i) {
        const double w = weights.data[i];
        double l1 = 0.0;
        for (int c = 0; c < 2; ++c) {
            const double d =
                static_cast<double>(pred.data[c * plane + i]) - gt_offsets.data[c * plane + i];
            l1 += std::abs(d);
            const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            out.gradient.data[c * plane + i] = static_cast<float>(w * sign * inv_n);
        }
        acc += w * l1;
    }
    out.value = acc * inv_n;
    return out;
}

struct CompoundLoss {
    double total = 0.0;
    // unweighted components
    double sem = 0.0;
    double cen = 0.0;
    double off = 0.0;
    // effective weights that produced the total
    double lambda_sem = 0.0;
    double lambda_cen = 0.0;
    double lambda_off = 0.0;
};

inline CompoundLoss compound_loss(const PredictionSet& preds, const TargetSet& targets,
                                  const LossConfig& cfg = {}) {
    cfg.validate();
    CompoundLoss out;
    out.sem = semantic_loss(preds.sem_logits, targets.semantic, cfg.hard_pixel_fraction).value;
    out.cen = center_loss(preds.center_heatmap, targets.center_heatmap).value;
    out.lambda_sem = cfg.lambda_sem;
    out.lambda_cen = cfg.lambda_cen;
    if (cfg.use_boundary_weights) {
        out.off = offset_loss_bal(preds.offsets, targets.offsets, targets.offset_weights).value;
        out.lambda_off = cfg.lambda_baol;
    } else {
        Tensor3 ones(1, preds.offsets.height, preds.offsets.width);
        std::fill(ones.data.begin(), ones.data.end(), 1.0f);
        out.off = offset_loss_bal(preds.offsets, targets.offsets, ones).value;
        out.lambda_off = cfg.plain_l1_lambda;
    }
    out.total = out.lambda_sem * out.sem + out.lambda_cen * out.cen + out.lambda_off * out.off;
    return out;
}

}  // namespace pano
