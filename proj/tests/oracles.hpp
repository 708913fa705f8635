// Independent reference implementations used to derive expected test values.
// Everything here favors the most literal formulation over speed so the
// production kernels are checked against genuinely different code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pano/panofuse.hpp"
#include "pano/panoptic.hpp"
#include "pano/pixelgrid.hpp"
#include "pano/rng.hpp"

namespace oracle {

// Literal nearest-center assignment: gather all squared distances, find the
// minimum, return the first center index attaining it.
inline pano::LabelGrid brute_force_assign(const pano::Tensor3& offsets,
                                          const pano::BinaryMask& mask,
                                          const std::vector<pano::DetectedCenter>& centers) {
    pano::LabelGrid out(mask.height, mask.width, 0);
    if (centers.empty()) return out;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.get(y, x)) continue;
            const double ry = y + static_cast<double>(offsets.at(0, y, x));
            const double rx = x + static_cast<double>(offsets.at(1, y, x));
            std::vector<double> d;
            for (const auto& c : centers)
                d.push_back((ry - c.row) * (ry - c.row) + (rx - c.col) * (rx - c.col));
            const double lo = *std::min_element(d.begin(), d.end());
            for (size_t i = 0; i < d.size(); ++i)
                if (d[i] == lo) {
                    out.at(y, x) = static_cast<uint32_t>(centers[i].index);
                    break;
                }
        }
    return out;
}

// All-pairs euclidean distance transform. Every pixel outside the image is
// background, as is every false pixel inside it.
inline std::vector<double> brute_force_edt(const pano::BinaryMask& mask) {
    const int h = mask.height, w = mask.width;
    std::vector<double> out(static_cast<size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.get(y, x)) continue;
            double best = std::numeric_limits<double>::infinity();
            // interior background pixels
            for (int by = 0; by < h; ++by)
                for (int bx = 0; bx < w; ++bx)
                    if (!mask.get(by, bx)) {
                        const double dy = y - by, dx = x - bx;
                        best = std::min(best, dy * dy + dx * dx);
                    }
            // border ring just outside the image
            for (int by = -1; by <= h; ++by)
                for (int bx = -1; bx <= w; ++bx) {
                    if (by >= 0 && by < h && bx >= 0 && bx < w) continue;
                    const double dy = y - by, dx = x - bx;
                    best = std::min(best, dy * dy + dx * dx);
                }
            out[static_cast<size_t>(y) * w + x] = std::sqrt(best);
        }
    }
    return out;
}

// Direct per-output-pixel cross-correlation, accumulation order (ic, ky, kx)
// which differs from the production kernel's tap-major order.
inline pano::Tensor3 naive_conv2d(const pano::Tensor3& in, const pano::Conv2dParams& p,
                                  int stride, int pad) {
    const int oh = (in.height + 2 * pad - p.kh) / stride + 1;
    const int ow = (in.width + 2 * pad - p.kw) / stride + 1;
    pano::Tensor3 out(p.out_channels, oh, ow);
    for (int oc = 0; oc < p.out_channels; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = p.bias[oc];
                for (int ic = 0; ic < in.channels; ++ic)
                    for (int ky = 0; ky < p.kh; ++ky)
                        for (int kx = 0; kx < p.kw; ++kx) {
                            const int iy = oy * stride - pad + ky;
                            const int ix = ox * stride - pad + kx;
                            if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width)
                                continue;
                            acc += static_cast<double>(p.w(oc, ic, ky, kx)) *
                                   in.at(ic, iy, ix);
                        }
                out.at(oc, oy, ox) = static_cast<float>(acc);
            }
    return out;
}

// Literal reading of the heatmap definition: per-pixel max over points of the
// truncated gaussian.
inline pano::Tensor3 brute_force_splat(const std::vector<pano::PointRC>& pts,
                                       double sigma, int h, int w) {
    pano::Tensor3 out(1, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double best = 0.0;
            for (const auto& pt : pts) {
                const double dy = y - pt.row, dx = x - pt.col;
                const double d2 = dy * dy + dx * dx;
                if (d2 > 9.0 * sigma * sigma) continue;
                best = std::max(best, std::exp(-d2 / (2.0 * sigma * sigma)));
            }
            out.at(0, y, x) = static_cast<float>(best);
        }
    return out;
}

// Scalar half-pixel-center resample of one axis position, written in the
// (1-t)*a + t*b form rather than the production a + t*(b-a) form.
inline double resample_1d(const std::vector<double>& src, int dst_len, int i) {
    const int n = static_cast<int>(src.size());
    double f = (i + 0.5) * (static_cast<double>(n) / dst_len) - 0.5;
    if (f < 0.0) f = 0.0;
    if (f > n - 1) f = n - 1;
    const int x0 = static_cast<int>(f);
    const int x1 = std::min(x0 + 1, n - 1);
    const double t = f - x0;
    return (1.0 - t) * src[x0] + t * src[x1];
}

inline pano::Tensor3 random_tensor(pano::Rng& rng, int c, int h, int w,
                                   double lo = -1.0, double hi = 1.0) {
    pano::Tensor3 t(c, h, w);
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

// Central finite differences against an analytic gradient, probing random
// coordinates of x. The step is the exactly realized float32 step: x is
// perturbed in storage precision and the difference quotient divides by the
// actual spacing of the two evaluation points.
template <typename LossFn, typename SkipFn>
inline double max_fd_error(pano::Rng& rng, pano::Tensor3 x, const LossFn& loss_of,
                           const pano::Tensor3& grad, int n_points, SkipFn skip) {
    double worst = 0.0;
    const double h = 1e-4;
    int done = 0;
    int guard = 0;
    while (done < n_points) {
        if (++guard > n_points * 1000)
            throw std::runtime_error("max_fd_error: skip predicate rejects everything");
        const size_t idx = static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(x.size()) - 1));
        if (skip(idx)) continue;
        const float x0 = x.data[idx];
        const float xp = static_cast<float>(x0 + h);
        const float xm = static_cast<float>(x0 - h);
        x.data[idx] = xp;
        const double lp = loss_of(x);
        x.data[idx] = xm;
        const double lm = loss_of(x);
        x.data[idx] = x0;
        const double fd = (lp - lm) / (static_cast<double>(xp) - static_cast<double>(xm));
        const double g = grad.data[idx];
        const double scale = std::max(std::abs(fd), std::abs(g));
        if (scale >= 1e-6) worst = std::max(worst, std::abs(fd - g) / scale);
        ++done;
    }
    return worst;
}

template <typename LossFn>
inline double max_fd_error(pano::Rng& rng, const pano::Tensor3& x, const LossFn& loss_of,
                           const pano::Tensor3& grad, int n_points) {
    return max_fd_error(rng, x, loss_of, grad, n_points, [](size_t) { return false; });
}

// Direct long-double cross entropy of one pixel, no log-sum-exp rearrangement.
inline double direct_ce(const std::vector<double>& logits, int label) {
    long double denom = 0.0L;
    for (double v : logits) denom += std::exp(static_cast<long double>(v));
    const long double p = std::exp(static_cast<long double>(logits[label])) / denom;
    return static_cast<double>(-std::log(p));
}

// Random but contract-respecting panoptic map: stuff background, a stuff
// rectangle, a few thing rectangles (overlap allowed, later wins), optional
// void speckles. Classes 0/1 are stuff, 2/3 are things.
inline pano::PanopticMap random_panoptic(pano::Rng& rng, int h, int w,
                                         double void_fraction = 0.02) {
    pano::PanopticMap pan;
    pan.class_things = {0, 0, 1, 1};
    pan.labels = pano::LabelGrid(h, w, pano::encode_label(0, 0));

    auto fill_rect = [&](uint32_t label) {
        const int y0 = static_cast<int>(rng.uniform_int(0, h - 1));
        const int x0 = static_cast<int>(rng.uniform_int(0, w - 1));
        const int y1 = static_cast<int>(rng.uniform_int(y0, h - 1));
        const int x1 = static_cast<int>(rng.uniform_int(x0, w - 1));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) pan.labels.at(y, x) = label;
    };

    fill_rect(pano::encode_label(1, 0));
    uint32_t next_instance[2] = {1, 1};
    const int n_things = static_cast<int>(rng.uniform_int(1, 4));
    for (int i = 0; i < n_things; ++i) {
        const uint32_t cls = rng.uniform() < 0.5 ? 2 : 3;
        fill_rect(pano::encode_label(cls, next_instance[cls - 2]++));
    }
    for (size_t i = 0; i < pan.labels.size(); ++i)
        if (rng.uniform() < void_fraction) pan.labels.data[i] = pano::kVoidLabel;
    pano::validate(pan);
    return pan;
}

// Confusion-matrix mIoU. Ground-truth ignore pixels drop out entirely; a
// predicted ignore label at a counted pixel predicts nothing.
struct MiouOracle {
    std::vector<double> iou;
    std::vector<bool> present;
    double mean = 0.0;
};

inline MiouOracle confusion_miou(const pano::LabelGrid& pred, const pano::LabelGrid& gt,
                                 int num_classes, uint32_t ignore = 255) {
    std::vector<std::vector<size_t>> conf(num_classes,
                                          std::vector<size_t>(num_classes + 1, 0));
    for (size_t i = 0; i < gt.size(); ++i) {
        if (gt.data[i] == ignore) continue;
        const size_t col = pred.data[i] == ignore ? num_classes : pred.data[i];
        ++conf[gt.data[i]][col];
    }
    MiouOracle out;
    out.iou.assign(num_classes, 0.0);
    out.present.assign(num_classes, false);
    double sum = 0.0;
    int n = 0;
    for (int c = 0; c < num_classes; ++c) {
        size_t row = 0, col = 0;
        for (size_t j = 0; j <= static_cast<size_t>(num_classes); ++j) row += conf[c][j];
        for (int g = 0; g < num_classes; ++g) col += conf[g][c];
        const size_t uni = row + col - conf[c][c];
        if (uni == 0) continue;
        out.present[c] = true;
        out.iou[c] = static_cast<double>(conf[c][c]) / static_cast<double>(uni);
        sum += out.iou[c];
        ++n;
    }
    if (n > 0) out.mean = sum / n;
    return out;
}

// Void-adjusted IoU between one predicted and one ground-truth segment,
// computed from explicit pixel scans.
inline double segment_iou(const pano::PanopticMap& pred, const pano::PanopticMap& gt,
                          uint32_t pred_id, uint32_t gt_id) {
    size_t p_area = 0, g_area = 0, inter = 0, p_void = 0;
    for (size_t i = 0; i < gt.labels.size(); ++i) {
        const bool in_p = pred.labels.data[i] == pred_id;
        const bool in_g = gt.labels.data[i] == gt_id;
        p_area += in_p;
        g_area += in_g;
        inter += in_p && in_g;
        p_void += in_p && gt.labels.data[i] == pano::kVoidLabel;
    }
    const double uni = static_cast<double>(p_area - p_void) + static_cast<double>(g_area) -
                       static_cast<double>(inter);
    return static_cast<double>(inter) / uni;
}

inline std::vector<uint32_t> segment_ids(const pano::PanopticMap& map) {
    std::vector<uint32_t> ids(map.labels.data);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    ids.erase(std::remove(ids.begin(), ids.end(), pano::kVoidLabel), ids.end());
    return ids;
}

struct OraclePair {
    uint32_t pred_id, gt_id;
    double iou;
};

// Every same-class segment pair whose void-adjusted IoU exceeds one half.
inline std::vector<OraclePair> all_matches(const pano::PanopticMap& pred,
                                           const pano::PanopticMap& gt) {
    std::vector<OraclePair> out;
    for (uint32_t p : segment_ids(pred))
        for (uint32_t g : segment_ids(gt)) {
            if (pano::class_of(p) != pano::class_of(g)) continue;
            const double iou = segment_iou(pred, gt, p, g);
            if (iou > 0.5) out.push_back({p, g, iou});
        }
    return out;
}

}  // namespace oracle
