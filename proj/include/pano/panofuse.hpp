// Bottom-up panoptic recovery: center NMS on the heatmap, offset-guided
// pixel-to-center assignment, semantic majority voting per instance, and
// panoptic map construction. Also provides the ground-truth substitution
// switchboard used for oracle ablations.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "pano/panoptic.hpp"
#include "pano/pixelgrid.hpp"
#include "pano/predictions.hpp"
#include "pano/targetgen.hpp"

namespace pano {

struct DetectedCenter {
    int row = 0;
    int col = 0;
    float score = 0.0f;
    int index = 0;  // 1-based rank: descending score, ties by row-major position
};

struct FuseConfig {
    int nms_window = 7;
    double nms_threshold = 0.1;
    int max_centers = 200;
    // optional area filter: stuff classes covering fewer pixels than this are
    // voided; 0 disables the filter
    int min_stuff_area = 0;

    void validate() const {
        if (nms_window < 3 || nms_window % 2 == 0)
            throw std::invalid_argument("FuseConfig: nms_window must be odd and >= 3");
        if (nms_threshold < 0.0)
            throw std::invalid_argument("FuseConfig: nms_threshold must be >= 0");
        if (max_centers < 0 || min_stuff_area < 0)
            throw std::invalid_argument("FuseConfig: counts must be >= 0");
    }
};

// A pixel survives iff its value reaches the threshold, no window neighbor is
// strictly greater, and no equal-valued window neighbor precedes it in
// row-major order (plateaus keep their first pixel).
inline std::vector<DetectedCenter> nms_centers(const Tensor3& heatmap,
                                               const FuseConfig& cfg = {}) {
    if (heatmap.channels != 1)
        throw std::invalid_argument("nms_centers: expects a 1-channel heatmap");
    cfg.validate();
    const int h = heatmap.height, w = heatmap.width;
    const int r = cfg.nms_window / 2;
    std::vector<DetectedCenter> out;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float v = heatmap.at(0, y, x);
            if (v < cfg.nms_threshold) continue;
            bool keep = true;
            for (int dy = -r; dy <= r && keep; ++dy) {
                const int ny = y + dy;
                if (ny < 0 || ny >= h) continue;
                for (int dx = -r; dx <= r; ++dx) {
                    const int nx = x + dx;
                    if (nx < 0 || nx >= w || (dy == 0 && dx == 0)) continue;
                    const float nv = heatmap.at(0, ny, nx);
                    if (nv > v || (nv == v && (ny < y || (ny == y && nx < x)))) {
                        keep = false;
                        break;
                    }
                }
            }
            if (keep) out.push_back({y, x, v, 0});
        }
    std::sort(out.begin(), out.end(), [w](const DetectedCenter& a, const DetectedCenter& b) {
        if (a.score != b.score) return a.score > b.score;
        return static_cast<int64_t>(a.row) * w + a.col <
               static_cast<int64_t>(b.row) * w + b.col;
    });
    if (static_cast<int>(out.size()) > cfg.max_centers) out.resize(cfg.max_centers);
    for (size_t i = 0; i < out.size(); ++i) out[i].index = static_cast<int>(i) + 1;
    return out;
}

namespace detail {

// Row-band kernel shared by the plain and the threaded assignment: each band
// writes a disjoint set of rows, so any partition produces identical bits.
inline void assign_rows(const Tensor3& offsets, const BinaryMask& thing_mask,
                        const std::vector<DetectedCenter>& centers, int y0, int y1,
                        LabelGrid& out) {
    for (int y = y0; y < y1; ++y)
        for (int x = 0; x < thing_mask.width; ++x) {
            if (!thing_mask.get(y, x)) continue;
            const double ry = y + static_cast<double>(offsets.at(0, y, x));
            const double rx = x + static_cast<double>(offsets.at(1, y, x));
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (const DetectedCenter& c : centers) {
                const double dy = ry - c.row, dx = rx - c.col;
                const double d = dy * dy + dx * dx;
                if (d < best_d) {
                    best_d = d;
                    best = c.index;
                }
            }
            out.at(y, x) = static_cast<uint32_t>(best);
        }
}

}  // namespace detail

// Each thing pixel follows its offset to a regressed center position and is
// assigned the nearest detected center (squared Euclidean, ties toward the
// lowest rank). Rank 0 marks unassigned pixels.
inline LabelGrid assign_instances(const Tensor3& offsets, const BinaryMask& thing_mask,
                                  const std::vector<DetectedCenter>& centers) {
    if (offsets.channels != 2 || offsets.height != thing_mask.height ||
        offsets.width != thing_mask.width)
        throw std::invalid_argument("assign_instances: offsets/mask shape mismatch");
    LabelGrid out(thing_mask.height, thing_mask.width, 0);
    if (centers.empty()) return out;
    detail::assign_rows(offsets, thing_mask, centers, 0, thing_mask.height, out);
    return out;
}

// Majority vote over each instance's semantic labels, restricted to thing
// classes; ties resolve toward the lower class id, and an instance with zero
// thing-class votes maps to void.
inline std::map<uint32_t, uint32_t> vote_semantics(const LabelGrid& instance_map,
                                                   const LabelGrid& sem_labels,
                                                   const std::vector<uint8_t>& class_things) {
    if (!instance_map.same_shape(sem_labels))
        throw std::invalid_argument("vote_semantics: shape mismatch");
    std::map<uint32_t, std::map<uint32_t, size_t>> hist;
    for (size_t i = 0; i < instance_map.size(); ++i) {
        const uint32_t rank = instance_map.data[i];
        if (rank == 0) continue;
        hist.try_emplace(rank);
        const uint32_t cls = sem_labels.data[i];
        if (cls < class_things.size() && class_things[cls] != 0) ++hist[rank][cls];
    }
    std::map<uint32_t, uint32_t> out;
    for (const auto& [rank, counts] : hist) {
        uint32_t best = kVoidClass;
        size_t best_n = 0;
        for (const auto& [cls, n] : counts)  // ascending class id, so ties keep the first
            if (n > best_n) {
                best_n = n;
                best = cls;
            }
        out[rank] = best;
    }
    return out;
}

struct FuseResult {
    PanopticMap map;
    std::vector<DetectedCenter> centers;  // centers that kept pixels, re-ranked
};

// Final assembly: stuff pixels keep their semantic class, assigned thing
// pixels take their instance's voted class, unassigned thing pixels go void.
// Ranks are compacted so the output uses a contiguous 1..K in the original
// detection order.
inline FuseResult construct_panoptic(const LabelGrid& sem, const LabelGrid& ranks,
                                     const std::map<uint32_t, uint32_t>& votes,
                                     const std::vector<uint8_t>& class_things,
                                     const std::vector<DetectedCenter>& centers,
                                     const FuseConfig& cfg = {}) {
    if (!sem.same_shape(ranks))
        throw std::invalid_argument("construct_panoptic: shape mismatch");

    // compact ranks that kept at least one pixel, preserving detection order
    std::vector<uint32_t> used;
    {
        std::vector<uint8_t> seen(centers.size() + 1, 0);
        for (uint32_t r : ranks.data)
            if (r != 0 && r < seen.size()) seen[r] = 1;
        for (uint32_t r = 1; r < seen.size(); ++r)
            if (seen[r]) used.push_back(r);
    }
    if (used.size() > kLabelDivisor - 1)
        throw std::runtime_error("construct_panoptic: more instances than the encoding holds");
    std::map<uint32_t, uint32_t> compact;
    for (size_t i = 0; i < used.size(); ++i) compact[used[i]] = static_cast<uint32_t>(i) + 1;

    FuseResult out;
    out.map.class_things = class_things;
    out.map.labels = LabelGrid(sem.height, sem.width, kVoidLabel);
    for (size_t i = 0; i < sem.size(); ++i) {
        const uint32_t cls = sem.data[i];
        const bool thing = cls < class_things.size() && class_things[cls] != 0;
        if (!thing) {
            out.map.labels.data[i] = encode_label(cls, 0);
            continue;
        }
        const uint32_t rank = ranks.data[i];
        if (rank == 0) continue;  // unassignable thing pixel stays void
        const uint32_t voted = votes.count(rank) ? votes.at(rank) : kVoidClass;
        if (voted == kVoidClass) continue;
        out.map.labels.data[i] = encode_label(voted, compact.at(rank));
    }

    if (cfg.min_stuff_area > 0) {
        std::map<uint32_t, size_t> area;
        for (uint32_t label : out.map.labels.data) {
            const uint32_t cls = class_of(label);
            if (label != kVoidLabel && instance_of(label) == 0) ++area[cls];
        }
        for (auto& label : out.map.labels.data) {
            if (label == kVoidLabel || instance_of(label) != 0) continue;
            if (area[class_of(label)] < static_cast<size_t>(cfg.min_stuff_area))
                label = kVoidLabel;
        }
    }

    for (const DetectedCenter& c : centers) {
        const auto it = compact.find(static_cast<uint32_t>(c.index));
        if (it == compact.end()) continue;
        DetectedCenter kept = c;
        kept.index = static_cast<int>(it->second);
        out.centers.push_back(kept);
    }
    return out;
}

inline FuseResult fuse_panoptic(const PredictionSet& preds,
                                const std::vector<uint8_t>& class_things,
                                const FuseConfig& cfg = {}) {
    if (preds.center_heatmap.height != preds.sem_logits.height ||
        preds.center_heatmap.width != preds.sem_logits.width ||
        !preds.offsets.same_shape(Tensor3(2, preds.sem_logits.height,
                                          preds.sem_logits.width)))
        throw std::invalid_argument("fuse_panoptic: prediction shapes disagree");
    cfg.validate();

    const LabelGrid sem = argmax_channel(preds.sem_logits);
    BinaryMask thing_mask(sem.height, sem.width, false);
    for (size_t i = 0; i < sem.size(); ++i) {
        const uint32_t cls = sem.data[i];
        if (cls < class_things.size() && class_things[cls] != 0)
            thing_mask.data[i] = 1;
    }
    const auto centers = nms_centers(preds.center_heatmap, cfg);
    const LabelGrid ranks = assign_instances(preds.offsets, thing_mask, centers);
    const auto votes = vote_semantics(ranks, sem, class_things);
    return construct_panoptic(sem, ranks, votes, class_things, centers, cfg);
}

struct OracleFlags {
    bool semantic = false;
    bool centers = false;
    bool offsets = false;
};

constexpr float kOracleLogitMargin = 10.0f;

// Ground-truth substitution for ablation studies: flagged tensors are
// replaced by their target-set equivalents, the rest pass through untouched.
inline PredictionSet oracle_substitute(const PredictionSet& preds, const TargetSet& targets,
                                       const OracleFlags& flags) {
    PredictionSet out = preds;
    if (flags.semantic) {
        const int C = preds.sem_logits.channels;
        Tensor3 onehot(C, targets.semantic.height, targets.semantic.width);
        for (size_t i = 0; i < targets.semantic.size(); ++i) {
            const uint32_t cls = targets.semantic.data[i];
            if (cls == kIgnoreClass) continue;
            if (cls >= static_cast<uint32_t>(C))
                throw std::invalid_argument("oracle_substitute: class exceeds logit channels");
            onehot.data[cls * onehot.plane() + i] = kOracleLogitMargin;
        }
        out.sem_logits = std::move(onehot);
    }
    if (flags.centers) out.center_heatmap = targets.center_heatmap;
    if (flags.offsets) out.offsets = targets.offsets;
    return out;
}

}  // namespace pano
