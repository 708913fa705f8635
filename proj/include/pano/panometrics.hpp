// Evaluation metrics: mean IoU, panoptic quality with its SQ/RQ
// factorization, and COCO-style average precision over ten IoU thresholds.
//
// Void handling in PQ follows the metric's source definition: void pixels
// are excluded from IoU denominators, and unmatched predictions more than
// half covered by void are discarded instead of counted as false positives.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "pano/panofuse.hpp"
#include "pano/panoptic.hpp"
#include "pano/pixelgrid.hpp"

namespace pano {

// ---------------------------------------------------------------------------
// mean IoU
// ---------------------------------------------------------------------------

struct MiouReport {
    std::vector<double> iou;       // per class; meaningful where present
    std::vector<uint8_t> present;  // nonzero when the class union is non-empty
    double mean = 0.0;
    int classes_counted = 0;
};

inline MiouReport miou(const LabelGrid& pred, const LabelGrid& gt, int num_classes,
                       uint32_t ignore_label = 255) {
    if (!pred.same_shape(gt))
        throw std::invalid_argument("miou: shape mismatch");
    std::vector<size_t> inter(num_classes, 0), pcount(num_classes, 0), gcount(num_classes, 0);
    for (size_t i = 0; i < gt.size(); ++i) {
        const uint32_t g = gt.data[i];
        const uint32_t p = pred.data[i];
        if (g != ignore_label && g >= static_cast<uint32_t>(num_classes))
            throw std::invalid_argument("miou: ground-truth label out of range");
        if (p != ignore_label && p >= static_cast<uint32_t>(num_classes))
            throw std::invalid_argument("miou: predicted label out of range");
        if (g == ignore_label) continue;
        ++gcount[g];
        if (p != ignore_label) {
            ++pcount[p];
            if (p == g) ++inter[g];
        }
    }
    MiouReport out;
    out.iou.assign(num_classes, 0.0);
    out.present.assign(num_classes, 0);
    double sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        const size_t uni = pcount[c] + gcount[c] - inter[c];
        if (uni == 0) continue;
        out.present[c] = 1;
        out.iou[c] = static_cast<double>(inter[c]) / static_cast<double>(uni);
        sum += out.iou[c];
        ++out.classes_counted;
    }
    out.mean = out.classes_counted > 0 ? sum / out.classes_counted : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// panoptic quality
// ---------------------------------------------------------------------------

struct SegmentMatch {
    uint32_t pred_id = 0;
    uint32_t gt_id = 0;
    double iou = 0.0;
};

struct MatchResult {
    // per class, matches ordered by ascending gt id
    std::map<uint32_t, std::vector<SegmentMatch>> matches;
    std::map<uint32_t, int> fp;
    std::map<uint32_t, int> fn;
};

inline MatchResult match_segments(const PanopticMap& pred, const PanopticMap& gt) {
    if (!pred.labels.same_shape(gt.labels))
        throw std::invalid_argument("match_segments: dimension mismatch");
    if (pred.class_things != gt.class_things)
        throw std::invalid_argument("match_segments: class-table mismatch");

    std::unordered_map<uint32_t, size_t> pred_area, gt_area;
    std::unordered_map<uint64_t, size_t> inter;
    for (size_t i = 0; i < gt.labels.size(); ++i) {
        const uint32_t p = pred.labels.data[i];
        const uint32_t g = gt.labels.data[i];
        if (p != kVoidLabel) ++pred_area[p];
        if (g != kVoidLabel) ++gt_area[g];
        ++inter[(static_cast<uint64_t>(p) << 32) | g];
    }

    const auto overlap = [&](uint32_t p, uint32_t g) -> size_t {
        const auto it = inter.find((static_cast<uint64_t>(p) << 32) | g);
        return it == inter.end() ? 0 : it->second;
    };

    // candidate same-class pairs, deterministically ordered
    std::vector<std::pair<uint32_t, uint32_t>> pairs;
    for (const auto& [key, n] : inter) {
        const uint32_t p = static_cast<uint32_t>(key >> 32);
        const uint32_t g = static_cast<uint32_t>(key & 0xffffffffu);
        if (p == kVoidLabel || g == kVoidLabel) continue;
        if (class_of(p) != class_of(g)) continue;
        pairs.push_back({g, p});
    }
    std::sort(pairs.begin(), pairs.end());

    MatchResult out;
    std::unordered_map<uint32_t, uint8_t> pred_matched, gt_matched;
    for (const auto& [g, p] : pairs) {
        const size_t ov = overlap(p, g);
        const size_t p_void = overlap(p, kVoidLabel);
        const double uni = static_cast<double>(pred_area[p] - p_void) +
                           static_cast<double>(gt_area[g]) - static_cast<double>(ov);
        const double iou = static_cast<double>(ov) / uni;
        if (iou > 0.5) {
            out.matches[class_of(g)].push_back({p, g, iou});
            pred_matched[p] = 1;
            gt_matched[g] = 1;
        }
    }

    std::vector<uint32_t> pred_ids, gt_ids;
    for (const auto& [id, a] : pred_area) pred_ids.push_back(id);
    for (const auto& [id, a] : gt_area) gt_ids.push_back(id);
    std::sort(pred_ids.begin(), pred_ids.end());
    std::sort(gt_ids.begin(), gt_ids.end());
    for (uint32_t p : pred_ids) {
        if (pred_matched.count(p)) continue;
        // discard predictions mostly covered by ground-truth void
        if (2 * overlap(p, kVoidLabel) > pred_area[p]) continue;
        ++out.fp[class_of(p)];
    }
    for (uint32_t g : gt_ids)
        if (!gt_matched.count(g)) ++out.fn[class_of(g)];
    return out;
}

struct PqClass {
    double pq = 0.0, sq = 0.0, rq = 0.0;
    int tp = 0, fp = 0, fn = 0;
};

struct PqReport {
    std::map<uint32_t, PqClass> per_class;  // classes with any tp, fp or fn
    double pq = 0.0, sq = 0.0, rq = 0.0;
    double pq_things = 0.0, pq_stuff = 0.0;
    int classes_counted = 0, things_counted = 0, stuff_counted = 0;
};

inline PqReport panoptic_quality(const PanopticMap& pred, const PanopticMap& gt) {
    const MatchResult m = match_segments(pred, gt);

    std::map<uint32_t, std::pair<double, int>> tp_stats;  // class -> (iou sum, tp)
    for (const auto& [cls, matches] : m.matches) {
        double iou_sum = 0.0;
        for (const SegmentMatch& sm : matches) iou_sum += sm.iou;
        tp_stats[cls] = {iou_sum, static_cast<int>(matches.size())};
    }

    PqReport out;
    std::map<uint32_t, PqClass> acc;
    for (const auto& [cls, st] : tp_stats) {
        acc[cls].tp = st.second;
    }
    for (const auto& [cls, n] : m.fp) acc[cls].fp = n;
    for (const auto& [cls, n] : m.fn) acc[cls].fn = n;

    double pq_sum = 0.0, sq_sum = 0.0, rq_sum = 0.0;
    double pq_things_sum = 0.0, pq_stuff_sum = 0.0;
    for (auto& [cls, pc] : acc) {
        const double denom = pc.tp + 0.5 * pc.fp + 0.5 * pc.fn;
        if (pc.tp > 0) {
            const double iou_sum = tp_stats[cls].first;
            pc.sq = iou_sum / pc.tp;
            pc.rq = pc.tp / denom;
        }
        // pq as the literal product so the factorization holds exactly
        pc.pq = pc.sq * pc.rq;
        out.per_class[cls] = pc;
        pq_sum += pc.pq;
        sq_sum += pc.sq;
        rq_sum += pc.rq;
        ++out.classes_counted;
        if (gt.is_thing_class(cls)) {
            pq_things_sum += pc.pq;
            ++out.things_counted;
        } else {
            pq_stuff_sum += pc.pq;
            ++out.stuff_counted;
        }
    }
    if (out.classes_counted > 0) {
        out.pq = pq_sum / out.classes_counted;
        out.sq = sq_sum / out.classes_counted;
        out.rq = rq_sum / out.classes_counted;
    }
    if (out.things_counted > 0) out.pq_things = pq_things_sum / out.things_counted;
    if (out.stuff_counted > 0) out.pq_stuff = pq_stuff_sum / out.stuff_counted;
    return out;
}

// ---------------------------------------------------------------------------
// average precision
// ---------------------------------------------------------------------------

struct InstanceDetection {
    BinaryMask mask;
    uint32_t class_id = 0;
    float score = 0.0f;
    int peak_row = 0, peak_col = 0;
};

struct InstanceGt {
    BinaryMask mask;
    uint32_t class_id = 0;
};

struct ApReport {
    std::vector<double> thresholds;                 // 0.50 .. 0.95
    std::map<uint32_t, std::vector<double>> per_class;  // classes with gt
    double mean = 0.0;
    int classes_counted = 0;
};

inline std::vector<double> ap_thresholds() {
    std::vector<double> t;
    for (int k = 0; k < 10; ++k) t.push_back((50 + 5 * k) / 100.0);
    return t;
}

inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const bool av = a.data[i] != 0, bv = b.data[i] != 0;
        inter += av && bv;
        uni += av || bv;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// detections and ground truths are per-image lists; masks of one image share
// its dimensions
inline ApReport average_precision(
    const std::vector<std::vector<InstanceDetection>>& detections,
    const std::vector<std::vector<InstanceGt>>& gts) {
    if (detections.size() != gts.size())
        throw std::invalid_argument("average_precision: image count mismatch");

    struct Det {
        float score;
        size_t image;
        int peak_row, peak_col;
        const InstanceDetection* d;
    };
    std::map<uint32_t, std::vector<Det>> dets_by_class;
    std::map<uint32_t, std::vector<std::pair<size_t, const InstanceGt*>>> gts_by_class;
    for (size_t img = 0; img < gts.size(); ++img) {
        for (const auto& d : detections[img]) {
            if (!std::isfinite(d.score))
                throw std::invalid_argument("average_precision: non-finite score");
            dets_by_class[d.class_id].push_back({d.score, img, d.peak_row, d.peak_col, &d});
        }
        for (const auto& g : gts[img]) gts_by_class[g.class_id].push_back({img, &g});
    }

    ApReport out;
    out.thresholds = ap_thresholds();
    double total = 0.0;
    for (auto& [cls, class_gts] : gts_by_class) {
        auto& dets = dets_by_class[cls];
        std::sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.image != b.image) return a.image < b.image;
            if (a.peak_row != b.peak_row) return a.peak_row < b.peak_row;
            return a.peak_col < b.peak_col;
        });
        const size_t n_gt = class_gts.size();
        std::vector<double> aps;
        for (double tau : out.thresholds) {
            std::vector<uint8_t> gt_used(n_gt, 0);
            std::vector<std::pair<double, double>> pr;  // recall, precision
            size_t tp = 0, fp = 0;
            for (const Det& det : dets) {
                double best_iou = 0.0;
                size_t best_gt = n_gt;
                for (size_t gi = 0; gi < n_gt; ++gi) {
                    if (gt_used[gi] || class_gts[gi].first != det.image) continue;
                    const double iou = mask_iou(det.d->mask, class_gts[gi].second->mask);
                    if (iou > best_iou) {
                        best_iou = iou;
                        best_gt = gi;
                    }
                }
                if (best_gt < n_gt && best_iou >= tau) {
                    gt_used[best_gt] = 1;
                    ++tp;
                } else {
                    ++fp;
                }
                pr.push_back({static_cast<double>(tp) / n_gt,
                              static_cast<double>(tp) / (tp + fp)});
            }
            // 101-point interpolated precision (envelope from the right)
            double ap = 0.0;
            for (int k = 0; k <= 100; ++k) {
                const double r = k / 100.0;
                double best = 0.0;
                for (const auto& [rec, prec] : pr)
                    if (rec >= r) best = std::max(best, prec);
                ap += best;
            }
            aps.push_back(ap / 101.0);
        }
        out.per_class[cls] = aps;
        for (double a : aps) total += a;
        ++out.classes_counted;
    }
    if (out.classes_counted > 0) total /= out.classes_counted * out.thresholds.size();
    out.mean = total;
    return out;
}

// Adapters from a panoptic map to metric inputs. Scores and peak positions
// come from the detected centers when provided (matched by instance rank).
inline std::vector<InstanceGt> gt_instances(const PanopticMap& map) {
    std::map<uint32_t, BinaryMask> masks;
    for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x) {
            if (!map.is_thing(y, x)) continue;
            const uint32_t id = map.labels.at(y, x);
            auto [it, fresh] = masks.try_emplace(id, BinaryMask());
            if (fresh) it->second = BinaryMask(map.height(), map.width(), false);
            it->second.set(y, x, true);
        }
    std::vector<InstanceGt> out;
    for (auto& [id, mask] : masks) out.push_back({std::move(mask), class_of(id)});
    return out;
}

inline std::vector<InstanceDetection> pred_instances(
    const PanopticMap& map, const std::vector<DetectedCenter>& centers) {
    std::map<uint32_t, BinaryMask> masks;
    for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x) {
            if (!map.is_thing(y, x)) continue;
            const uint32_t id = map.labels.at(y, x);
            auto [it, fresh] = masks.try_emplace(id, BinaryMask());
            if (fresh) it->second = BinaryMask(map.height(), map.width(), false);
            it->second.set(y, x, true);
        }
    std::map<int, const DetectedCenter*> by_rank;
    for (const auto& c : centers) by_rank[c.index] = &c;
    std::vector<InstanceDetection> out;
    for (auto& [id, mask] : masks) {
        InstanceDetection d;
        d.class_id = class_of(id);
        const auto it = by_rank.find(static_cast<int>(instance_of(id)));
        if (it != by_rank.end()) {
            d.score = it->second->score;
            d.peak_row = it->second->row;
            d.peak_col = it->second->col;
        } else {
            d.score = 1.0f;
        }
        d.mask = std::move(mask);
        out.push_back(std::move(d));
    }
    return out;
}

// ---------------------------------------------------------------------------
// flat text serialization: one "class metric value" triple per line
// ---------------------------------------------------------------------------

namespace detail {
inline std::string fmt_metric(uint32_t cls, const char* name, double v) {
    std::ostringstream os;
    os.precision(10);
    os << cls << ' ' << name << ' ' << v << '\n';
    return os.str();
}
}  // namespace detail

inline std::string to_text(const MiouReport& r) {
    std::string out;
    for (size_t c = 0; c < r.iou.size(); ++c)
        if (r.present[c]) out += detail::fmt_metric(static_cast<uint32_t>(c), "iou", r.iou[c]);
    std::ostringstream os;
    os.precision(10);
    os << "mean miou " << r.mean << '\n';
    return out + os.str();
}

inline std::string to_text(const PqReport& r) {
    std::string out;
    for (const auto& [cls, pc] : r.per_class) {
        out += detail::fmt_metric(cls, "pq", pc.pq);
        out += detail::fmt_metric(cls, "sq", pc.sq);
        out += detail::fmt_metric(cls, "rq", pc.rq);
    }
    std::ostringstream os;
    os.precision(10);
    os << "mean pq " << r.pq << '\n'
       << "mean sq " << r.sq << '\n'
       << "mean rq " << r.rq << '\n'
       << "mean pq_things " << r.pq_things << '\n'
       << "mean pq_stuff " << r.pq_stuff << '\n';
    return out + os.str();
}

inline std::string to_text(const ApReport& r) {
    std::string out;
    for (const auto& [cls, aps] : r.per_class) {
        double m = 0.0;
        for (double a : aps) m += a;
        out += detail::fmt_metric(cls, "ap", m / aps.size());
    }
    std::ostringstream os;
    os.precision(10);
    os << "mean ap " << r.mean << '\n';
    return out + os.str();
}

}  // namespace pano
