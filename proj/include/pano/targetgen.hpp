// Ground-truth target crafting: from a panoptic label map to the four dense
// training targets (semantic labels, center offsets, center heatmap,
// boundary-aware offset weights).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "pano/panoptic.hpp"
#include "pano/pixelgrid.hpp"

namespace pano {

constexpr uint32_t kIgnoreClass = 255;

struct TargetSet {
    LabelGrid semantic;      // class ids, 255 = ignore
    Tensor3 offsets;         // 2 channels: row offset, col offset, in pixels
    Tensor3 center_heatmap;  // 1 channel, values in [0, 1]
    Tensor3 offset_weights;  // 1 channel, 0 or a ladder weight
};

// Distance-banded weights, highest near the instance boundary. Region r
// covers distances d <= thresholds[r]; the last region is unbounded.
struct WeightLadder {
    std::vector<double> thresholds;  // ascending, length = regions - 1
    std::vector<double> weights;     // descending positive, length = regions

    WeightLadder() : thresholds{2.0, 4.0, 8.0}, weights{8.0, 4.0, 2.0, 1.0} {}
    WeightLadder(std::vector<double> t, std::vector<double> w)
        : thresholds(std::move(t)), weights(std::move(w)) {
        validate();
    }

    void validate() const {
        if (weights.empty() || thresholds.size() + 1 != weights.size())
            throw std::invalid_argument("WeightLadder: need one more weight than thresholds");
        for (size_t i = 1; i < thresholds.size(); ++i)
            if (!(thresholds[i] > thresholds[i - 1]))
                throw std::invalid_argument("WeightLadder: thresholds must ascend");
        for (size_t i = 0; i < weights.size(); ++i) {
            if (!(weights[i] > 0.0))
                throw std::invalid_argument("WeightLadder: weights must be positive");
            if (i > 0 && !(weights[i] < weights[i - 1]))
                throw std::invalid_argument("WeightLadder: weights must descend");
        }
    }

    // Variant ladder with n regions: weights decay geometrically from 8 to 1,
    // thresholds stay dyadic (2, 4, 8, ...). Reproduces the default at n = 4.
    static WeightLadder geometric(int regions) {
        if (regions < 2)
            throw std::invalid_argument("WeightLadder: need at least 2 regions");
        std::vector<double> t, w;
        for (int i = 0; i + 1 < regions; ++i) t.push_back(std::exp2(i + 1));
        for (int i = 0; i < regions; ++i)
            w.push_back(std::exp2(3.0 * (regions - 1 - i) / (regions - 1)));
        return WeightLadder(std::move(t), std::move(w));
    }

    double lookup(double distance) const {
        for (size_t r = 0; r < thresholds.size(); ++r)
            if (distance <= thresholds[r]) return weights[r];
        return weights.back();
    }
};

struct TargetConfig {
    double sigma = 5.0;
    WeightLadder ladder;
};

struct Centroid {
    uint32_t encoded_id = 0;
    double row = 0.0;
    double col = 0.0;
};

// Mass centers of every thing instance, ascending by encoded id.
inline std::vector<Centroid> instance_centroids(const PanopticMap& pan) {
    struct Acc {
        double row_sum = 0.0, col_sum = 0.0;
        size_t count = 0;
    };
    std::map<uint32_t, Acc> accs;
    for (int y = 0; y < pan.height(); ++y)
        for (int x = 0; x < pan.width(); ++x)
            if (pan.is_thing(y, x)) {
                Acc& a = accs[pan.labels.at(y, x)];
                a.row_sum += y;
                a.col_sum += x;
                ++a.count;
            }
    std::vector<Centroid> out;
    out.reserve(accs.size());
    for (const auto& [id, a] : accs)
        out.push_back({id, a.row_sum / a.count, a.col_sum / a.count});
    return out;
}

inline Tensor3 make_center_heatmap(const std::vector<Centroid>& centroids,
                                   int h, int w, double sigma = 5.0) {
    std::vector<PointRC> pts;
    pts.reserve(centroids.size());
    for (const auto& c : centroids) pts.push_back({c.row, c.col});
    return gaussian_splat(pts, sigma, h, w);
}

// Per thing pixel, the vector from the pixel to its instance centroid.
inline Tensor3 make_offsets(const PanopticMap& pan,
                            const std::vector<Centroid>& centroids) {
    std::map<uint32_t, const Centroid*> by_id;
    for (const auto& c : centroids) by_id[c.encoded_id] = &c;
    Tensor3 out(2, pan.height(), pan.width());
    for (int y = 0; y < pan.height(); ++y)
        for (int x = 0; x < pan.width(); ++x) {
            if (!pan.is_thing(y, x)) continue;
            const auto it = by_id.find(pan.labels.at(y, x));
            if (it == by_id.end())
                throw std::invalid_argument("make_offsets: centroid list missing an instance");
            out.at(0, y, x) = static_cast<float>(it->second->row - y);
            out.at(1, y, x) = static_cast<float>(it->second->col - x);
        }
    return out;
}

// Boundary-distance banded weights per thing instance; 0 elsewhere. The
// distance transform runs on the instance's bounding box only: every pixel
// outside the box is background, so the windowed transform is still exact.
inline Tensor3 make_boundary_weights(const PanopticMap& pan, const WeightLadder& ladder) {
    ladder.validate();
    struct Box {
        int y0, x0, y1, x1;
    };
    std::map<uint32_t, Box> boxes;
    for (int y = 0; y < pan.height(); ++y)
        for (int x = 0; x < pan.width(); ++x)
            if (pan.is_thing(y, x)) {
                const uint32_t id = pan.labels.at(y, x);
                auto [it, fresh] = boxes.try_emplace(id, Box{y, x, y, x});
                if (!fresh) {
                    Box& b = it->second;
                    b.y0 = std::min(b.y0, y);
                    b.x0 = std::min(b.x0, x);
                    b.y1 = std::max(b.y1, y);
                    b.x1 = std::max(b.x1, x);
                }
            }

    Tensor3 out(1, pan.height(), pan.width());
    for (const auto& [id, b] : boxes) {
        const int bh = b.y1 - b.y0 + 1, bw = b.x1 - b.x0 + 1;
        BinaryMask window(bh, bw, false);
        for (int y = 0; y < bh; ++y)
            for (int x = 0; x < bw; ++x)
                window.set(y, x, pan.labels.at(b.y0 + y, b.x0 + x) == id);
        const Tensor3 dist = distance_transform(window);
        for (int y = 0; y < bh; ++y)
            for (int x = 0; x < bw; ++x)
                if (window.get(y, x))
                    out.at(0, b.y0 + y, b.x0 + x) =
                        static_cast<float>(ladder.lookup(dist.at(0, y, x)));
    }
    return out;
}

inline TargetSet make_targets(const PanopticMap& pan, const TargetConfig& config = {}) {
    const auto centroids = instance_centroids(pan);
    TargetSet t;
    t.semantic = LabelGrid(pan.height(), pan.width());
    for (int y = 0; y < pan.height(); ++y)
        for (int x = 0; x < pan.width(); ++x)
            t.semantic.at(y, x) =
                pan.is_void(y, x) ? kIgnoreClass : class_of(pan.labels.at(y, x));
    t.offsets = make_offsets(pan, centroids);
    t.center_heatmap =
        make_center_heatmap(centroids, pan.height(), pan.width(), config.sigma);
    t.offset_weights = make_boundary_weights(pan, config.ladder);
    return t;
}

}  // namespace pano
