// Seeded synthetic scenes: a stuff background split in two, plus a handful of
// non-overlapping thing instances (rectangles, ellipses, L-shapes) with a
// minimum centroid separation.
//
// Instance indices in the ground truth follow detection order: after placing
// the shapes we splat the center heatmap, run the same NMS the fusion stage
// uses, and number each instance by the rank of its peak. A prediction built
// from oracle tensors then reproduces the ground-truth map label for label,
// which is what the end-to-end round-trip checks lean on.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pano/panofuse.hpp"
#include "pano/panoptic.hpp"
#include "pano/pixelgrid.hpp"
#include "pano/rng.hpp"
#include "pano/targetgen.hpp"

namespace pano {

struct SceneSpec {
    uint64_t seed = 1;
    int height = 64, width = 96;
    // classes 0..1 stuff, 2..4 things
    std::vector<uint8_t> class_things = {0, 0, 1, 1, 1};
    int min_instances = 3, max_instances = 8;
    double min_separation = 8.0;
    bool rects = true, ellipses = true, lshapes = true;

    void validate() const {
        if (height < 16 || width < 16)
            throw std::invalid_argument("SceneSpec: image too small");
        if (min_instances < 1 || max_instances < min_instances)
            throw std::invalid_argument("SceneSpec: bad instance count range");
        if (min_separation < 1.0)
            throw std::invalid_argument("SceneSpec: separation below one pixel");
        if (!rects && !ellipses && !lshapes)
            throw std::invalid_argument("SceneSpec: no shape family enabled");
        bool any_stuff = false, any_thing = false;
        for (uint8_t t : class_things) (t ? any_thing : any_stuff) = true;
        if (!any_stuff || !any_thing)
            throw std::invalid_argument("SceneSpec: need at least one stuff and one thing class");
    }
};

struct SynthScene {
    Tensor3 image;  // 3 channels in [0, 1]
    PanopticMap gt;
};

namespace detail {

struct Shape {
    std::vector<PointRC> pixels;
    double centroid_row = 0.0, centroid_col = 0.0;
};

inline void shape_centroid(Shape& s) {
    double ry = 0.0, rx = 0.0;
    for (const PointRC& p : s.pixels) {
        ry += p.row;
        rx += p.col;
    }
    s.centroid_row = ry / s.pixels.size();
    s.centroid_col = rx / s.pixels.size();
}

inline Shape make_rect(int cy, int cx, int hy, int hx) {
    Shape s;
    for (int y = cy - hy; y <= cy + hy; ++y)
        for (int x = cx - hx; x <= cx + hx; ++x) s.pixels.push_back({static_cast<double>(y), static_cast<double>(x)});
    shape_centroid(s);
    return s;
}

inline Shape make_ellipse(int cy, int cx, double a, double b) {
    Shape s;
    const int ry = static_cast<int>(std::ceil(a)), rx = static_cast<int>(std::ceil(b));
    for (int y = cy - ry; y <= cy + ry; ++y)
        for (int x = cx - rx; x <= cx + rx; ++x) {
            const double u = (y - cy) / a, v = (x - cx) / b;
            if (u * u + v * v <= 1.0) s.pixels.push_back({static_cast<double>(y), static_cast<double>(x)});
        }
    shape_centroid(s);
    return s;
}

// full rectangle minus its top-right quadrant, leaving both arms >= 3 wide
inline Shape make_lshape(int cy, int cx, int hy, int hx, int cut_y, int cut_x) {
    Shape s;
    for (int y = cy - hy; y <= cy + hy; ++y)
        for (int x = cx - hx; x <= cx + hx; ++x) {
            if (y < cy - hy + cut_y && x > cx + hx - cut_x) continue;
            s.pixels.push_back({static_cast<double>(y), static_cast<double>(x)});
        }
    shape_centroid(s);
    return s;
}

}  // namespace detail

inline SynthScene synth_scene(const SceneSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int h = spec.height, w = spec.width;

    std::vector<uint32_t> stuff_classes, thing_classes;
    for (uint32_t c = 0; c < spec.class_things.size(); ++c)
        (spec.class_things[c] ? thing_classes : stuff_classes).push_back(c);

    SynthScene out;
    out.gt.class_things = spec.class_things;

    // stuff background: one seeded straight split between two stuff regions
    const bool split_rows = rng.uniform() < 0.5;
    const int extent = split_rows ? h : w;
    const int boundary =
        static_cast<int>(rng.uniform_int(extent / 4, extent - extent / 4));
    const size_t stuff_slot_a = rng.uniform_int(0, stuff_classes.size() - 1);
    size_t stuff_slot_b = rng.uniform_int(0, stuff_classes.size() - 1);
    if (stuff_slot_b == stuff_slot_a && stuff_classes.size() > 1)
        stuff_slot_b = (stuff_slot_a + 1) % stuff_classes.size();
    const uint32_t stuff_a = stuff_classes[stuff_slot_a];
    const uint32_t stuff_b = stuff_classes[stuff_slot_b];
    out.gt.labels = LabelGrid(h, w, encode_label(stuff_a, 0));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if ((split_rows ? y : x) >= boundary)
                out.gt.labels.at(y, x) = encode_label(stuff_b, 0);

    std::vector<int> families;
    if (spec.rects) families.push_back(0);
    if (spec.ellipses) families.push_back(1);
    if (spec.lshapes) families.push_back(2);

    const int count =
        static_cast<int>(rng.uniform_int(spec.min_instances, spec.max_instances));
    const int max_half = std::max(2, std::min(h, w) / 8);

    BinaryMask occupied(h, w, false);
    std::vector<detail::Shape> shapes;
    std::vector<uint32_t> shape_class;
    constexpr int kTriesPerInstance = 500;
    for (int i = 0; i < count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kTriesPerInstance && !placed; ++attempt) {
            const int family = families[rng.uniform_int(0, families.size() - 1)];
            const int hy = static_cast<int>(rng.uniform_int(1, max_half));
            const int hx = static_cast<int>(rng.uniform_int(1, max_half));
            const int cy = static_cast<int>(rng.uniform_int(hy + 1, h - 2 - hy));
            const int cx = static_cast<int>(rng.uniform_int(hx + 1, w - 2 - hx));
            detail::Shape s;
            if (family == 0) {
                s = detail::make_rect(cy, cx, hy, hx);
            } else if (family == 1) {
                s = detail::make_ellipse(cy, cx, hy + 0.5, hx + 0.5);
            } else {
                if (hy < 2 || hx < 2) continue;  // arms need room
                const int cut_y = static_cast<int>(rng.uniform_int(1, 2 * hy - 2));
                const int cut_x = static_cast<int>(rng.uniform_int(1, 2 * hx - 2));
                s = detail::make_lshape(cy, cx, hy, hx, cut_y, cut_x);
            }

            bool ok = s.pixels.size() >= 9;
            for (const detail::Shape& prev : shapes) {
                const double dy = s.centroid_row - prev.centroid_row;
                const double dx = s.centroid_col - prev.centroid_col;
                if (dy * dy + dx * dx < spec.min_separation * spec.min_separation)
                    ok = false;
            }
            if (ok)
                for (const PointRC& p : s.pixels)
                    if (occupied.get(p.row, p.col)) {
                        ok = false;
                        break;
                    }
            if (!ok) continue;

            for (const PointRC& p : s.pixels) occupied.set(p.row, p.col, true);
            shapes.push_back(std::move(s));
            shape_class.push_back(thing_classes[rng.uniform_int(0, thing_classes.size() - 1)]);
            placed = true;
        }
        if (!placed)
            throw std::runtime_error("synth_scene: spec unsatisfiable after bounded retries");
    }

    // paint with provisional indices, then renumber by detection rank
    for (size_t i = 0; i < shapes.size(); ++i)
        for (const PointRC& p : shapes[i].pixels)
            out.gt.labels.at(p.row, p.col) = encode_label(shape_class[i], i + 1);

    const Tensor3 heat =
        make_center_heatmap(instance_centroids(out.gt), h, w, TargetConfig{}.sigma);
    const std::vector<DetectedCenter> peaks = nms_centers(heat, FuseConfig{});
    if (peaks.size() != shapes.size())
        throw std::runtime_error("synth_scene: peak count disagrees with instance count");
    std::vector<uint32_t> relabel(shapes.size() + 1, 0);
    for (const DetectedCenter& peak : peaks) {
        size_t best = shapes.size();
        double best_d2 = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < shapes.size(); ++i) {
            const double dy = peak.row - shapes[i].centroid_row;
            const double dx = peak.col - shapes[i].centroid_col;
            if (dy * dy + dx * dx < best_d2) {
                best_d2 = dy * dy + dx * dx;
                best = i;
            }
        }
        relabel[best + 1] = static_cast<uint32_t>(peak.index);
    }
    for (size_t i = 0; i < shapes.size(); ++i)
        if (relabel[i + 1] == 0)
            throw std::runtime_error("synth_scene: instance lost its heatmap peak");
    for (size_t i = 0; i < shapes.size(); ++i)
        for (const PointRC& p : shapes[i].pixels)
            out.gt.labels.at(p.row, p.col) =
                encode_label(shape_class[i], relabel[i + 1]);
    validate(out.gt);

    // flat seeded color per region plus per-pixel noise
    std::vector<float> base((shapes.size() + 2) * 3);
    for (float& v : base) v = static_cast<float>(rng.uniform(0.15, 0.85));
    out.image = Tensor3(3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const uint32_t label = out.gt.labels.at(y, x);
            size_t region;
            if (instance_of(label) == 0) {
                region = class_of(label) == stuff_a ? 0 : 1;
            } else {
                // recover the shape slot from the relabel table
                region = 2;
                for (size_t i = 0; i < shapes.size(); ++i)
                    if (relabel[i + 1] == instance_of(label) &&
                        shape_class[i] == class_of(label))
                        region = 2 + i;
            }
            for (int c = 0; c < 3; ++c) {
                const double v =
                    base[region * 3 + c] + rng.uniform(-0.05, 0.05);
                out.image.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    return out;
}

}  // namespace pano
