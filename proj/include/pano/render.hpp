// Deterministic visualizations: panoptic maps as class-hued instance shades
// and offset fields via the optical-flow color wheel.
#pragma once

#include <cmath>
#include <cstdint>

#include "pano/panoptic.hpp"
#include "pano/pixelgrid.hpp"
#include "pano/ppm.hpp"

namespace pano {
namespace detail {

struct Rgb {
    uint8_t r, g, b;
};

inline Rgb hsv_to_rgb(double h, double s, double v) {
    h = h - 360.0 * std::floor(h / 360.0);
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) {
        r = c, g = x;
    } else if (hp < 2) {
        r = x, g = c;
    } else if (hp < 3) {
        g = c, b = x;
    } else if (hp < 4) {
        g = x, b = c;
    } else if (hp < 5) {
        r = x, b = c;
    } else {
        r = c, b = x;
    }
    const double m = v - c;
    const auto q = [&](double u) {
        return static_cast<uint8_t>(std::lround(255.0 * (u + m)));
    };
    return {q(r), q(g), q(b)};
}

// golden-angle hue walk keeps neighboring class ids far apart on the wheel
inline double class_hue(uint32_t class_id) {
    return std::fmod(class_id * 137.50776405003785, 360.0);
}

}  // namespace detail

inline RgbImage render_panoptic(const PanopticMap& pan) {
    RgbImage img(pan.height(), pan.width());
    for (int y = 0; y < pan.height(); ++y)
        for (int x = 0; x < pan.width(); ++x) {
            if (pan.is_void(y, x)) continue;  // void stays black
            const uint32_t label = pan.labels.at(y, x);
            const uint32_t cls = class_of(label);
            const double hue = detail::class_hue(cls);
            detail::Rgb c;
            if (pan.is_thing_class(cls)) {
                // cycle brightness so consecutive instances get distinct shades
                const uint32_t step = (instance_of(label) - 1) % 12;
                c = detail::hsv_to_rgb(hue, 0.9, 0.95 - 0.05 * step);
            } else {
                c = detail::hsv_to_rgb(hue, 0.5, 0.8);
            }
            img.at(y, x, 0) = c.r;
            img.at(y, x, 1) = c.g;
            img.at(y, x, 2) = c.b;
        }
    return img;
}

inline RgbImage render_offsets(const Tensor3& offsets) {
    if (offsets.channels != 2)
        throw std::invalid_argument("render_offsets: expected 2 channels");
    const int h = offsets.height, w = offsets.width;
    const double diagonal = std::sqrt(static_cast<double>(h) * h +
                                      static_cast<double>(w) * w);
    RgbImage img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double dr = offsets.at(0, y, x);
            const double dc = offsets.at(1, y, x);
            const double mag = std::sqrt(dr * dr + dc * dc);
            const double hue = std::atan2(dr, dc) * (180.0 / 3.14159265358979323846) + 180.0;
            const double sat = std::min(1.0, mag / diagonal);
            const detail::Rgb c = detail::hsv_to_rgb(hue, sat, 1.0);
            img.at(y, x, 0) = c.r;
            img.at(y, x, 1) = c.g;
            img.at(y, x, 2) = c.b;
        }
    return img;
}

}  // namespace pano
