// Panoptic label encoding shared by target generation, fusion and metrics.
//
// A pixel label packs class and instance as class_id*1000 + instance_index.
// Stuff pixels carry instance 0, thing pixels 1 and up, and class 255 is the
// void sentinel (255000).
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pano/pixelgrid.hpp"

namespace pano {

constexpr uint32_t kLabelDivisor = 1000;
constexpr uint32_t kVoidClass = 255;
constexpr uint32_t kVoidLabel = kVoidClass * kLabelDivisor;

inline uint32_t class_of(uint32_t label) { return label / kLabelDivisor; }
inline uint32_t instance_of(uint32_t label) { return label % kLabelDivisor; }
inline uint32_t encode_label(uint32_t class_id, uint32_t instance_index) {
    return class_id * kLabelDivisor + instance_index;
}

struct PanopticMap {
    LabelGrid labels;
    // indexed by class_id, nonzero means "thing" (instance-forming)
    std::vector<uint8_t> class_things;

    int height() const { return labels.height; }
    int width() const { return labels.width; }

    bool is_thing_class(uint32_t class_id) const {
        return class_id < class_things.size() && class_things[class_id] != 0;
    }
    bool is_void(int y, int x) const { return labels.at(y, x) == kVoidLabel; }
    bool is_thing(int y, int x) const {
        return !is_void(y, x) && is_thing_class(class_of(labels.at(y, x)));
    }
};

// Enforces the encoding contract: stuff pixels carry instance 0, thing pixels
// a nonzero instance, and every non-void class is covered by the class table.
inline void validate(const PanopticMap& pan) {
    for (size_t i = 0; i < pan.labels.size(); ++i) {
        const uint32_t label = pan.labels.data[i];
        if (label == kVoidLabel) continue;
        const uint32_t cid = class_of(label);
        const uint32_t inst = instance_of(label);
        if (cid >= kVoidClass)
            throw std::invalid_argument("PanopticMap: class id out of range");
        if (cid >= pan.class_things.size())
            throw std::invalid_argument("PanopticMap: class missing from class table");
        if (pan.class_things[cid] ? inst < 1 : inst != 0)
            throw std::invalid_argument("PanopticMap: instance index violates thing/stuff rule");
    }
}

}  // namespace pano
