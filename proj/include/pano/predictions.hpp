// The three dense model outputs consumed by fusion and losses.
#pragma once

#include "pano/pixelgrid.hpp"

namespace pano {

struct PredictionSet {
    Tensor3 sem_logits;      // C x H x W
    Tensor3 center_heatmap;  // 1 x H x W
    Tensor3 offsets;         // 2 x H x W, full-resolution pixel units
};

}  // namespace pano
