// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "ranet/geometry.hpp"
#include "ranet/image.hpp"

namespace ranet {

struct SyntheticConfig {
    int count = 50;
    std::uint64_t seed = 7;
    int image_size = 96;
    /// Paste distractor limb segments near joints (confusing textures); labels are unchanged.
    bool occluders = false;
    int min_occluders = 1;
    int max_occluders = 3;
};

/// One procedurally drawn person: coloured capsule limbs on a textured background, with exact
/// MPII-layout joints, parsing labels (PartLabel values) and a head box.
struct SyntheticSample {
    std::string id;
    Image image;
    LabelMap parsing;
    Pose pose;
    BoundingBox head_bbox;
    Point2 center;
    double scale = 1.0; // person box side / 200
};

/// Deterministic in (cfg.seed, index).
SyntheticSample generate_synthetic(const SyntheticConfig& cfg, int index);

} // namespace ranet
