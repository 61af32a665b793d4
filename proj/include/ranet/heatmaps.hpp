// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "ranet/geometry.hpp"

namespace ranet {

struct Resolution {
    int width = 0;
    int height = 0;
    friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// Response grid for one joint, row-major.
class Heatmap {
public:
    Heatmap() = default;
    Heatmap(Resolution resolution, int joint_index, float fill = 0.0f);

    Resolution resolution() const noexcept { return resolution_; }
    int width() const noexcept { return resolution_.width; }
    int height() const noexcept { return resolution_.height; }
    int joint_index() const noexcept { return joint_index_; }

    float& at(int x, int y) { return values_[static_cast<std::size_t>(y) * resolution_.width + x]; }
    float at(int x, int y) const { return values_[static_cast<std::size_t>(y) * resolution_.width + x]; }
    std::span<float> values() noexcept { return values_; }
    std::span<const float> values() const noexcept { return values_; }

    friend bool operator==(const Heatmap&, const Heatmap&) = default;

private:
    Resolution resolution_;
    int joint_index_ = 0;
    std::vector<float> values_;
};

enum class StageTag { lower, higher };

struct HeatmapStack {
    std::vector<Heatmap> maps;
    StageTag stage = StageTag::lower;

    int joint_count() const noexcept { return static_cast<int>(maps.size()); }
    Resolution resolution() const { return maps.empty() ? Resolution{} : maps.front().resolution(); }
    /// Throws std::invalid_argument unless all grids share one resolution.
    void validate() const;
};

/// Standard deviation (heatmap pixels) of the supervision target for a visibility class.
double target_sigma(Visibility visibility);

/// Gaussian target for a joint given in heatmap coordinates: sigma 1 for visible joints,
/// sigma 2 for occluded joints and an all-zero grid for outer joints.
Heatmap make_target(const Keypoint& joint, Resolution resolution, int joint_index = 0);
HeatmapStack make_target_stack(const Pose& pose_in_heatmap, Resolution resolution, StageTag stage = StageTag::lower);

struct DecodedJoint {
    Point2 position;
    double confidence = 0.0;
};

/// Quarter-offset decode: 3/4 of the way to the maximum plus 1/4 toward the second-largest
/// response; confidence is the peak value. Ties resolve to the smallest row-major index.
DecodedJoint decode(const Heatmap& heatmap);

/// Mean squared difference over all joints and pixels.
double loss(const HeatmapStack& prediction, const HeatmapStack& target);

/// Per-pixel weighted sum of stacks.
HeatmapStack fuse_heatmaps(std::span<const HeatmapStack> stacks, std::span<const double> weights);
/// Uniform weights 1/n.
HeatmapStack fuse_heatmaps(std::span<const HeatmapStack> stacks);

struct VisibilityThresholds {
    double visible = 0.5;
    double occluded = 0.15;
};

Visibility infer_visibility(double confidence, VisibilityThresholds thresholds = {});

/// Mapping between a network input frame and its heatmap grid (stride = input / heatmap side),
/// aligned on pixel centres.
struct HeatmapFrame {
    int input_side = 256;
    int heatmap_side = 64;

    double stride() const { return static_cast<double>(input_side) / heatmap_side; }
    Point2 to_input(Point2 heatmap_point) const;
    Point2 to_heatmap(Point2 input_point) const;
    Pose to_heatmap(const Pose& input_pose) const;
};

/// Write a stack to the tensor container as one [J, H, W] float32 tensor.
void save_heatmaps(const HeatmapStack& stack, const std::string& name, const std::filesystem::path& path);
HeatmapStack load_heatmaps(const std::filesystem::path& path, const std::string& name);
void export_heatmap_csv(const Heatmap& heatmap, const std::filesystem::path& path);

} // namespace ranet
