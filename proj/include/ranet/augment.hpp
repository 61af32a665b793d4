// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ranet/geometry.hpp"
#include "ranet/image.hpp"

namespace ranet {

/// Human-parsing classes used in label maps; the numeric values are the pixel labels.
enum class PartLabel : std::uint8_t { background = 0, head, torso, upper_arm, lower_arm, thigh, shank };

inline constexpr int part_label_count = 7;

std::string_view to_string(PartLabel label);
PartLabel part_label_from_string(std::string_view name);
/// Label-map sidecar: {"0": "background", "1": "head", ...}.
std::map<int, std::string> default_label_map();

/// Segmented RGBA patch. Alpha is 0 or 1 (stored as 0/255 on disk).
struct Patch {
    Image pixels; // 4 channels
    PartLabel label = PartLabel::background;
    Point2 anchor_offset;
    std::string source_id;
    double reference_length = 0.0; // source person's pose-box diagonal, 0 if unknown

    int opaque_count() const;
    void validate() const;
};

class PatchPool {
public:
    std::uint64_t rng_seed = 0;

    void add(Patch patch);
    std::size_t size() const noexcept { return patches_.size(); }
    bool empty() const noexcept { return patches_.empty(); }
    const std::vector<Patch>& patches() const noexcept { return patches_; }
    const Patch& operator[](std::size_t i) const { return patches_.at(i); }
    /// Indices of the patches carrying `label`.
    const std::vector<std::size_t>& indices(PartLabel label) const;
    std::vector<const Patch*> by_label(PartLabel label) const;
    std::size_t body_part_count() const;

    /// Directory of RGBA PNGs plus manifest.json (label, anchor_offset, source_id).
    void save(const std::filesystem::path& dir) const;
    static PatchPool load(const std::filesystem::path& dir);

private:
    std::vector<Patch> patches_;
    std::array<std::vector<std::size_t>, part_label_count> by_label_;
};

struct PoolBuildConfig {
    int min_area = 20;
    double max_aspect = 8.0;
    double min_solidity = 0.3;
    int background_per_image = 1;
    double background_side_fraction = 0.25; // of the person reference length
    std::uint64_t seed = 0;
};

struct PoolSource {
    const Image* image = nullptr;
    const LabelMap* parsing = nullptr;
    Pose pose;
    std::string id;
};

/// 4-connected regions of equal non-zero label, each as a list of pixel indices (row-major).
struct Region {
    std::uint8_t label = 0;
    std::vector<int> pixels;
};
std::vector<Region> connected_regions(const LabelMap& labels);
/// Region area divided by the area of the convex hull of its pixel squares.
double solidity(const Region& region, int width);

PatchPool build_pool(std::span<const PoolSource> sources, const PoolBuildConfig& cfg = {});

struct MountingPolicy {
    double image_probability = 0.5;
    int min_patches = 1;
    int max_patches_per_image = 3;
    double on_joint_ratio = 0.5;
    double jitter_radius = 3.0;     // pixels, "on" placements
    double near_inner = 0.5;        // annulus radii in patch diagonals, "near" placements
    double near_outer = 1.5;
    bool relabel_occluded = false;
    /// affinity[label][joint]; each row sums to 1.
    std::vector<std::vector<double>> affinity;

    /// 0.6 on articulating joints, 0.3 on the other limb joints, 0.1 uniform; background uniform.
    static MountingPolicy defaults(const SkeletonSpec& skeleton);
    void validate(int joint_count) const;
};

/// Joints a part articulates (e.g. shank -> knees and ankles), by name.
std::vector<int> articulating_joints(PartLabel label, const SkeletonSpec& skeleton);
std::vector<int> limb_joints(const SkeletonSpec& skeleton);

int sample_target_joint(PartLabel label, const MountingPolicy& policy, std::mt19937_64& rng);

struct PdaPlacement {
    std::size_t patch_index = 0;
    PartLabel label = PartLabel::background;
    int target_joint = 0;
    bool on_joint = true;
    Point2 anchor_position;
    LabelMap mask; // image-sized, 1 where patch pixels were composited
};

struct PdaRecord {
    std::vector<PdaPlacement> placements;
    std::optional<Pose> relabeled_pose; // only with MountingPolicy::relabel_occluded

    /// Union of the placement masks (empty map when nothing was mounted).
    LabelMap support(int width, int height) const;
};

struct PdaResult {
    Image image;
    PdaRecord record;
};

/// Alpha-composite 0..max patches near semantically related joints. The pose is never changed.
PdaResult apply_pda(const Image& image, const Pose& pose, const PatchPool& pool, const MountingPolicy& policy,
                    std::mt19937_64& rng);

struct AugmentConfig {
    std::array<double, 2> scale_range{0.75, 1.25};
    std::array<double, 2> rotation_range{-60.0, 60.0};
    double hflip_prob = 0.5;
    double color_jitter = 0.2; // per-channel gain amplitude
    bool pda_enabled = true;

    /// No geometric or photometric change.
    static AugmentConfig identity();
    void validate() const;
};

struct StandardDraw {
    double scale = 1.0;
    double rotation = 0.0;
    bool flip = false;
    std::array<float, 3> gains{1.0f, 1.0f, 1.0f};
};

StandardDraw draw_standard(const AugmentConfig& cfg, std::mt19937_64& rng);

struct StandardResult {
    Image image;
    Pose pose;
    CropTransform transform; // original -> augmented image coordinates
};

/// Scale/rotate/flip the whole image about `center` (fixed point of the warp) and apply colour
/// gains. The pose is mapped with map_pose, so a flip also swaps left/right joints.
StandardResult apply_draw(const Image& image, const Pose& pose, Point2 center, const StandardDraw& draw);
StandardResult apply_standard(const Image& image, const Pose& pose, Point2 center, const AugmentConfig& cfg,
                              std::mt19937_64& rng);
/// Uses the centre of the pose box as the warp centre.
StandardResult apply_standard(const Image& image, const Pose& pose, const AugmentConfig& cfg, std::mt19937_64& rng);

/// Diagonal of the tight box over non-outer joints; 0 when no joint is usable.
double pose_reference_length(const Pose& pose);

} // namespace ranet
