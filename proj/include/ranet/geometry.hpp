// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ranet/image.hpp"

namespace ranet {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
    friend bool operator==(const Point2&, const Point2&) = default;
};

double distance(Point2 a, Point2 b);

enum class Visibility { visible, occluded, outer };

std::string_view to_string(Visibility v);
Visibility visibility_from_string(std::string_view name);

/// Joint layout of a dataset: names, left/right pairs and whether head boxes exist.
struct SkeletonSpec {
    std::string name;
    std::vector<std::string> joint_names;
    std::vector<std::pair<int, int>> flip_pairs;
    bool head_bbox_available = false;

    int joint_count() const noexcept { return static_cast<int>(joint_names.size()); }

    /// Index permutation applied to joint channels under a horizontal flip.
    std::vector<int> flip_permutation() const;
    int index_of(std::string_view joint_name) const;

    /// Throws std::invalid_argument when indices are out of range or duplicated.
    void validate() const;

    static std::shared_ptr<const SkeletonSpec> mpii();
    static std::shared_ptr<const SkeletonSpec> lsp();
    static std::shared_ptr<const SkeletonSpec> by_name(std::string_view name);
};

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    Visibility visibility = Visibility::visible;
    std::optional<double> confidence;

    Point2 position() const { return {x, y}; }
    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

class Pose {
public:
    Pose() = default;
    Pose(std::shared_ptr<const SkeletonSpec> skeleton, std::vector<Keypoint> keypoints);
    explicit Pose(std::shared_ptr<const SkeletonSpec> skeleton);

    const SkeletonSpec& skeleton() const { return *skeleton_; }
    const std::shared_ptr<const SkeletonSpec>& skeleton_ptr() const { return skeleton_; }
    int size() const noexcept { return static_cast<int>(keypoints_.size()); }

    Keypoint& operator[](int j) { return keypoints_[j]; }
    const Keypoint& operator[](int j) const { return keypoints_[j]; }
    const std::vector<Keypoint>& keypoints() const { return keypoints_; }

    /// Same skeleton name and identical keypoints.
    friend bool operator==(const Pose& a, const Pose& b)
    {
        const bool same_skeleton = a.skeleton_ == b.skeleton_ || (a.skeleton_ && b.skeleton_ && a.skeleton_->name == b.skeleton_->name);
        return same_skeleton && a.keypoints_ == b.keypoints_;
    }

private:
    std::shared_ptr<const SkeletonSpec> skeleton_;
    std::vector<Keypoint> keypoints_;
};

struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    Point2 center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
    bool contains(Point2 p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
    bool contains(const BoundingBox& other) const
    {
        return other.x_min >= x_min && other.y_min >= y_min && other.x_max <= x_max && other.y_max <= y_max;
    }
};

/// Similarity warp between a source image and a crop.
///
///   out = zoom * R(rotation) * (p - source_center) + output_center
///   if flipped: out.x = output_width - 1 - out.x
///
/// `zoom` is output pixels per source pixel. Pixel centres are on integer coordinates.
struct CropTransform {
    BoundingBox source_box;
    int output_width = 0;
    int output_height = 0;
    double zoom = 1.0;
    double rotation = 0.0; // degrees
    bool flipped = false;
    Point2 output_center;

    Point2 source_center() const { return source_box.center(); }
    Point2 forward(Point2 p) const;
    Point2 inverse(Point2 p) const;
    /// Source-pixel spacing per output pixel, i.e. 1 / zoom.
    double scale() const { return 1.0 / zoom; }
};

struct CropResult {
    Image image;
    CropTransform transform;
};

/// Square crop of side `out_size` around `center`; `scale` is source pixels per output pixel.
CropResult crop_by_center_scale(const Image& image, Point2 center, double scale, double rotation, int out_size,
                                bool flip = false);

/// Aspect-preserving crop of `box`: the longer side maps to `long_side` and the short side is
/// zero-padded symmetrically to a square output.
CropResult crop_by_bbox_aspect(const Image& image, const BoundingBox& box, int long_side, bool flip = false);

/// Output-space rectangle covered by the box content of an aspect-preserving crop.
BoundingBox content_region(const CropTransform& transform);

/// Warp the whole image through `transform` (used for dataset-level augmentation).
Image warp_image(const Image& image, const CropTransform& transform);

struct ImageBounds {
    int width = 0;
    int height = 0;
};

/// Tight box over `points` expanded by `margin_fraction` of its extent on each side, optionally
/// clamped to the image. Throws std::domain_error when `points` is empty.
BoundingBox points_to_bbox(std::span<const Point2> points, double margin_fraction,
                           std::optional<ImageBounds> bounds = std::nullopt);

/// Tight box over non-outer joints expanded by `margin_fraction` of its extent on each side.
BoundingBox pose_to_bbox(const Pose& pose, double margin_fraction, std::optional<ImageBounds> bounds = std::nullopt);

enum class MapDirection { forward, inverse };

/// Map joint coordinates through `transform`. Flipped transforms also swap left/right channels.
/// With `remark_outside` and the forward direction, joints landing outside the output are marked outer.
Pose map_pose(const Pose& pose, const CropTransform& transform, MapDirection direction, bool remark_outside = false);

} // namespace ranet
