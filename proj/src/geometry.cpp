// SPDX-License-Identifier: Apache-2.0
#include "ranet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

namespace ranet {

double distance(Point2 a, Point2 b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

std::string_view to_string(Visibility v)
{
    switch (v) {
    case Visibility::visible:
        return "visible";
    case Visibility::occluded:
        return "occluded";
    case Visibility::outer:
        return "outer";
    }
    return "outer";
}

Visibility visibility_from_string(std::string_view name)
{
    if (name == "visible") {
        return Visibility::visible;
    }
    if (name == "occluded") {
        return Visibility::occluded;
    }
    if (name == "outer") {
        return Visibility::outer;
    }
    throw std::invalid_argument("unknown visibility '" + std::string(name) + "'");
}

std::vector<int> SkeletonSpec::flip_permutation() const
{
    std::vector<int> perm(joint_names.size());
    for (std::size_t j = 0; j < perm.size(); ++j) {
        perm[j] = static_cast<int>(j);
    }
    for (auto [a, b] : flip_pairs) {
        perm[a] = b;
        perm[b] = a;
    }
    return perm;
}

int SkeletonSpec::index_of(std::string_view joint_name) const
{
    for (std::size_t j = 0; j < joint_names.size(); ++j) {
        if (joint_names[j] == joint_name) {
            return static_cast<int>(j);
        }
    }
    return -1;
}

void SkeletonSpec::validate() const
{
    const int count = joint_count();
    if (count == 0) {
        throw std::invalid_argument("skeleton '" + name + "' has no joints");
    }
    std::set<std::string> names(joint_names.begin(), joint_names.end());
    if (static_cast<int>(names.size()) != count) {
        throw std::invalid_argument("skeleton '" + name + "' has duplicate joint names");
    }
    std::set<int> seen;
    for (auto [a, b] : flip_pairs) {
        if (a < 0 || b < 0 || a >= count || b >= count || a == b) {
            throw std::invalid_argument("skeleton '" + name + "' has an invalid flip pair");
        }
        if (!seen.insert(a).second || !seen.insert(b).second) {
            throw std::invalid_argument("skeleton '" + name + "' lists a joint in two flip pairs");
        }
    }
}

std::shared_ptr<const SkeletonSpec> SkeletonSpec::mpii()
{
    static const auto spec = [] {
        auto s = std::make_shared<SkeletonSpec>();
        s->name = "mpii";
        s->joint_names = {"r_ankle", "r_knee",  "r_hip",      "l_hip",    "l_knee",  "l_ankle",
                          "pelvis",  "thorax",  "upper_neck", "head_top", "r_wrist", "r_elbow",
                          "r_shoulder", "l_shoulder", "l_elbow", "l_wrist"};
        s->flip_pairs = {{0, 5}, {1, 4}, {2, 3}, {10, 15}, {11, 14}, {12, 13}};
        s->head_bbox_available = true;
        s->validate();
        return std::shared_ptr<const SkeletonSpec>(std::move(s));
    }();
    return spec;
}

std::shared_ptr<const SkeletonSpec> SkeletonSpec::lsp()
{
    static const auto spec = [] {
        auto s = std::make_shared<SkeletonSpec>();
        s->name = "lsp";
        s->joint_names = {"r_ankle", "r_knee",     "r_hip",      "l_hip",   "l_knee",  "l_ankle", "r_wrist",
                          "r_elbow", "r_shoulder", "l_shoulder", "l_elbow", "l_wrist", "neck",    "head_top"};
        s->flip_pairs = {{0, 5}, {1, 4}, {2, 3}, {6, 11}, {7, 10}, {8, 9}};
        s->head_bbox_available = false;
        s->validate();
        return std::shared_ptr<const SkeletonSpec>(std::move(s));
    }();
    return spec;
}

std::shared_ptr<const SkeletonSpec> SkeletonSpec::by_name(std::string_view name)
{
    if (name == "mpii") {
        return mpii();
    }
    if (name == "lsp") {
        return lsp();
    }
    throw std::invalid_argument("unknown skeleton '" + std::string(name) + "'");
}

Pose::Pose(std::shared_ptr<const SkeletonSpec> skeleton, std::vector<Keypoint> keypoints)
    : skeleton_(std::move(skeleton)), keypoints_(std::move(keypoints))
{
    if (!skeleton_) {
        throw std::invalid_argument("pose requires a skeleton");
    }
    if (static_cast<int>(keypoints_.size()) != skeleton_->joint_count()) {
        throw std::invalid_argument("pose has " + std::to_string(keypoints_.size()) + " joints, skeleton '" +
                                    skeleton_->name + "' expects " + std::to_string(skeleton_->joint_count()));
    }
}

Pose::Pose(std::shared_ptr<const SkeletonSpec> skeleton)
    : Pose(skeleton, std::vector<Keypoint>(skeleton ? skeleton->joint_count() : 0))
{
}

namespace {

constexpr double deg_to_rad = std::numbers::pi / 180.0;

} // namespace

Point2 CropTransform::forward(Point2 p) const
{
    const double theta = rotation * deg_to_rad;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const Point2 d = p - source_center();
    Point2 out{zoom * (c * d.x + s * d.y) + output_center.x, zoom * (-s * d.x + c * d.y) + output_center.y};
    if (flipped) {
        out.x = output_width - 1 - out.x;
    }
    return out;
}

Point2 CropTransform::inverse(Point2 p) const
{
    if (flipped) {
        p.x = output_width - 1 - p.x;
    }
    const double theta = rotation * deg_to_rad;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const Point2 d{(p.x - output_center.x) / zoom, (p.y - output_center.y) / zoom};
    const Point2 center = source_center();
    return {c * d.x - s * d.y + center.x, s * d.x + c * d.y + center.y};
}

Image warp_image(const Image& image, const CropTransform& transform)
{
    Image out(transform.output_width, transform.output_height, image.channels());
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            const Point2 src = transform.inverse({static_cast<double>(x), static_cast<double>(y)});
            for (int c = 0; c < image.channels(); ++c) {
                out.at(x, y, c) = sample_bilinear(image, src.x, src.y, c);
            }
        }
    }
    return out;
}

CropResult crop_by_center_scale(const Image& image, Point2 center, double scale, double rotation, int out_size,
                                bool flip)
{
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw std::invalid_argument("crop_by_center_scale: scale must be positive");
    }
    if (out_size <= 0) {
        throw std::invalid_argument("crop_by_center_scale: out_size must be positive");
    }
    const double half = 0.5 * out_size * scale;
    CropTransform t;
    t.source_box = {center.x - half, center.y - half, center.x + half, center.y + half};
    t.output_width = out_size;
    t.output_height = out_size;
    t.zoom = 1.0 / scale;
    t.rotation = rotation;
    t.flipped = flip;
    t.output_center = {0.5 * out_size, 0.5 * out_size};
    return {warp_image(image, t), t};
}

BoundingBox content_region(const CropTransform& transform)
{
    const double half_w = 0.5 * transform.source_box.width() * transform.zoom;
    const double half_h = 0.5 * transform.source_box.height() * transform.zoom;
    return {transform.output_center.x - half_w, transform.output_center.y - half_h,
            transform.output_center.x + half_w, transform.output_center.y + half_h};
}

CropResult crop_by_bbox_aspect(const Image& image, const BoundingBox& box, int long_side, bool flip)
{
    if (long_side <= 0) {
        throw std::invalid_argument("crop_by_bbox_aspect: long_side must be positive");
    }
    if (!(box.width() > 0.0) || !(box.height() > 0.0) || !std::isfinite(box.area())) {
        throw std::invalid_argument("crop_by_bbox_aspect: degenerate bounding box");
    }
    CropTransform t;
    t.source_box = box;
    t.output_width = long_side;
    t.output_height = long_side;
    t.zoom = long_side / std::max(box.width(), box.height());
    t.flipped = flip;
    t.output_center = {0.5 * long_side, 0.5 * long_side};

    // Half-open content window in unflipped output coordinates; the tolerance absorbs the
    // rounding of zoom * extent so that e.g. 100 px at zoom 1.28 covers exactly 128 columns.
    constexpr double tol = 1e-6;
    const BoundingBox content = content_region(t);
    Image out(long_side, long_side, image.channels());
    for (int y = 0; y < long_side; ++y) {
        if (y < content.y_min - tol || y >= content.y_max - tol) {
            continue;
        }
        for (int x = 0; x < long_side; ++x) {
            const int ux = flip ? long_side - 1 - x : x;
            if (ux < content.x_min - tol || ux >= content.x_max - tol) {
                continue;
            }
            const Point2 src = t.inverse({static_cast<double>(x), static_cast<double>(y)});
            for (int c = 0; c < image.channels(); ++c) {
                out.at(x, y, c) = sample_bilinear(image, src.x, src.y, c);
            }
        }
    }
    return {std::move(out), t};
}

BoundingBox points_to_bbox(std::span<const Point2> points, double margin_fraction, std::optional<ImageBounds> bounds)
{
    if (points.empty()) {
        throw std::domain_error("bounding box of an empty point set");
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    BoundingBox box{inf, inf, -inf, -inf};
    for (const Point2& p : points) {
        box.x_min = std::min(box.x_min, p.x);
        box.y_min = std::min(box.y_min, p.y);
        box.x_max = std::max(box.x_max, p.x);
        box.y_max = std::max(box.y_max, p.y);
    }
    const double dx = margin_fraction * box.width();
    const double dy = margin_fraction * box.height();
    box.x_min -= dx;
    box.x_max += dx;
    box.y_min -= dy;
    box.y_max += dy;
    if (bounds) {
        box.x_min = std::clamp(box.x_min, 0.0, static_cast<double>(bounds->width - 1));
        box.x_max = std::clamp(box.x_max, 0.0, static_cast<double>(bounds->width - 1));
        box.y_min = std::clamp(box.y_min, 0.0, static_cast<double>(bounds->height - 1));
        box.y_max = std::clamp(box.y_max, 0.0, static_cast<double>(bounds->height - 1));
    }
    return box;
}

BoundingBox pose_to_bbox(const Pose& pose, double margin_fraction, std::optional<ImageBounds> bounds)
{
    std::vector<Point2> points;
    for (const auto& k : pose.keypoints()) {
        if (k.visibility != Visibility::outer && std::isfinite(k.x) && std::isfinite(k.y)) {
            points.push_back(k.position());
        }
    }
    if (points.empty()) {
        throw std::domain_error("pose_to_bbox: no valid joints");
    }
    return points_to_bbox(points, margin_fraction, bounds);
}

Pose map_pose(const Pose& pose, const CropTransform& transform, MapDirection direction, bool remark_outside)
{
    std::vector<Keypoint> mapped(pose.keypoints());
    for (auto& k : mapped) {
        const Point2 p = direction == MapDirection::forward ? transform.forward(k.position())
                                                            : transform.inverse(k.position());
        k.x = p.x;
        k.y = p.y;
        if (remark_outside && direction == MapDirection::forward && k.visibility != Visibility::outer) {
            const bool inside = p.x >= -0.5 && p.y >= -0.5 && p.x < transform.output_width - 0.5 &&
                                p.y < transform.output_height - 0.5;
            if (!inside) {
                k.visibility = Visibility::outer;
            }
        }
    }
    if (transform.flipped) {
        const auto perm = pose.skeleton().flip_permutation();
        std::vector<Keypoint> swapped(mapped.size());
        for (std::size_t j = 0; j < mapped.size(); ++j) {
            swapped[j] = mapped[perm[j]];
        }
        mapped = std::move(swapped);
    }
    return Pose(pose.skeleton_ptr(), std::move(mapped));
}

} // namespace ranet
