// SPDX-License-Identifier: Apache-2.0
#include "ranet/heatmaps.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "ranet/tensor_file.hpp"

namespace ranet {

Heatmap::Heatmap(Resolution resolution, int joint_index, float fill)
    : resolution_(resolution), joint_index_(joint_index)
{
    if (resolution.width <= 0 || resolution.height <= 0) {
        throw std::invalid_argument("heatmap resolution must be positive");
    }
    values_.assign(static_cast<std::size_t>(resolution.width) * resolution.height, fill);
}

void HeatmapStack::validate() const
{
    for (const auto& m : maps) {
        if (m.resolution() != resolution()) {
            throw std::invalid_argument("heatmap stack mixes resolutions");
        }
    }
}

double target_sigma(Visibility visibility)
{
    switch (visibility) {
    case Visibility::visible:
        return 1.0;
    case Visibility::occluded:
        return 2.0;
    case Visibility::outer:
        return 0.0;
    }
    return 0.0;
}

Heatmap make_target(const Keypoint& joint, Resolution resolution, int joint_index)
{
    Heatmap hm(resolution, joint_index);
    if (joint.visibility == Visibility::outer || !std::isfinite(joint.x) || !std::isfinite(joint.y)) {
        return hm;
    }
    const double sigma = target_sigma(joint.visibility);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = 0; y < resolution.height; ++y) {
        const double dy = y - joint.y;
        for (int x = 0; x < resolution.width; ++x) {
            const double dx = x - joint.x;
            hm.at(x, y) = static_cast<float>(std::exp(-(dx * dx + dy * dy) * inv));
        }
    }
    return hm;
}

HeatmapStack make_target_stack(const Pose& pose_in_heatmap, Resolution resolution, StageTag stage)
{
    HeatmapStack stack;
    stack.stage = stage;
    stack.maps.reserve(pose_in_heatmap.size());
    for (int j = 0; j < pose_in_heatmap.size(); ++j) {
        stack.maps.push_back(make_target(pose_in_heatmap[j], resolution, j));
    }
    return stack;
}

DecodedJoint decode(const Heatmap& heatmap)
{
    const auto values = heatmap.values();
    if (values.empty()) {
        throw std::invalid_argument("decode: empty heatmap");
    }
    std::size_t peak = 0;
    float lowest = values[0];
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[peak]) {
            peak = i;
        }
        lowest = std::min(lowest, values[i]);
    }
    const int w = heatmap.width();
    const Point2 peak_point{static_cast<double>(peak % w), static_cast<double>(peak / w)};
    if (values[peak] == lowest) {
        return {peak_point, 0.0};
    }

    std::size_t second = peak == 0 ? 1 : 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i != peak && values[i] > values[second]) {
            second = i;
        }
    }
    const Point2 second_point{static_cast<double>(second % w), static_cast<double>(second / w)};
    return {0.75 * peak_point + 0.25 * second_point, std::max(0.0, static_cast<double>(values[peak]))};
}

double loss(const HeatmapStack& prediction, const HeatmapStack& target)
{
    if (prediction.joint_count() != target.joint_count()) {
        throw std::invalid_argument("loss: joint counts differ");
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (int j = 0; j < prediction.joint_count(); ++j) {
        const auto a = prediction.maps[j].values();
        const auto b = target.maps[j].values();
        if (prediction.maps[j].resolution() != target.maps[j].resolution()) {
            throw std::invalid_argument("loss: heatmap resolutions differ");
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = static_cast<double>(a[i]) - b[i];
            sum += d * d;
        }
        count += a.size();
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

HeatmapStack fuse_heatmaps(std::span<const HeatmapStack> stacks, std::span<const double> weights)
{
    if (stacks.empty()) {
        throw std::invalid_argument("fuse_heatmaps: no stacks");
    }
    if (weights.size() != stacks.size()) {
        throw std::invalid_argument("fuse_heatmaps: weights and stacks differ in length");
    }
    const auto& first = stacks.front();
    for (const auto& s : stacks) {
        s.validate();
        if (s.joint_count() != first.joint_count() || s.resolution() != first.resolution()) {
            throw std::invalid_argument("fuse_heatmaps: stack shapes differ");
        }
    }
    HeatmapStack out;
    out.stage = first.stage;
    for (int j = 0; j < first.joint_count(); ++j) {
        Heatmap fused(first.resolution(), first.maps[j].joint_index());
        auto dst = fused.values();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            double acc = 0.0;
            for (std::size_t s = 0; s < stacks.size(); ++s) {
                acc += weights[s] * stacks[s].maps[j].values()[i];
            }
            dst[i] = static_cast<float>(acc);
        }
        out.maps.push_back(std::move(fused));
    }
    return out;
}

HeatmapStack fuse_heatmaps(std::span<const HeatmapStack> stacks)
{
    std::vector<double> weights(stacks.size(), stacks.empty() ? 0.0 : 1.0 / stacks.size());
    return fuse_heatmaps(stacks, weights);
}

Visibility infer_visibility(double confidence, VisibilityThresholds thresholds)
{
    if (confidence >= thresholds.visible) {
        return Visibility::visible;
    }
    if (confidence >= thresholds.occluded) {
        return Visibility::occluded;
    }
    return Visibility::outer;
}

Point2 HeatmapFrame::to_input(Point2 p) const
{
    const double s = stride();
    return {(p.x + 0.5) * s - 0.5, (p.y + 0.5) * s - 0.5};
}

Point2 HeatmapFrame::to_heatmap(Point2 p) const
{
    const double s = stride();
    return {(p.x + 0.5) / s - 0.5, (p.y + 0.5) / s - 0.5};
}

Pose HeatmapFrame::to_heatmap(const Pose& input_pose) const
{
    std::vector<Keypoint> kps(input_pose.keypoints());
    for (auto& k : kps) {
        const Point2 p = to_heatmap(k.position());
        k.x = p.x;
        k.y = p.y;
    }
    return Pose(input_pose.skeleton_ptr(), std::move(kps));
}

void save_heatmaps(const HeatmapStack& stack, const std::string& name, const std::filesystem::path& path)
{
    stack.validate();
    const auto res = stack.resolution();
    NamedTensor t;
    t.name = name;
    t.shape = {static_cast<std::uint64_t>(stack.joint_count()), static_cast<std::uint64_t>(res.height),
               static_cast<std::uint64_t>(res.width)};
    for (const auto& m : stack.maps) {
        t.data.insert(t.data.end(), m.values().begin(), m.values().end());
    }
    TensorFile file;
    file.metadata = std::string("{\"stage\":\"") + (stack.stage == StageTag::lower ? "lower" : "higher") + "\"}";
    file.tensors.push_back(std::move(t));
    write_tensor_file(file, path);
}

HeatmapStack load_heatmaps(const std::filesystem::path& path, const std::string& name)
{
    const TensorFile file = read_tensor_file(path);
    const NamedTensor& t = file.at(name);
    if (t.shape.size() != 3) {
        throw std::runtime_error("heatmap tensor '" + name + "' must be rank 3");
    }
    HeatmapStack stack;
    stack.stage = file.metadata.find("higher") != std::string::npos ? StageTag::higher : StageTag::lower;
    const Resolution res{static_cast<int>(t.shape[2]), static_cast<int>(t.shape[1])};
    const std::size_t plane = static_cast<std::size_t>(res.width) * res.height;
    for (std::uint64_t j = 0; j < t.shape[0]; ++j) {
        Heatmap hm(res, static_cast<int>(j));
        std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>(j * plane), plane, hm.values().begin());
        stack.maps.push_back(std::move(hm));
    }
    return stack;
}

void export_heatmap_csv(const Heatmap& heatmap, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string());
    }
    out << std::setprecision(9);
    for (int y = 0; y < heatmap.height(); ++y) {
        for (int x = 0; x < heatmap.width(); ++x) {
            out << (x ? "," : "") << heatmap.at(x, y);
        }
        out << '\n';
    }
}

} // namespace ranet
