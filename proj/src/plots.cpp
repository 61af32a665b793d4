// SPDX-License-Identifier: Apache-2.0
#include "ranet/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace ranet {

namespace {

const cv::Scalar ink(40, 40, 40);

void write(const cv::Mat& mat, const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    if (!cv::imwrite(path.string(), mat)) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

cv::Scalar joint_color(const std::string& name)
{
    if (name.rfind("r_", 0) == 0) {
        return {60, 60, 230}; // BGR red
    }
    if (name.rfind("l_", 0) == 0) {
        return {230, 120, 40};
    }
    return {60, 200, 60};
}

std::string fmt(double v, const char* f = "%.2f")
{
    char buf[32];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Axis box with ticks; maps data (x, y) to pixels.
struct Axes {
    cv::Rect area;
    double x0, x1, y0, y1;

    cv::Point map(double x, double y) const
    {
        const double u = (x - x0) / (x1 - x0);
        const double v = (y - y0) / (y1 - y0);
        return {area.x + static_cast<int>(std::lround(u * area.width)),
                area.y + area.height - static_cast<int>(std::lround(v * area.height))};
    }

    void draw(cv::Mat& canvas, const std::string& xlabel, const std::string& ylabel, int ticks = 5) const
    {
        cv::rectangle(canvas, area, ink, 1);
        for (int i = 0; i <= ticks; ++i) {
            const double xv = x0 + (x1 - x0) * i / ticks;
            const double yv = y0 + (y1 - y0) * i / ticks;
            const cv::Point px = map(xv, y0);
            const cv::Point py = map(x0, yv);
            cv::line(canvas, px, px + cv::Point(0, 5), ink, 1);
            cv::line(canvas, py, py - cv::Point(5, 0), ink, 1);
            cv::putText(canvas, fmt(xv), px + cv::Point(-14, 20), cv::FONT_HERSHEY_SIMPLEX, 0.4, ink, 1, cv::LINE_AA);
            cv::putText(canvas, fmt(yv), py + cv::Point(-45, 4), cv::FONT_HERSHEY_SIMPLEX, 0.4, ink, 1, cv::LINE_AA);
        }
        cv::putText(canvas, xlabel, {area.x + area.width / 2 - 40, area.y + area.height + 40}, cv::FONT_HERSHEY_SIMPLEX,
                    0.5, ink, 1, cv::LINE_AA);
        cv::putText(canvas, ylabel, {10, area.y - 10}, cv::FONT_HERSHEY_SIMPLEX, 0.5, ink, 1, cv::LINE_AA);
    }
};

} // namespace

std::vector<std::pair<int, int>> skeleton_edges(const SkeletonSpec& skeleton)
{
    using Named = std::vector<std::pair<const char*, const char*>>;
    static const Named limbs = {{"r_ankle", "r_knee"},   {"r_knee", "r_hip"},        {"l_ankle", "l_knee"},
                                {"l_knee", "l_hip"},     {"r_wrist", "r_elbow"},     {"r_elbow", "r_shoulder"},
                                {"l_wrist", "l_elbow"},  {"l_elbow", "l_shoulder"}};
    // Torso and head differ between layouts with a pelvis/thorax chain and those without.
    static const Named chain = {{"r_hip", "pelvis"},     {"l_hip", "pelvis"},       {"pelvis", "thorax"},
                                {"thorax", "upper_neck"}, {"upper_neck", "head_top"}, {"r_shoulder", "thorax"},
                                {"l_shoulder", "thorax"}};
    static const Named box = {{"r_hip", "l_hip"},         {"r_hip", "r_shoulder"}, {"l_hip", "l_shoulder"},
                              {"r_shoulder", "neck"},     {"l_shoulder", "neck"},  {"neck", "head_top"}};
    auto find = [&](const char* n) {
        const auto it = std::find(skeleton.joint_names.begin(), skeleton.joint_names.end(), n);
        return it == skeleton.joint_names.end() ? -1 : static_cast<int>(it - skeleton.joint_names.begin());
    };
    std::vector<std::pair<int, int>> out;
    for (const Named* list : {&limbs, find("pelvis") >= 0 ? &chain : &box}) {
        for (const auto& [a, b] : *list) {
            const int ia = find(a), ib = find(b);
            if (ia >= 0 && ib >= 0) {
                out.emplace_back(ia, ib);
            }
        }
    }
    return out;
}

void save_overlay(const Image& image, const Pose& predicted, const Pose* ground_truth,
                  const std::filesystem::path& path, int min_side)
{
    if (image.channels() != 3) {
        throw std::invalid_argument("save_overlay: expected an RGB image");
    }
    const double k = std::max(1.0, static_cast<double>(min_side) / std::min(image.width(), image.height()));
    cv::Mat base(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            auto& px = base.at<cv::Vec3b>(y, x);
            for (int c = 0; c < 3; ++c) {
                px[2 - c] = cv::saturate_cast<std::uint8_t>(image.at(x, y, c) * 255.0f + 0.5f);
            }
        }
    }
    cv::Mat canvas;
    cv::resize(base, canvas, {}, k, k, cv::INTER_NEAREST);
    auto pt = [&](const Keypoint& kp) {
        return cv::Point(static_cast<int>(std::lround((kp.x + 0.5) * k - 0.5)),
                         static_cast<int>(std::lround((kp.y + 0.5) * k - 0.5)));
    };
    const auto edges = skeleton_edges(predicted.skeleton());
    auto draw = [&](const Pose& pose, bool gt) {
        for (const auto& [a, b] : edges) {
            if (pose[a].visibility == Visibility::outer || pose[b].visibility == Visibility::outer) {
                continue;
            }
            const cv::Scalar color = gt ? cv::Scalar(200, 200, 200) : joint_color(pose.skeleton().joint_names[b]);
            cv::line(canvas, pt(pose[a]), pt(pose[b]), color, gt ? 1 : 2, cv::LINE_AA);
        }
        for (int j = 0; j < pose.size(); ++j) {
            if (pose[j].visibility == Visibility::outer) {
                continue;
            }
            const cv::Scalar color = gt ? cv::Scalar(200, 200, 200) : joint_color(pose.skeleton().joint_names[j]);
            cv::circle(canvas, pt(pose[j]), gt ? 2 : 3, color, pose[j].visibility == Visibility::visible ? -1 : 1,
                       cv::LINE_AA);
        }
    };
    if (ground_truth) {
        draw(*ground_truth, true);
    }
    draw(predicted, false);
    write(canvas, path);
}

void save_error_ellipse_plot(std::span<const ErrorStats> stats, const std::filesystem::path& path)
{
    cv::Mat canvas(620, 620, CV_8UC3, cv::Scalar(255, 255, 255));
    double extent = 0.05;
    for (const auto& s : stats) {
        if (s.count > 0) {
            extent = std::max({extent, s.mean_x_err + std::sqrt(s.var_x_err), s.mean_y_err + std::sqrt(s.var_y_err)});
        }
    }
    extent *= 1.1;
    const Axes ax{cv::Rect(70, 40, 520, 520), 0.0, extent, 0.0, extent};
    ax.draw(canvas, "mean |x error| / d_norm", "mean |y error| / d_norm");
    for (std::size_t i = 0; i < stats.size(); ++i) {
        const auto& s = stats[i];
        if (s.count == 0) {
            continue;
        }
        const cv::Point c = ax.map(s.mean_x_err, s.mean_y_err);
        const int rx = std::max(1, static_cast<int>(std::lround(std::sqrt(s.var_x_err) / extent * ax.area.width)));
        const int ry = std::max(1, static_cast<int>(std::lround(std::sqrt(s.var_y_err) / extent * ax.area.height)));
        const cv::Scalar color = joint_color(s.name);
        cv::ellipse(canvas, c, {rx, ry}, 0, 0, 360, color, 1, cv::LINE_AA);
        cv::circle(canvas, c, 2, color, -1);
        cv::putText(canvas, s.name, c + cv::Point(4, -4), cv::FONT_HERSHEY_SIMPLEX, 0.35, color, 1, cv::LINE_AA);
    }
    write(canvas, path);
}

void save_threshold_sweep_plot(std::span<const std::pair<double, double>> alpha_accuracy,
                               const std::filesystem::path& path)
{
    if (alpha_accuracy.empty()) {
        throw std::invalid_argument("save_threshold_sweep_plot: no points");
    }
    cv::Mat canvas(460, 640, CV_8UC3, cv::Scalar(255, 255, 255));
    double a0 = alpha_accuracy.front().first, a1 = a0, lo = 1.0, hi = 0.0;
    for (const auto& [a, acc] : alpha_accuracy) {
        a0 = std::min(a0, a);
        a1 = std::max(a1, a);
        lo = std::min(lo, acc);
        hi = std::max(hi, acc);
    }
    if (a1 == a0) {
        a1 = a0 + 1.0;
    }
    const double pad = std::max(0.005, 0.1 * (hi - lo));
    const Axes ax{cv::Rect(80, 40, 520, 340), a0, a1, std::max(0.0, lo - pad), std::min(1.0, hi + pad) + 1e-9};
    ax.draw(canvas, "threshold multiplier alpha", "accuracy");
    for (std::size_t i = 0; i < alpha_accuracy.size(); ++i) {
        const cv::Point p = ax.map(alpha_accuracy[i].first, alpha_accuracy[i].second);
        if (i > 0) {
            cv::line(canvas, ax.map(alpha_accuracy[i - 1].first, alpha_accuracy[i - 1].second), p, {180, 90, 30}, 2,
                     cv::LINE_AA);
        }
        cv::circle(canvas, p, 4, alpha_accuracy[i].first == 1.0 ? cv::Scalar(40, 40, 220) : cv::Scalar(180, 90, 30),
                   -1, cv::LINE_AA);
    }
    write(canvas, path);
}

} // namespace ranet
