// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "ranet/evaluate.hpp"
#include "ranet/geometry.hpp"
#include "ranet/image.hpp"

namespace ranet {

/// Limbs drawn in overlays, by joint index; pairs whose names the skeleton lacks are skipped.
std::vector<std::pair<int, int>> skeleton_edges(const SkeletonSpec& skeleton);

/// Predicted skeleton (and ground truth in grey when given) drawn over the image, upscaled so
/// the short side is at least `min_side` pixels.
void save_overlay(const Image& image, const Pose& predicted, const Pose* ground_truth,
                  const std::filesystem::path& path, int min_side = 256);

/// Per-joint normalised error ellipses: centre at the mean |dx|, |dy|, semi-axes one standard deviation.
void save_error_ellipse_plot(std::span<const ErrorStats> stats, const std::filesystem::path& path);

/// Accuracy against the threshold multiplier alpha.
void save_threshold_sweep_plot(std::span<const std::pair<double, double>> alpha_accuracy,
                               const std::filesystem::path& path);

} // namespace ranet
