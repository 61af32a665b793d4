// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>

#include "ranet/augment.hpp"
#include "ranet/model.hpp"

namespace ranet {

struct TrainSample {
    const Image* image = nullptr;
    Pose pose;
    Point2 center;
    double scale = 1.0; // source pixels per crop pixel at augmentation scale 1
};

struct EpochReport {
    int epoch = 0; // 0-based
    double lr = 0.0;
    double mean_loss = 0.0;
    double seconds = 0.0;
};

struct TrainOptions {
    TrainConfig train;
    AugmentConfig augment;
    std::optional<MountingPolicy> mounting; // defaults from the skeleton when empty
    const PatchPool* pool = nullptr;
    EreConfig ere;
    std::uint64_t seed = 0;
    std::string skeleton = "mpii";
    std::filesystem::path checkpoint; // written after every epoch when set
    std::function<void(const EpochReport&)> on_epoch;
};

/// One supervised example after augmentation: the lower crop and its target stack.
struct PreparedSample {
    Image image; // augmented full image
    Pose pose;   // augmented pose in image coordinates
    CropResult lower_crop;
    HeatmapStack lower_target;
};

PreparedSample prepare_sample(const TrainSample& sample, const TrainOptions& opts, int input_side, int heatmap_side,
                              std::uint64_t epoch, std::uint64_t index);

/// Train both stages with equal-weight deep supervision. Continues from `state.epoch` up to
/// opts.train.epochs; `state` is updated in place (and checkpointed when configured).
/// Augmentation randomness is keyed by (seed, epoch, sample), so resumed runs replay the same stream.
void train(Network<float>& net, std::span<const TrainSample> samples, const TrainOptions& opts, TrainState& state);

/// Loss of one batch without updating parameters (evaluation mode augmentation is identity).
double evaluate_loss(Network<float>& net, std::span<const TrainSample> samples, const TrainOptions& opts);

} // namespace ranet
