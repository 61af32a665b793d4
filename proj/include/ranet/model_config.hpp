// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace ranet {

/// Multi-branch stem. Branch i (0-based) consumes the crop at input_side / 2^i and every
/// branch ends at feature_side. Branch 0 is the plain single-branch stem.
struct FpsConfig {
    int K = 3;
    int input_side = 256;
    int feature_side = 64;
    int channels = 64;        // width C of the merged stem features
    int branch_channels = 16; // width of the extra branches before projection to C

    int branch_side(int branch) const { return input_side >> branch; }
    void validate() const;
};

struct HourglassConfig {
    int depth = 2;
    int stacks = 1; // hourglasses per stage
};

struct ModelConfig {
    FpsConfig fps;
    HourglassConfig hourglass;
    int joints = 16;

    void validate() const;
    /// Stable text form of the architecture, stored in checkpoints.
    std::string fingerprint() const;
};

struct TrainConfig {
    std::string optimizer = "rmsprop";
    double lr = 5e-4;
    std::vector<int> lr_halving_epochs{20, 50, 100, 150, 200};
    int epochs = 250;
    int batch_size = 32;
    /// Linear learning-rate ramp over the first optimiser steps (0 disables).
    int warmup_steps = 200;

    void validate() const;
};

/// Learning rate for a 0-based epoch: lr * 0.5^(number of milestones <= epoch).
double lr_at_epoch(const TrainConfig& cfg, int epoch);
/// lr_at_epoch scaled by the warm-up ramp for the 0-based global optimiser step.
double lr_at_step(const TrainConfig& cfg, int epoch, long step);

void to_json(nlohmann::json& j, const FpsConfig& c);
void from_json(const nlohmann::json& j, FpsConfig& c);
void to_json(nlohmann::json& j, const HourglassConfig& c);
void from_json(const nlohmann::json& j, HourglassConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

} // namespace ranet
