// SPDX-License-Identifier: Apache-2.0
#include "ranet/model_config.hpp"

#include <stdexcept>

namespace ranet {

namespace {

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

void require(bool ok, const std::string& message)
{
    if (!ok) {
        throw std::invalid_argument(message);
    }
}

} // namespace

void FpsConfig::validate() const
{
    require(K >= 1, "fps: K must be >= 1");
    require(channels > 0 && branch_channels > 0, "fps: channel counts must be positive");
    require(feature_side > 0 && input_side == 4 * feature_side,
            "fps: input_side must be 4 x feature_side (stride-2 convolution plus pooling)");
    require(input_side % (1 << (K - 1)) == 0, "fps: input_side must be divisible by 2^(K-1)");
    for (int b = 1; b < K; ++b) {
        const int side = branch_side(b);
        require(side >= feature_side ? power_of_two(side / feature_side) && side % feature_side == 0
                                     : power_of_two(feature_side / side) && feature_side % side == 0,
                "fps: branch resolutions must differ from feature_side by a power of two");
    }
}

void ModelConfig::validate() const
{
    fps.validate();
    require(joints > 0, "model: joints must be positive");
    require(hourglass.depth >= 1 && hourglass.stacks >= 1, "model: hourglass depth and stacks must be >= 1");
    require(fps.feature_side % (1 << hourglass.depth) == 0, "model: feature_side must be divisible by 2^depth");
}

std::string ModelConfig::fingerprint() const
{
    nlohmann::json j = *this;
    return j.dump();
}

void TrainConfig::validate() const
{
    require(lr > 0.0, "train: lr must be positive");
    require(epochs >= 1, "train: epochs must be >= 1");
    require(batch_size >= 1, "train: batch_size must be >= 1");
    require(warmup_steps >= 0, "train: warmup_steps must be >= 0");
    require(optimizer == "rmsprop", "train: unsupported optimizer '" + optimizer + "'");
}

double lr_at_epoch(const TrainConfig& cfg, int epoch)
{
    double lr = cfg.lr;
    for (int m : cfg.lr_halving_epochs) {
        if (epoch >= m) {
            lr *= 0.5;
        }
    }
    return lr;
}

double lr_at_step(const TrainConfig& cfg, int epoch, long step)
{
    const double lr = lr_at_epoch(cfg, epoch);
    if (cfg.warmup_steps <= 0 || step >= cfg.warmup_steps) {
        return lr;
    }
    return lr * static_cast<double>(step + 1) / cfg.warmup_steps;
}

void to_json(nlohmann::json& j, const FpsConfig& c)
{
    j = {{"K", c.K},
         {"input_side", c.input_side},
         {"feature_side", c.feature_side},
         {"channels", c.channels},
         {"branch_channels", c.branch_channels}};
}

void from_json(const nlohmann::json& j, FpsConfig& c)
{
    c.K = j.value("K", c.K);
    c.input_side = j.value("input_side", c.input_side);
    c.feature_side = j.value("feature_side", c.feature_side);
    c.channels = j.value("channels", c.channels);
    c.branch_channels = j.value("branch_channels", c.branch_channels);
}

void to_json(nlohmann::json& j, const HourglassConfig& c) { j = {{"depth", c.depth}, {"stacks", c.stacks}}; }

void from_json(const nlohmann::json& j, HourglassConfig& c)
{
    c.depth = j.value("depth", c.depth);
    c.stacks = j.value("stacks", c.stacks);
}

void to_json(nlohmann::json& j, const ModelConfig& c)
{
    j = {{"fps", c.fps}, {"hourglass", c.hourglass}, {"joints", c.joints}};
}

void from_json(const nlohmann::json& j, ModelConfig& c)
{
    if (j.contains("fps")) {
        j.at("fps").get_to(c.fps);
    }
    if (j.contains("hourglass")) {
        j.at("hourglass").get_to(c.hourglass);
    }
    c.joints = j.value("joints", c.joints);
}

void to_json(nlohmann::json& j, const TrainConfig& c)
{
    j = {{"optimizer", c.optimizer},
         {"lr", c.lr},
         {"lr_halving_epochs", c.lr_halving_epochs},
         {"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"warmup_steps", c.warmup_steps}};
}

void from_json(const nlohmann::json& j, TrainConfig& c)
{
    c.optimizer = j.value("optimizer", c.optimizer);
    c.lr = j.value("lr", c.lr);
    c.lr_halving_epochs = j.value("lr_halving_epochs", c.lr_halving_epochs);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
}

} // namespace ranet
