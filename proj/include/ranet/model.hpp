// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ranet/geometry.hpp"
#include "ranet/heatmaps.hpp"
#include "ranet/model_config.hpp"
#include "ranet/network.hpp"
#include "ranet/nn/optim.hpp"

namespace ranet {

/// Checkpoint or model does not fit the data it is used with.
class ConfigMismatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Output of one stage for one crop.
struct StageOutputs {
    std::vector<HeatmapStack> stacks; // one per stacked hourglass
    nn::Tensor<float> features;       // [1, C, h, w]; empty for models without features

    /// Uniform average over the stacked hourglasses.
    HeatmapStack fused() const;
};

/// Anything that maps crops to heatmaps in two stages: the trained network or a test stub.
class PoseModel {
public:
    virtual ~PoseModel() = default;

    virtual int input_side() const = 0;
    virtual int heatmap_side() const = 0;
    virtual int joint_count() const = 0;

    virtual std::vector<StageOutputs> run_lower(std::span<const CropResult> crops) = 0;
    /// `lower[i]` is the lower-stage output for the crop that produced `crops[i]`.
    virtual std::vector<StageOutputs> run_higher(std::span<const CropResult> crops,
                                                 std::span<const StageOutputs> lower) = 0;

    HeatmapFrame frame() const { return {input_side(), heatmap_side()}; }
};

/// Convert crops to an [N, 3, S, S] tensor centred around zero.
nn::Tensor<float> crops_to_tensor(std::span<const CropResult> crops);
/// Slice sample `n` of an [N, J, h, w] tensor into a stack.
HeatmapStack stack_from_tensor(const nn::Tensor<float>& heatmaps, int n, StageTag stage);

/// The trainable two-stage network behind the PoseModel interface (inference mode).
class NetworkModel : public PoseModel {
public:
    NetworkModel(ModelConfig cfg, std::uint64_t seed);

    int input_side() const override { return net_.config().fps.input_side; }
    int heatmap_side() const override { return net_.config().fps.feature_side; }
    int joint_count() const override { return net_.config().joints; }

    std::vector<StageOutputs> run_lower(std::span<const CropResult> crops) override;
    std::vector<StageOutputs> run_higher(std::span<const CropResult> crops,
                                         std::span<const StageOutputs> lower) override;

    Network<float>& network() { return net_; }
    const Network<float>& network() const { return net_; }

private:
    Network<float> net_;
};

/// Renders ground-truth Gaussians for the pose set with set_pose(); used to test the
/// inference chain end to end without training.
class GroundTruthStub : public PoseModel {
public:
    GroundTruthStub(int input_side, int heatmap_side, int joints, int stacks = 1);

    void set_pose(const Pose& original_pose) { pose_ = original_pose; }

    int input_side() const override { return input_side_; }
    int heatmap_side() const override { return heatmap_side_; }
    int joint_count() const override { return joints_; }
    std::vector<StageOutputs> run_lower(std::span<const CropResult> crops) override;
    std::vector<StageOutputs> run_higher(std::span<const CropResult> crops,
                                         std::span<const StageOutputs> lower) override;

private:
    std::vector<StageOutputs> render(std::span<const CropResult> crops, StageTag stage) const;

    int input_side_;
    int heatmap_side_;
    int joints_;
    int stacks_;
    std::optional<Pose> pose_;
};

/// Emits all-zero heatmaps.
class ZeroStub : public PoseModel {
public:
    ZeroStub(int input_side, int heatmap_side, int joints) : input_side_(input_side), heatmap_side_(heatmap_side), joints_(joints) {}

    int input_side() const override { return input_side_; }
    int heatmap_side() const override { return heatmap_side_; }
    int joint_count() const override { return joints_; }
    std::vector<StageOutputs> run_lower(std::span<const CropResult> crops) override;
    std::vector<StageOutputs> run_higher(std::span<const CropResult> crops,
                                         std::span<const StageOutputs> lower) override;

private:
    int input_side_;
    int heatmap_side_;
    int joints_;
};

struct EreConfig {
    bool enabled = true;
    double margin = 0.15; // fraction of the pose box extent added per side
    VisibilityThresholds visibility;
};

struct EreCrop {
    CropResult crop;
    bool fallback = false;
};

/// Crop for the higher stage from the lower stage's heatmaps: decode, drop joints decoded as
/// outer, map to image coordinates, box with margin (clamped to the image), aspect-preserving
/// crop. Falls back to `lower_crop` when disabled or when the box is degenerate.
EreCrop ere_crop(const Image& image, const HeatmapStack& lower, const CropResult& lower_crop, HeatmapFrame frame,
                 const EreConfig& cfg);

struct FullRequest {
    Point2 center;
    double scale = 1.0; // source pixels per crop pixel
    double rotation = 0.0;
    bool flip = false;
};

struct FullOutput {
    StageOutputs lower;
    StageOutputs higher;
    CropTransform lower_transform;
    CropTransform ere_transform;
    bool ere_fallback = false;
};

/// crop -> lower stage -> decode -> box -> aspect crop -> higher stage, batched over requests.
std::vector<FullOutput> forward_full(PoseModel& model, const Image& image, std::span<const FullRequest> requests,
                                     const EreConfig& ere = {});

/// Training state carried in checkpoints.
struct TrainState {
    int epoch = 0; // epochs completed
    std::vector<double> loss_curve;
    std::vector<nn::Tensor<float>> optimizer_state;
};

struct CheckpointInfo {
    ModelConfig model;
    std::string skeleton;
    TrainConfig train;
    TrainState state;
    nlohmann::json extra;
};

/// Parameters, optimiser state and JSON metadata in the tensor container.
void save_checkpoint(const std::filesystem::path& path, Network<float>& net, const std::string& skeleton,
                     const TrainConfig& train, const TrainState& state, const nlohmann::json& extra = {});
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);
/// Restore parameters (and optimiser state into `state` when present). Throws ConfigMismatchError
/// when the stored fingerprint differs from the network's.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, Network<float>& net);
/// Build an inference model from a checkpoint; `expected_joints` guards against skeleton mismatch.
std::unique_ptr<NetworkModel> model_from_checkpoint(const std::filesystem::path& path,
                                                    std::optional<int> expected_joints = std::nullopt);

} // namespace ranet
