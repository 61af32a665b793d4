// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ranet/augment.hpp"
#include "ranet/dataset.hpp"
#include "ranet/evaluate.hpp"
#include "ranet/fusion.hpp"
#include "ranet/model.hpp"
#include "ranet/train.hpp"

namespace ranet {

enum class StagesUsed { lower, higher, both };

std::string_view to_string(StagesUsed s);
StagesUsed stages_used_from_string(std::string_view name);

struct InferenceConfig {
    std::vector<double> scales{0.75, 0.85, 0.95, 1.05, 1.15, 1.25};
    bool flip = true;
    StagesUsed stages = StagesUsed::both;
    /// Crop side in source pixels is 200 * person scale * crop_padding.
    double crop_padding = 1.25;

    int candidates_per_joint() const;
    void validate() const;
};

/// Source pixels per crop pixel for a person of `person_scale` at test-scale factor 1.
double person_crop_scale(double person_scale, int input_side, double crop_padding);

/// Per joint, one candidate per (scale, flip, stage) in image coordinates. Flipped crops are
/// un-flipped through the skeleton's flip pairs.
/// Throws ConfigMismatchError when the model's joint count differs from the skeleton's.
std::vector<CandidateSet> infer(PoseModel& model, const Image& image, Point2 center, double person_scale,
                                const SkeletonSpec& skeleton, const InferenceConfig& cfg, const EreConfig& ere = {});

/// Everything that drives training and evaluation; the CLI reads it from one JSON file.
struct PipelineConfig {
    ModelConfig model;
    TrainConfig train;
    AugmentConfig augment;
    PoolBuildConfig pool;
    /// Empty affinity: defaults for the dataset skeleton.
    MountingPolicy mounting;
    EreConfig ere;
    InferenceConfig inference;
    bool cvf = true;
    double cvf_alpha = 1.0;
    std::vector<double> sweep_alphas{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0};
    std::uint64_t seed = 0;

    /// Small network and schedule used for desk-scale runs on the synthetic data.
    static PipelineConfig toy();
    void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, PipelineConfig& c);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct EvalOptions {
    InferenceConfig inference;
    EreConfig ere;
    ThresholdMode fusion = ThresholdMode::mean();
    std::optional<double> tau; // 0.5 for PCKh, 0.2 for PCK when unset
    std::vector<double> sweep_alphas; // empty: no sweep
    /// Called before each image is processed (e.g. to point a stub at the ground truth).
    std::function<void(const ManifestRecord&)> before_image;
    int workers = 1;

    static EvalOptions from_config(const PipelineConfig& cfg);
};

struct ImagePrediction {
    std::string image_id;
    Pose pose;
    std::vector<CandidateSet> candidates;
};

struct SweepPoint {
    double alpha = 1.0;
    double accuracy = 0.0;
};

struct EvalRun {
    EvalReport report;
    std::vector<ImagePrediction> predictions;
    std::vector<SweepPoint> sweep;
};

/// PCKh when every record has a head box, otherwise PCK on torso references (tau 0.2 unless set).
EvalRun run_eval(const LoadedDataset& data, PoseModel& model, const EvalOptions& options);

struct EvalOutputOptions {
    bool overlays = false;
    bool plots = true;
};

/// report.json, predictions.jsonl, candidates.jsonl and optionally overlays/ and plots/.
void write_eval_outputs(const EvalRun& run, const LoadedDataset& data, const std::filesystem::path& dir,
                        const EvalOutputOptions& options = {});

/// predictions.jsonl lines: image_id, joint_index, x, y, confidence, visibility.
void write_predictions_jsonl(std::ostream& out, const ImagePrediction& prediction);

struct TrainRun {
    std::unique_ptr<Network<float>> network;
    TrainState state;
    PatchPool pool;
};

struct TrainHooks {
    std::filesystem::path checkpoint; // written after every epoch when set
    std::filesystem::path resume;     // continue from this checkpoint when set
    std::function<void(const EpochReport&)> on_epoch;
    /// Use this pool instead of building one from the dataset's parsing masks.
    std::optional<PatchPool> pool;
};

/// Build the patch pool (when PDA is on and none is given), then train.
TrainRun train_on_dataset(const LoadedDataset& data, const PipelineConfig& cfg, TrainHooks hooks = {});

/// Inference model sharing the trained weights.
std::unique_ptr<NetworkModel> to_inference_model(const Network<float>& net, std::uint64_t seed = 0);

struct AblationVariant {
    std::string name;
    bool pda = false;
    bool fps = false;
    bool ere = false;
    bool cvf = false;
};

/// Rows a-f: baseline, +PDA, +FPS, +ERE, +CVF without ERE, everything.
std::vector<AblationVariant> standard_variants();

struct AblationRow {
    AblationVariant variant;
    EvalReport report;
    std::vector<double> loss_curve;
};

struct AblationTable {
    std::vector<AblationRow> rows;

    std::string format() const;
    nlohmann::json to_json() const;
};

/// Trains one model per distinct (PDA, FPS, ERE) combination with the shared seed and evaluates
/// every variant on `val`. Rows follow the order of `variants`.
AblationTable run_ablation(const LoadedDataset& train, const LoadedDataset& val,
                           const std::vector<AblationVariant>& variants, const PipelineConfig& cfg,
                           const std::function<void(const std::string&)>& progress = {});

} // namespace ranet
