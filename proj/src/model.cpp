// SPDX-License-Identifier: Apache-2.0
#include "ranet/model.hpp"

#include <algorithm>
#include <cmath>

#include "ranet/tensor_file.hpp"

namespace ranet {

namespace {

std::vector<StageOutputs> outputs_from_vars(nn::Graph<float>& g, const StageVars& vars, StageTag tag, int batch)
{
    std::vector<StageOutputs> out(batch);
    for (nn::Var heat : vars.heatmaps) {
        const auto& t = g.value(heat);
        for (int n = 0; n < batch; ++n) {
            out[n].stacks.push_back(stack_from_tensor(t, n, tag));
        }
    }
    const auto& f = g.value(vars.features);
    const nn::Shape fs = f.shape();
    for (int n = 0; n < batch; ++n) {
        nn::Tensor<float> one(nn::Shape{1, fs.c, fs.h, fs.w});
        std::copy_n(f.plane(n, 0), one.size(), one.data());
        out[n].features = std::move(one);
    }
    return out;
}

nn::Shape param_shape(const NamedTensor& t)
{
    if (t.shape.size() != 4) {
        throw std::runtime_error("checkpoint tensor '" + t.name + "' is not rank 4");
    }
    return {static_cast<int>(t.shape[0]), static_cast<int>(t.shape[1]), static_cast<int>(t.shape[2]),
            static_cast<int>(t.shape[3])};
}

NamedTensor named(const std::string& name, const nn::Tensor<float>& t)
{
    const nn::Shape s = t.shape();
    NamedTensor out;
    out.name = name;
    out.shape = {static_cast<std::uint64_t>(s.n), static_cast<std::uint64_t>(s.c), static_cast<std::uint64_t>(s.h),
                 static_cast<std::uint64_t>(s.w)};
    out.data.assign(t.values().begin(), t.values().end());
    return out;
}

CheckpointInfo parse_info(const TensorFile& file)
{
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(file.metadata);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("checkpoint metadata is not valid JSON: ") + e.what());
    }
    if (meta.value("format", "") != "ranet-checkpoint") {
        throw std::runtime_error("file is not a model checkpoint");
    }
    CheckpointInfo info;
    info.model = meta.at("model").get<ModelConfig>();
    info.skeleton = meta.value("skeleton", "");
    info.train = meta.at("train").get<TrainConfig>();
    info.state.epoch = meta.value("epoch", 0);
    info.state.loss_curve = meta.value("loss_curve", std::vector<double>{});
    info.extra = meta.value("extra", nlohmann::json::object());
    if (meta.value("fingerprint", "") != info.model.fingerprint()) {
        throw ConfigMismatchError("checkpoint fingerprint does not match its model configuration");
    }
    return info;
}

} // namespace

HeatmapStack StageOutputs::fused() const
{
    if (stacks.size() == 1) {
        return stacks.front();
    }
    return fuse_heatmaps(stacks);
}

nn::Tensor<float> crops_to_tensor(std::span<const CropResult> crops)
{
    if (crops.empty()) {
        throw std::invalid_argument("crops_to_tensor: no crops");
    }
    const int side = crops.front().image.width();
    nn::Tensor<float> t(nn::Shape{static_cast<int>(crops.size()), 3, side, side});
    for (std::size_t n = 0; n < crops.size(); ++n) {
        const Image& img = crops[n].image;
        if (img.width() != side || img.height() != side || img.channels() != 3) {
            throw std::invalid_argument("crops_to_tensor: crops must be square RGB images of one size");
        }
        for (int c = 0; c < 3; ++c) {
            float* dst = t.plane(static_cast<int>(n), c);
            for (int y = 0; y < side; ++y) {
                for (int x = 0; x < side; ++x) {
                    dst[y * side + x] = img.at(x, y, c) - 0.5f;
                }
            }
        }
    }
    return t;
}

HeatmapStack stack_from_tensor(const nn::Tensor<float>& heatmaps, int n, StageTag stage)
{
    const nn::Shape s = heatmaps.shape();
    HeatmapStack stack;
    stack.stage = stage;
    for (int j = 0; j < s.c; ++j) {
        Heatmap hm({s.w, s.h}, j);
        std::copy_n(heatmaps.plane(n, j), s.plane(), hm.values().data());
        stack.maps.push_back(std::move(hm));
    }
    return stack;
}

NetworkModel::NetworkModel(ModelConfig cfg, std::uint64_t seed) : net_(std::move(cfg), seed) {}

std::vector<StageOutputs> NetworkModel::run_lower(std::span<const CropResult> crops)
{
    nn::Graph<float> g(false);
    std::vector<nn::Var> levels;
    for (auto& t : net_.pyramid(crops_to_tensor(crops))) {
        levels.push_back(g.constant(std::move(t)));
    }
    const nn::Var stem = net_.fps_forward(g, Stage::lower, levels);
    const StageVars vars = net_.stage_forward(g, Stage::lower, stem);
    return outputs_from_vars(g, vars, StageTag::lower, static_cast<int>(crops.size()));
}

std::vector<StageOutputs> NetworkModel::run_higher(std::span<const CropResult> crops, std::span<const StageOutputs> lower)
{
    if (lower.size() != crops.size()) {
        throw std::invalid_argument("run_higher: one lower output per crop required");
    }
    nn::Graph<float> g(false);
    std::vector<nn::Var> levels;
    for (auto& t : net_.pyramid(crops_to_tensor(crops))) {
        levels.push_back(g.constant(std::move(t)));
    }
    const nn::Shape fs = lower.front().features.shape();
    nn::Tensor<float> prior(nn::Shape{static_cast<int>(crops.size()), fs.c, fs.h, fs.w});
    for (std::size_t n = 0; n < lower.size(); ++n) {
        if (lower[n].features.shape() != fs) {
            throw std::invalid_argument("run_higher: lower features differ in shape");
        }
        std::copy_n(lower[n].features.data(), lower[n].features.size(), prior.plane(static_cast<int>(n), 0));
    }
    const nn::Var stem = net_.fps_forward(g, Stage::higher, levels);
    const StageVars vars = net_.stage_forward(g, Stage::higher, stem, g.constant(std::move(prior)));
    return outputs_from_vars(g, vars, StageTag::higher, static_cast<int>(crops.size()));
}

GroundTruthStub::GroundTruthStub(int input_side, int heatmap_side, int joints, int stacks)
    : input_side_(input_side), heatmap_side_(heatmap_side), joints_(joints), stacks_(stacks)
{
}

std::vector<StageOutputs> GroundTruthStub::render(std::span<const CropResult> crops, StageTag stage) const
{
    if (!pose_) {
        throw std::logic_error("ground-truth stub used before set_pose");
    }
    const HeatmapFrame f = frame();
    std::vector<StageOutputs> out;
    for (const auto& crop : crops) {
        const Pose in_crop = map_pose(*pose_, crop.transform, MapDirection::forward, true);
        const HeatmapStack stack = make_target_stack(f.to_heatmap(in_crop), {heatmap_side_, heatmap_side_}, stage);
        out.push_back({std::vector<HeatmapStack>(stacks_, stack), {}});
    }
    return out;
}

std::vector<StageOutputs> GroundTruthStub::run_lower(std::span<const CropResult> crops)
{
    return render(crops, StageTag::lower);
}

std::vector<StageOutputs> GroundTruthStub::run_higher(std::span<const CropResult> crops, std::span<const StageOutputs>)
{
    return render(crops, StageTag::higher);
}

std::vector<StageOutputs> ZeroStub::run_lower(std::span<const CropResult> crops)
{
    HeatmapStack stack;
    for (int j = 0; j < joints_; ++j) {
        stack.maps.emplace_back(Resolution{heatmap_side_, heatmap_side_}, j);
    }
    return std::vector<StageOutputs>(crops.size(), StageOutputs{{stack}, {}});
}

std::vector<StageOutputs> ZeroStub::run_higher(std::span<const CropResult> crops, std::span<const StageOutputs>)
{
    auto out = run_lower(crops);
    for (auto& o : out) {
        o.stacks.front().stage = StageTag::higher;
    }
    return out;
}

EreCrop ere_crop(const Image& image, const HeatmapStack& lower, const CropResult& lower_crop, HeatmapFrame frame,
                 const EreConfig& cfg)
{
    if (!cfg.enabled) {
        return {lower_crop, true};
    }
    std::vector<Point2> points;
    for (const auto& hm : lower.maps) {
        const DecodedJoint d = decode(hm);
        if (infer_visibility(d.confidence, cfg.visibility) == Visibility::outer) {
            continue;
        }
        points.push_back(lower_crop.transform.inverse(frame.to_input(d.position)));
    }
    if (points.empty()) {
        return {lower_crop, true};
    }
    const BoundingBox box = points_to_bbox(points, cfg.margin, ImageBounds{image.width(), image.height()});
    if (!(box.width() > 0.0) || !(box.height() > 0.0)) {
        return {lower_crop, true};
    }
    return {crop_by_bbox_aspect(image, box, frame.input_side, lower_crop.transform.flipped), false};
}

std::vector<FullOutput> forward_full(PoseModel& model, const Image& image, std::span<const FullRequest> requests,
                                     const EreConfig& ere)
{
    if (image.empty() || image.channels() != 3) {
        throw std::invalid_argument("forward_full: expected a non-empty RGB image");
    }
    if (requests.empty()) {
        return {};
    }
    std::vector<CropResult> lower_crops;
    for (const auto& r : requests) {
        lower_crops.push_back(crop_by_center_scale(image, r.center, r.scale, r.rotation, model.input_side(), r.flip));
    }
    std::vector<StageOutputs> lower = model.run_lower(lower_crops);
    std::vector<CropResult> higher_crops;
    std::vector<FullOutput> out(requests.size());
    for (std::size_t i = 0; i < requests.size(); ++i) {
        EreCrop e = ere_crop(image, lower[i].fused(), lower_crops[i], model.frame(), ere);
        out[i].lower_transform = lower_crops[i].transform;
        out[i].ere_transform = e.crop.transform;
        out[i].ere_fallback = e.fallback;
        higher_crops.push_back(std::move(e.crop));
    }
    std::vector<StageOutputs> higher = model.run_higher(higher_crops, lower);
    for (std::size_t i = 0; i < requests.size(); ++i) {
        out[i].lower = std::move(lower[i]);
        out[i].higher = std::move(higher[i]);
    }
    return out;
}

void save_checkpoint(const std::filesystem::path& path, Network<float>& net, const std::string& skeleton,
                     const TrainConfig& train, const TrainState& state, const nlohmann::json& extra)
{
    nlohmann::json meta = {{"format", "ranet-checkpoint"},
                           {"version", 1},
                           {"model", net.config()},
                           {"fingerprint", net.config().fingerprint()},
                           {"skeleton", skeleton},
                           {"train", train},
                           {"epoch", state.epoch},
                           {"loss_curve", state.loss_curve},
                           {"extra", extra.is_null() ? nlohmann::json::object() : extra}};
    TensorFile file;
    file.metadata = meta.dump();
    const auto params = net.parameters();
    for (const auto* p : params) {
        file.tensors.push_back(named("param/" + p->name, p->value));
    }
    if (!state.optimizer_state.empty()) {
        if (state.optimizer_state.size() != params.size()) {
            throw std::invalid_argument("save_checkpoint: optimizer state does not match the parameters");
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            file.tensors.push_back(named("opt/" + params[i]->name, state.optimizer_state[i]));
        }
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    // Write then rename so an interrupted save never leaves a truncated checkpoint behind.
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    write_tensor_file(file, tmp);
    std::filesystem::rename(tmp, path);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path)
{
    return parse_info(read_tensor_file(path));
}

CheckpointInfo load_checkpoint(const std::filesystem::path& path, Network<float>& net)
{
    const TensorFile file = read_tensor_file(path);
    CheckpointInfo info = parse_info(file);
    if (info.model.fingerprint() != net.config().fingerprint()) {
        throw ConfigMismatchError("checkpoint architecture " + info.model.fingerprint() +
                                  " does not match the requested " + net.config().fingerprint());
    }
    bool has_opt = true;
    for (auto* p : net.parameters()) {
        const NamedTensor& t = file.at("param/" + p->name);
        if (param_shape(t) != p->value.shape()) {
            throw ConfigMismatchError("checkpoint tensor '" + t.name + "' has the wrong shape");
        }
        std::copy(t.data.begin(), t.data.end(), p->value.data());
        has_opt = has_opt && file.find("opt/" + p->name) != nullptr;
    }
    if (has_opt) {
        for (auto* p : net.parameters()) {
            const NamedTensor& t = file.at("opt/" + p->name);
            nn::Tensor<float> s(param_shape(t));
            std::copy(t.data.begin(), t.data.end(), s.data());
            info.state.optimizer_state.push_back(std::move(s));
        }
    }
    return info;
}

std::unique_ptr<NetworkModel> model_from_checkpoint(const std::filesystem::path& path, std::optional<int> expected_joints)
{
    const CheckpointInfo info = read_checkpoint_info(path);
    if (expected_joints && *expected_joints != info.model.joints) {
        throw ConfigMismatchError("checkpoint predicts " + std::to_string(info.model.joints) +
                                  " joints but the dataset skeleton has " + std::to_string(*expected_joints));
    }
    auto model = std::make_unique<NetworkModel>(info.model, 0);
    load_checkpoint(path, model->network());
    return model;
}

} // namespace ranet
