// SPDX-License-Identifier: Apache-2.0
#include "ranet/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "ranet/plots.hpp"

namespace ranet {

namespace {

using nlohmann::json;

void require(bool ok, const std::string& message)
{
    if (!ok) {
        throw std::invalid_argument(message);
    }
}

// Reject keys that the defaults do not have, recursing into objects.
void check_keys(const json& given, const json& reference, const std::string& where)
{
    if (!given.is_object()) {
        throw std::invalid_argument("config: '" + where + "' must be an object");
    }
    for (const auto& [key, value] : given.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!reference.contains(key)) {
            throw std::invalid_argument("config: unknown key '" + path + "'");
        }
        if (reference[key].is_object()) {
            check_keys(value, reference[key], path);
        }
    }
}

json augment_json(const AugmentConfig& c)
{
    return {{"scale_range", c.scale_range},   {"rotation_range", c.rotation_range}, {"hflip_prob", c.hflip_prob},
            {"color_jitter", c.color_jitter}, {"pda_enabled", c.pda_enabled}};
}

void augment_from(const json& j, AugmentConfig& c)
{
    c.scale_range = j.value("scale_range", c.scale_range);
    c.rotation_range = j.value("rotation_range", c.rotation_range);
    c.hflip_prob = j.value("hflip_prob", c.hflip_prob);
    c.color_jitter = j.value("color_jitter", c.color_jitter);
    c.pda_enabled = j.value("pda_enabled", c.pda_enabled);
}

json pool_json(const PoolBuildConfig& c)
{
    return {{"min_area", c.min_area},
            {"max_aspect", c.max_aspect},
            {"min_solidity", c.min_solidity},
            {"background_per_image", c.background_per_image},
            {"background_side_fraction", c.background_side_fraction}};
}

void pool_from(const json& j, PoolBuildConfig& c)
{
    c.min_area = j.value("min_area", c.min_area);
    c.max_aspect = j.value("max_aspect", c.max_aspect);
    c.min_solidity = j.value("min_solidity", c.min_solidity);
    c.background_per_image = j.value("background_per_image", c.background_per_image);
    c.background_side_fraction = j.value("background_side_fraction", c.background_side_fraction);
}

json mounting_json(const MountingPolicy& c)
{
    return {{"image_probability", c.image_probability},
            {"min_patches", c.min_patches},
            {"max_patches_per_image", c.max_patches_per_image},
            {"on_joint_ratio", c.on_joint_ratio},
            {"jitter_radius", c.jitter_radius},
            {"near_inner", c.near_inner},
            {"near_outer", c.near_outer},
            {"relabel_occluded", c.relabel_occluded},
            {"affinity", c.affinity}};
}

void mounting_from(const json& j, MountingPolicy& c)
{
    c.image_probability = j.value("image_probability", c.image_probability);
    c.min_patches = j.value("min_patches", c.min_patches);
    c.max_patches_per_image = j.value("max_patches_per_image", c.max_patches_per_image);
    c.on_joint_ratio = j.value("on_joint_ratio", c.on_joint_ratio);
    c.jitter_radius = j.value("jitter_radius", c.jitter_radius);
    c.near_inner = j.value("near_inner", c.near_inner);
    c.near_outer = j.value("near_outer", c.near_outer);
    c.relabel_occluded = j.value("relabel_occluded", c.relabel_occluded);
    c.affinity = j.value("affinity", c.affinity);
}

json ere_json(const EreConfig& c)
{
    return {{"enabled", c.enabled},
            {"margin", c.margin},
            {"visibility", {{"visible", c.visibility.visible}, {"occluded", c.visibility.occluded}}}};
}

void ere_from(const json& j, EreConfig& c)
{
    c.enabled = j.value("enabled", c.enabled);
    c.margin = j.value("margin", c.margin);
    if (j.contains("visibility")) {
        c.visibility.visible = j["visibility"].value("visible", c.visibility.visible);
        c.visibility.occluded = j["visibility"].value("occluded", c.visibility.occluded);
    }
}

json inference_json(const InferenceConfig& c)
{
    return {{"scales", c.scales},
            {"flip", c.flip},
            {"stages", std::string(to_string(c.stages))},
            {"crop_padding", c.crop_padding}};
}

void inference_from(const json& j, InferenceConfig& c)
{
    c.scales = j.value("scales", c.scales);
    c.flip = j.value("flip", c.flip);
    if (j.contains("stages")) {
        c.stages = stages_used_from_string(j["stages"].get<std::string>());
    }
    c.crop_padding = j.value("crop_padding", c.crop_padding);
}

std::vector<TrainSample> train_samples(const LoadedDataset& data, int input_side, double crop_padding)
{
    std::vector<TrainSample> out;
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        const auto& r = data.manifest.samples[i];
        out.push_back({&data.images[i], r.pose, r.center, person_crop_scale(r.scale, input_side, crop_padding)});
    }
    return out;
}

double total_accuracy(const LoadedDataset& data, const std::vector<Pose>& poses, std::optional<double> tau)
{
    std::vector<EvalSample> samples;
    bool heads = true;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        const auto& r = data.manifest.samples[i];
        heads = heads && r.head_bbox.has_value();
        samples.push_back({poses[i], r.pose, r.head_bbox, r.torso_reference});
    }
    return heads ? pckh(samples, tau.value_or(0.5)).total : pck(samples, tau.value_or(0.2)).total;
}

} // namespace

std::string_view to_string(StagesUsed s)
{
    switch (s) {
    case StagesUsed::lower:
        return "lower";
    case StagesUsed::higher:
        return "higher";
    case StagesUsed::both:
        return "both";
    }
    return "both";
}

StagesUsed stages_used_from_string(std::string_view name)
{
    if (name == "lower") {
        return StagesUsed::lower;
    }
    if (name == "higher") {
        return StagesUsed::higher;
    }
    if (name == "both") {
        return StagesUsed::both;
    }
    throw std::invalid_argument("unknown stages_used '" + std::string(name) + "'");
}

int InferenceConfig::candidates_per_joint() const
{
    return static_cast<int>(scales.size()) * (flip ? 2 : 1) * (stages == StagesUsed::both ? 2 : 1);
}

void InferenceConfig::validate() const
{
    require(!scales.empty(), "inference: at least one scale is required");
    for (double s : scales) {
        require(s > 0.0 && std::isfinite(s), "inference: scales must be positive");
    }
    require(crop_padding > 0.0, "inference: crop_padding must be positive");
}

double person_crop_scale(double person_scale, int input_side, double crop_padding)
{
    require(person_scale > 0.0 && input_side > 0, "person_crop_scale: scale and input side must be positive");
    return 200.0 * person_scale * crop_padding / input_side;
}

std::vector<CandidateSet> infer(PoseModel& model, const Image& image, Point2 center, double person_scale,
                                const SkeletonSpec& skeleton, const InferenceConfig& cfg, const EreConfig& ere)
{
    cfg.validate();
    const int J = skeleton.joint_count();
    if (model.joint_count() != J) {
        throw ConfigMismatchError("model predicts " + std::to_string(model.joint_count()) + " joints, skeleton '" +
                                  skeleton.name + "' has " + std::to_string(J));
    }
    const double base = person_crop_scale(person_scale, model.input_side(), cfg.crop_padding);
    std::vector<FullRequest> requests;
    std::vector<SourceTag> tags;
    for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
        for (bool flip : cfg.flip ? std::vector<bool>{false, true} : std::vector<bool>{false}) {
            requests.push_back({center, base * cfg.scales[i], 0.0, flip});
            tags.push_back({static_cast<int>(i), flip, StageTag::lower});
        }
    }
    const std::vector<FullOutput> outputs = forward_full(model, image, requests, ere);
    const std::vector<int> perm = skeleton.flip_permutation();
    const HeatmapFrame frame = model.frame();

    std::vector<CandidateSet> sets(J);
    for (int j = 0; j < J; ++j) {
        sets[j].joint_index = j;
    }
    for (std::size_t r = 0; r < outputs.size(); ++r) {
        for (StageTag stage : {StageTag::lower, StageTag::higher}) {
            if ((stage == StageTag::lower && cfg.stages == StagesUsed::higher) ||
                (stage == StageTag::higher && cfg.stages == StagesUsed::lower)) {
                continue;
            }
            const bool lower = stage == StageTag::lower;
            const HeatmapStack stack = lower ? outputs[r].lower.fused() : outputs[r].higher.fused();
            const CropTransform& t = lower ? outputs[r].lower_transform : outputs[r].ere_transform;
            for (int c = 0; c < J; ++c) {
                const DecodedJoint d = decode(stack.maps[c]);
                const Point2 p = t.inverse(frame.to_input(d.position));
                // A flipped crop shows the left joints where the right ones were.
                const int joint = tags[r].flipped ? perm[c] : c;
                SourceTag tag = tags[r];
                tag.stage = stage;
                sets[joint].candidates.push_back({p.x, p.y, d.confidence, tag});
            }
        }
    }
    return sets;
}

PipelineConfig PipelineConfig::toy()
{
    PipelineConfig c;
    c.model.fps.input_side = 64;
    c.model.fps.feature_side = 16;
    c.model.fps.channels = 32;
    c.model.fps.branch_channels = 8;
    c.model.hourglass.depth = 2;
    c.model.joints = 16;
    c.train.lr = 1e-3;
    c.train.epochs = 30;
    c.train.batch_size = 16;
    c.train.lr_halving_epochs = {18, 25};
    c.train.warmup_steps = 100;
    c.augment.rotation_range = {-30.0, 30.0};
    return c;
}

void PipelineConfig::validate() const
{
    model.validate();
    train.validate();
    augment.validate();
    inference.validate();
    require(cvf_alpha > 0.0, "config: cvf_alpha must be positive");
    for (double a : sweep_alphas) {
        require(a > 0.0 && std::isfinite(a), "config: sweep_alphas must be positive and finite");
    }
    require(ere.margin >= 0.0, "config: ere.margin must be non-negative");
    if (!mounting.affinity.empty()) {
        mounting.validate(model.joints);
    }
}

void to_json(json& j, const PipelineConfig& c)
{
    j = {{"model", c.model},
         {"train", c.train},
         {"augment", augment_json(c.augment)},
         {"pool", pool_json(c.pool)},
         {"mounting", mounting_json(c.mounting)},
         {"ere", ere_json(c.ere)},
         {"inference", inference_json(c.inference)},
         {"cvf", c.cvf},
         {"cvf_alpha", c.cvf_alpha},
         {"sweep_alphas", c.sweep_alphas},
         {"seed", c.seed}};
}

void from_json(const json& j, PipelineConfig& c)
{
    check_keys(j, json(PipelineConfig{}), "");
    if (j.contains("model")) {
        j["model"].get_to(c.model);
    }
    if (j.contains("train")) {
        j["train"].get_to(c.train);
    }
    if (j.contains("augment")) {
        augment_from(j["augment"], c.augment);
    }
    if (j.contains("pool")) {
        pool_from(j["pool"], c.pool);
    }
    if (j.contains("mounting")) {
        mounting_from(j["mounting"], c.mounting);
    }
    if (j.contains("ere")) {
        ere_from(j["ere"], c.ere);
    }
    if (j.contains("inference")) {
        inference_from(j["inference"], c.inference);
    }
    c.cvf = j.value("cvf", c.cvf);
    c.cvf_alpha = j.value("cvf_alpha", c.cvf_alpha);
    c.sweep_alphas = j.value("sweep_alphas", c.sweep_alphas);
    c.seed = j.value("seed", c.seed);
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config " + path.string() + ": " + e.what());
    }
    PipelineConfig c;
    try {
        j.get_to(c);
    } catch (const json::exception& e) {
        throw std::invalid_argument("config " + path.string() + ": " + e.what());
    }
    c.validate();
    return c;
}

EvalOptions EvalOptions::from_config(const PipelineConfig& cfg)
{
    EvalOptions o;
    o.inference = cfg.inference;
    o.ere = cfg.ere;
    o.fusion = cfg.cvf ? ThresholdMode::scaled(cfg.cvf_alpha) : ThresholdMode::keep_all();
    o.sweep_alphas = cfg.sweep_alphas;
    return o;
}

EvalRun run_eval(const LoadedDataset& data, PoseModel& model, const EvalOptions& options)
{
    const DatasetManifest& m = data.manifest;
    if (data.images.size() != m.samples.size()) {
        throw std::invalid_argument("run_eval: images and records differ in count");
    }
    if (m.split == Split::train) {
        throw std::invalid_argument("run_eval: expected a val or test manifest");
    }
    options.inference.validate();
    const std::size_t n = m.samples.size();
    EvalRun run;
    run.predictions.resize(n);

    auto process = [&](std::size_t i) {
        const auto& r = m.samples[i];
        auto sets = infer(model, data.images[i], r.center, r.scale, *m.skeleton, options.inference, options.ere);
        ImagePrediction& p = run.predictions[i];
        p.image_id = r.id;
        p.pose = fuse_pose(sets, m.skeleton, options.fusion, options.ere.visibility);
        p.candidates = std::move(sets);
    };
    const int workers = options.before_image ? 1 : std::max(1, options.workers);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            if (options.before_image) {
                options.before_image(m.samples[i]);
            }
            process(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        process(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) {
                            error = std::current_exception();
                        }
                    }
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
        if (error) {
            std::rethrow_exception(error);
        }
    }

    std::vector<EvalSample> samples;
    bool heads = true;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = m.samples[i];
        heads = heads && r.head_bbox.has_value();
        samples.push_back({run.predictions[i].pose, r.pose, r.head_bbox, r.torso_reference});
    }
    run.report = heads ? pckh(samples, options.tau.value_or(0.5)) : pck(samples, options.tau.value_or(0.2));
    run.report.error_stats = error_ellipses(samples);

    for (double alpha : options.sweep_alphas) {
        std::vector<Pose> poses;
        for (const auto& p : run.predictions) {
            poses.push_back(fuse_pose(p.candidates, m.skeleton, ThresholdMode::scaled(alpha), options.ere.visibility));
        }
        run.sweep.push_back({alpha, total_accuracy(data, poses, options.tau)});
    }
    return run;
}

void write_predictions_jsonl(std::ostream& out, const ImagePrediction& prediction)
{
    for (int j = 0; j < prediction.pose.size(); ++j) {
        const Keypoint& k = prediction.pose[j];
        const json line = {{"image_id", prediction.image_id},
                           {"joint_index", j},
                           {"x", k.x},
                           {"y", k.y},
                           {"confidence", k.confidence.value_or(0.0)},
                           {"visibility", std::string(to_string(k.visibility))}};
        out << line.dump() << "\n";
    }
}

void write_eval_outputs(const EvalRun& run, const LoadedDataset& data, const std::filesystem::path& dir,
                        const EvalOutputOptions& options)
{
    std::filesystem::create_directories(dir);
    json sweep = json::array();
    for (const auto& s : run.sweep) {
        sweep.push_back({{"alpha", s.alpha}, {"accuracy", s.accuracy}});
    }
    {
        std::ofstream out(dir / "report.json");
        out << json{{"report", to_json(run.report)}, {"images", run.predictions.size()}, {"threshold_sweep", sweep}}
                   .dump(2)
            << "\n";
    }
    {
        std::ofstream preds(dir / "predictions.jsonl");
        std::ofstream cands(dir / "candidates.jsonl");
        for (const auto& p : run.predictions) {
            write_predictions_jsonl(preds, p);
            write_candidates_jsonl(cands, p.image_id, p.candidates);
        }
        if (!preds || !cands) {
            throw std::runtime_error("cannot write predictions under " + dir.string());
        }
    }
    if (options.overlays) {
        for (std::size_t i = 0; i < run.predictions.size(); ++i) {
            save_overlay(data.images[i], run.predictions[i].pose, &data.manifest.samples[i].pose,
                         dir / "overlays" / (run.predictions[i].image_id + ".png"));
        }
    }
    if (options.plots) {
        save_error_ellipse_plot(run.report.error_stats, dir / "plots" / "error_ellipses.png");
        if (!run.sweep.empty()) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& s : run.sweep) {
                pts.emplace_back(s.alpha, s.accuracy);
            }
            save_threshold_sweep_plot(pts, dir / "plots" / "threshold_sweep.png");
        }
    }
}

TrainRun train_on_dataset(const LoadedDataset& data, const PipelineConfig& cfg, TrainHooks hooks)
{
    cfg.validate();
    const DatasetManifest& m = data.manifest;
    if (cfg.model.joints != m.skeleton->joint_count()) {
        throw ConfigMismatchError("model has " + std::to_string(cfg.model.joints) + " joints, dataset skeleton '" +
                                  m.skeleton->name + "' has " + std::to_string(m.skeleton->joint_count()));
    }
    TrainRun run;
    if (hooks.pool) {
        run.pool = std::move(*hooks.pool);
    } else if (cfg.augment.pda_enabled) {
        PoolBuildConfig pc = cfg.pool;
        pc.seed = cfg.seed;
        run.pool = build_pool(pool_sources(data), pc);
    }
    run.network = std::make_unique<Network<float>>(cfg.model, cfg.seed);
    if (!hooks.resume.empty()) {
        run.state = load_checkpoint(hooks.resume, *run.network).state;
    }
    TrainOptions o;
    o.train = cfg.train;
    o.augment = cfg.augment;
    if (!cfg.mounting.affinity.empty()) {
        o.mounting = cfg.mounting;
    } else {
        MountingPolicy p = MountingPolicy::defaults(*m.skeleton);
        MountingPolicy scalars = cfg.mounting;
        scalars.affinity = p.affinity;
        o.mounting = scalars;
    }
    o.pool = run.pool.empty() ? nullptr : &run.pool;
    o.ere = cfg.ere;
    o.seed = cfg.seed;
    o.skeleton = m.skeleton->name;
    o.checkpoint = hooks.checkpoint;
    o.on_epoch = hooks.on_epoch;
    const auto samples = train_samples(data, cfg.model.fps.input_side, cfg.inference.crop_padding);
    train(*run.network, samples, o, run.state);
    return run;
}

std::unique_ptr<NetworkModel> to_inference_model(const Network<float>& net, std::uint64_t seed)
{
    auto model = std::make_unique<NetworkModel>(net.config(), seed);
    auto dst = model->network().parameters();
    const auto src = net.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i]->value = src[i]->value;
    }
    return model;
}

std::vector<AblationVariant> standard_variants()
{
    return {{"a", false, false, false, false}, {"b", true, false, false, false}, {"c", true, true, false, false},
            {"d", true, true, true, false},    {"e", true, true, false, true},   {"f", true, true, true, true}};
}

std::string AblationTable::format() const
{
    std::size_t w = 3;
    for (const auto& r : rows) {
        w = std::max(w, r.variant.name.size() + 1);
    }
    auto pad = [&](const std::string& s) { return s + std::string(w - s.size(), ' '); };
    std::ostringstream out;
    out << pad("") << "| PDA | FPS | ERE | CVF | " << (rows.empty() ? "PCKh" : rows.front().report.metric) << "\n";
    out << std::string(w, '-') << "+-----+-----+-----+-----+-------\n";
    auto mark = [](bool b) { return b ? "  x  " : "     "; };
    for (const auto& r : rows) {
        char acc[16];
        std::snprintf(acc, sizeof acc, "%.2f", 100.0 * r.report.total);
        out << pad(r.variant.name) << "|" << mark(r.variant.pda) << "|" << mark(r.variant.fps) << "|"
            << mark(r.variant.ere) << "|" << mark(r.variant.cvf) << "| " << acc << "\n";
    }
    return out.str();
}

json AblationTable::to_json() const
{
    json rows_json = json::array();
    for (const auto& r : rows) {
        rows_json.push_back({{"variant", r.variant.name},
                             {"pda", r.variant.pda},
                             {"fps", r.variant.fps},
                             {"ere", r.variant.ere},
                             {"cvf", r.variant.cvf},
                             {"total", r.report.total},
                             {"report", ranet::to_json(r.report)},
                             {"loss_curve", r.loss_curve}});
    }
    return {{"rows", rows_json}};
}

AblationTable run_ablation(const LoadedDataset& train, const LoadedDataset& val,
                           const std::vector<AblationVariant>& variants, const PipelineConfig& cfg,
                           const std::function<void(const std::string&)>& progress)
{
    if (variants.empty()) {
        throw std::invalid_argument("run_ablation: no variants requested");
    }
    struct Trained {
        std::unique_ptr<NetworkModel> model;
        std::vector<double> loss_curve;
    };
    std::map<std::tuple<bool, bool, bool>, Trained> cache;
    auto variant_config = [&](const AblationVariant& v) {
        PipelineConfig c = cfg;
        c.augment.pda_enabled = v.pda;
        c.model.fps.K = v.fps ? std::max(2, cfg.model.fps.K) : 1;
        c.ere.enabled = v.ere;
        c.cvf = v.cvf;
        return c;
    };
    AblationTable table;
    for (const auto& v : variants) {
        const PipelineConfig c = variant_config(v);
        const auto key = std::make_tuple(v.pda, v.fps, v.ere);
        auto it = cache.find(key);
        if (it == cache.end()) {
            if (progress) {
                progress("training variant " + v.name);
            }
            TrainRun run = train_on_dataset(train, c);
            it = cache.emplace(key, Trained{to_inference_model(*run.network), run.state.loss_curve}).first;
        }
        if (progress) {
            progress("evaluating variant " + v.name);
        }
        EvalOptions eo = EvalOptions::from_config(c);
        eo.sweep_alphas.clear();
        const EvalRun er = run_eval(val, *it->second.model, eo);
        table.rows.push_back({v, er.report, it->second.loss_curve});
    }
    return table;
}

} // namespace ranet
