// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include "cvf_oracle.hpp"
#include "ranet/nn/ops.hpp"
#include "ranet/pipeline.hpp"
#include "test_support.hpp"

using namespace ranet;
using ranet::testing::Gen;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

// 1 -------------------------------------------------------------------------------------------

Outcome cvf_oracle_equivalence()
{
    const auto t0 = Clock::now();
    Gen g(101);
    double worst = 0.0;
    int kept_mismatch = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        CandidateSet set;
        const int n = g.integer(1, 40);
        const Point2 centre = g.point(0, 500);
        const double spread = g.uniform(0.1, 50.0);
        for (int i = 0; i < n; ++i) {
            Candidate c;
            const bool outlier = g.coin(0.1);
            c.x = centre.x + g.uniform(-spread, spread) * (outlier ? 10.0 : 1.0);
            c.y = centre.y + g.uniform(-spread, spread) * (outlier ? 10.0 : 1.0);
            c.confidence = trial % 50 == 0 ? 0.0 : g.uniform(0.0, 1.0);
            c.source = {i / 4, (i / 2) % 2 == 1, i % 2 == 0 ? StageTag::lower : StageTag::higher};
            set.candidates.push_back(c);
        }
        if (trial % 97 == 0) {
            for (auto& c : set.candidates) {
                c.x = centre.x;
                c.y = centre.y;
            }
        }
        const FusionResult r = vote_fuse(set, ThresholdMode::mean());
        const auto o = ranet::testing::cvf_oracle(set.candidates, 1.0);
        worst = std::max({worst, std::abs(r.output.x - o.x), std::abs(r.output.y - o.y)});
        kept_mismatch += static_cast<int>(r.kept_indices.size()) != o.kept;
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-9 && kept_mismatch == 0 && t < 10.0,
            fmt("10000 sets, max |diff| %.3g, kept-count mismatches %d, %.2f s", worst, kept_mismatch, t)};
}

// 2 -------------------------------------------------------------------------------------------

Outcome cvf_outlier_echo()
{
    const auto t0 = Clock::now();
    Gen g(202);
    const int trials = 2000;
    const int joints = 16;
    double err_mean = 0.0, err_all = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        for (int j = 0; j < joints; ++j) {
            const Point2 truth = g.point(50, 450);
            CandidateSet set;
            set.joint_index = j;
            std::normal_distribution<double> noise(0.0, 2.0);
            for (int i = 0; i < 24; ++i) {
                set.candidates.push_back({truth.x + noise(g.engine()), truth.y + noise(g.engine()),
                                          g.uniform(0.3, 1.0), {i / 4, (i / 2) % 2 == 1, StageTag::lower}});
            }
            const double angle = g.uniform(0, 2 * std::numbers::pi);
            const double radius = g.uniform(20, 60);
            set.candidates[g.integer(0, 23)] = {truth.x + radius * std::cos(angle), truth.y + radius * std::sin(angle),
                                                g.uniform(0.3, 1.0), {}};
            err_mean += distance(vote_fuse(set, ThresholdMode::mean()).output, truth);
            err_all += distance(vote_fuse(set, ThresholdMode::keep_all()).output, truth);
        }
    }
    err_mean /= trials * joints;
    err_all /= trials * joints;
    const double t = seconds_since(t0);
    return {err_mean < err_all && t < 30.0,
            fmt("%d trials x %d joints, mean-threshold %.4f px vs keep-all %.4f px, %.2f s", trials, joints, err_mean,
                err_all, t)};
}

// 3 -------------------------------------------------------------------------------------------

Outcome heatmap_round_trip()
{
    const auto t0 = Clock::now();
    const Resolution res{64, 64};
    const double bound = 0.25 * std::sqrt(2.0);
    const double ratio = std::pow(target_sigma(Visibility::visible) / target_sigma(Visibility::occluded), 2);
    double worst_decode = 0.0, worst_ratio = 0.0;
    long nonzero_outer = 0;
    bool sigma_ok = target_sigma(Visibility::occluded) == 2.0;
    for (int y = 0; y < res.height; ++y) {
        for (int x = 0; x < res.width; ++x) {
            const Heatmap vis = make_target({double(x), double(y), Visibility::visible, {}}, res);
            const Heatmap occ = make_target({double(x), double(y), Visibility::occluded, {}}, res);
            const Heatmap out = make_target({double(x), double(y), Visibility::outer, {}}, res);
            worst_decode = std::max(worst_decode, distance(decode(vis).position, {double(x), double(y)}));
            // ln h_occ(p) = (sigma_vis / sigma_occ)^2 * ln h_vis(p) at every pixel.
            for (int py = 0; py < res.height; ++py) {
                for (int px = 0; px < res.width; ++px) {
                    const double hv = vis.at(px, py);
                    if (hv < 1e-6) {
                        continue;
                    }
                    const double lo = std::log(static_cast<double>(occ.at(px, py)));
                    const double expect = ratio * std::log(hv);
                    worst_ratio = std::max(worst_ratio, std::abs(lo - expect) / (1.0 + std::abs(expect)));
                }
            }
            for (float v : out.values()) {
                nonzero_outer += v != 0.0f;
            }
        }
    }
    const double t = seconds_since(t0);
    const bool pass = worst_decode <= bound + 1e-12 && worst_ratio < 1e-5 && sigma_ok && nonzero_outer == 0 && t < 30.0;
    return {pass, fmt("64x64 grid, max decode error %.4f px (bound %.4f), sigma-ratio residual %.2g, "
                      "non-zero outer cells %ld, %.2f s",
                      worst_decode, bound, worst_ratio, nonzero_outer, t)};
}

// 4 -------------------------------------------------------------------------------------------

Outcome energy_locality()
{
    const Resolution res{64, 64};
    double worst_square = 0.0, worst_disk = 0.0;
    for (Visibility v : {Visibility::visible, Visibility::occluded}) {
        const double sigma = target_sigma(v);
        const int margin = static_cast<int>(std::ceil(6 * sigma));
        for (int y = margin; y < res.height - margin; ++y) {
            for (int x = margin; x < res.width - margin; ++x) {
                const Heatmap hm = make_target({double(x), double(y), v, {}}, res);
                double total = 0.0, out_square = 0.0, out_disk = 0.0;
                for (int py = 0; py < res.height; ++py) {
                    for (int px = 0; px < res.width; ++px) {
                        const double m = hm.at(px, py);
                        total += m;
                        if (std::abs(px - x) > 3 * sigma || std::abs(py - y) > 3 * sigma) {
                            out_square += m;
                        }
                        if (std::hypot(px - x, py - y) > 3 * sigma) {
                            out_disk += m;
                        }
                    }
                }
                worst_square = std::max(worst_square, out_square / total);
                worst_disk = std::max(worst_disk, out_disk / total);
            }
        }
    }
    return {worst_square < 0.003,
            fmt("max mass outside the 3-sigma window %.4f%% (radius-3-sigma disk, informational: %.4f%%)",
                100 * worst_square, 100 * worst_disk)};
}

// 5 -------------------------------------------------------------------------------------------

Outcome geometry_round_trips()
{
    Gen g(505);
    Image img(320, 240, 3, 0.5f);
    double worst = 0.0;
    int pose_mismatch = 0;
    auto sk = SkeletonSpec::mpii();
    for (int i = 0; i < 10000; ++i) {
        CropTransform t;
        switch (i % 3) {
        case 0:
            t = crop_by_center_scale(img, g.point(-50, 350), g.uniform(0.05, 8.0), g.uniform(-180, 180),
                                     g.integer(16, 256), g.coin())
                    .transform;
            break;
        case 1: {
            const Point2 a = g.point(-20, 300);
            const BoundingBox box{a.x, a.y, a.x + g.uniform(1, 200), a.y + g.uniform(1, 200)};
            t = crop_by_bbox_aspect(img, box, g.integer(16, 256), g.coin()).transform;
            break;
        }
        default:
            t.source_box = {0, 0, g.uniform(1, 500), g.uniform(1, 500)};
            t.output_width = g.integer(8, 512);
            t.output_height = g.integer(8, 512);
            t.zoom = g.uniform(0.05, 20.0);
            t.rotation = g.uniform(-180, 180);
            t.flipped = g.coin();
            t.output_center = g.point(0, 256);
        }
        const Point2 p = g.point(-1000, 1000);
        const Point2 a = t.inverse(t.forward(p));
        const Point2 b = t.forward(t.inverse(p));
        worst = std::max({worst, distance(a, p), distance(b, p)});
        if (i % 10 == 0) {
            const Pose pose = ranet::testing::random_pose(g, sk, -100, 400);
            const Pose back = map_pose(map_pose(pose, t, MapDirection::forward), t, MapDirection::inverse);
            for (int j = 0; j < pose.size(); ++j) {
                pose_mismatch += distance(back[j].position(), pose[j].position()) > 1e-6 ||
                                 back[j].visibility != pose[j].visibility;
            }
        }
    }

    // ERE crops through the full two-stage chain at a 256 input.
    const int input = 256;
    GroundTruthStub stub(input, 64, sk->joint_count());
    int ere_checked = 0, ere_bad = 0;
    double worst_side = 0.0, worst_aspect = 0.0, worst_iso = 0.0;
    for (int i = 0; i < 100; ++i) {
        Pose pose(sk);
        const Point2 c = g.point(100, 220);
        const double w = g.uniform(10, 90), h = g.uniform(10, 90);
        for (int j = 0; j < pose.size(); ++j) {
            pose[j] = {c.x + g.uniform(-w, w), c.y + g.uniform(-h, h), Visibility::visible, {}};
        }
        stub.set_pose(pose);
        const FullRequest req{c, g.uniform(0.8, 1.5), 0.0, g.coin()};
        const auto out = forward_full(stub, img, std::span<const FullRequest>(&req, 1));
        if (out[0].ere_fallback) {
            continue;
        }
        ++ere_checked;
        const CropTransform& e = out[0].ere_transform;
        const BoundingBox content = content_region(e);
        worst_side = std::max(worst_side, std::abs(std::max(content.width(), content.height()) - input));
        worst_aspect = std::max(worst_aspect, std::abs(content.width() / content.height() -
                                                       e.source_box.width() / e.source_box.height()));
        const Point2 o = e.forward(c);
        worst_iso = std::max(worst_iso, std::abs(distance(o, e.forward({c.x + 1, c.y})) -
                                                 distance(o, e.forward({c.x, c.y + 1}))));
        ere_bad += e.output_width != input || e.output_height != input;
    }
    const bool pass = worst <= 1e-6 && pose_mismatch == 0 && ere_checked >= 90 && ere_bad == 0 && worst_side < 1e-9 &&
                      worst_aspect < 1e-9 && worst_iso < 1e-9;
    return {pass, fmt("10000 points, max round-trip error %.3g px, pose mismatches %d; %d ERE crops, long-side "
                      "error %.3g, aspect error %.3g, anisotropy %.3g",
                      worst, pose_mismatch, ere_checked, worst_side, worst_aspect, worst_iso)};
}

// 6 -------------------------------------------------------------------------------------------

Outcome pda_invariants()
{
    SyntheticConfig sc;
    sc.count = 40;
    sc.seed = 606;
    const LoadedDataset data = synthetic_dataset(sc, Split::train);
    const PatchPool pool = build_pool(pool_sources(data));
    auto policy = MountingPolicy::defaults(*data.manifest.skeleton);
    policy.image_probability = 1.0;

    long leaked = 0, pose_changed = 0, nondeterministic = 0, mounted = 0;
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        const Image& img = data.images[i];
        const Pose pose = data.manifest.samples[i].pose;
        const Pose before = pose;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            std::mt19937_64 a(seed * 1000 + i), b(seed * 1000 + i);
            const PdaResult r1 = apply_pda(img, pose, pool, policy, a);
            const PdaResult r2 = apply_pda(img, pose, pool, policy, b);
            nondeterministic += !(r1.image == r2.image) || r1.record.placements.size() != r2.record.placements.size();
            for (std::size_t k = 0; k < std::min(r1.record.placements.size(), r2.record.placements.size()); ++k) {
                nondeterministic += r1.record.placements[k].patch_index != r2.record.placements[k].patch_index ||
                                    r1.record.placements[k].target_joint != r2.record.placements[k].target_joint;
            }
            const LabelMap support = r1.record.support(img.width(), img.height());
            for (int y = 0; y < img.height(); ++y) {
                for (int x = 0; x < img.width(); ++x) {
                    for (int c = 0; c < img.channels(); ++c) {
                        if (r1.image.at(x, y, c) != img.at(x, y, c) && !support.at(x, y)) {
                            ++leaked;
                        }
                    }
                }
            }
            pose_changed += !(pose == before) || r1.record.relabeled_pose.has_value();
            mounted += static_cast<long>(r1.record.placements.size());
        }
    }

    std::mt19937_64 rng(6060);
    const int draws = 10000;
    int checked = 0, outside = 0;
    double worst_z = 0.0;
    for (int label = 0; label < part_label_count; ++label) {
        const auto& row = policy.affinity[label];
        std::vector<int> counts(row.size(), 0);
        for (int d = 0; d < draws; ++d) {
            ++counts[sample_target_joint(static_cast<PartLabel>(label), policy, rng)];
        }
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double se = std::sqrt(row[j] * (1 - row[j]) / draws);
            const double dev = std::abs(counts[j] / double(draws) - row[j]);
            ++checked;
            if (se > 0) {
                worst_z = std::max(worst_z, dev / se);
            }
            outside += dev > 3 * se + 1e-12;
        }
    }
    const bool pass = mounted > 0 && leaked == 0 && pose_changed == 0 && nondeterministic == 0 && outside == 0;
    return {pass, fmt("%ld patches mounted, %ld pixels outside masks, %ld pose changes, %ld seed mismatches; "
                      "%d affinity cells, max |z| %.2f, %d beyond 3 SE",
                      mounted, leaked, pose_changed, nondeterministic, checked, worst_z, outside)};
}

// 7 -------------------------------------------------------------------------------------------

template <typename T>
StageVars run_stage(nn::Graph<T>& g, Network<T>& net, Stage s, const nn::Tensor<T>& input,
                    std::optional<nn::Var> prior = std::nullopt)
{
    std::vector<nn::Var> levels;
    for (auto& t : net.pyramid(input)) {
        levels.push_back(g.constant(std::move(t)));
    }
    return net.stage_forward(g, s, net.fps_forward(g, s, levels), prior);
}

Outcome gradient_check()
{
    ModelConfig cfg;
    cfg.fps.input_side = 32;
    cfg.fps.feature_side = 8;
    cfg.fps.channels = 4;
    cfg.fps.branch_channels = 2;
    cfg.joints = 2;
    Network<double> net(cfg, 77);
    Gen gen(707);
    auto random_input = [&] {
        nn::Tensor<double> t(nn::Shape{1, 3, 32, 32});
        for (auto& v : t.values()) {
            v = gen.uniform(-0.5, 0.5);
        }
        return t;
    };
    const nn::Tensor<double> lower_in = random_input();
    const nn::Tensor<double> higher_in = random_input();
    nn::Tensor<double> target(nn::Shape{1, 2, 8, 8});
    for (auto& v : target.values()) {
        v = gen.uniform(0, 1);
    }
    for (auto* p : net.parameters()) {
        if (p->name.ends_with(".b")) {
            for (auto& v : p->value.values()) {
                v = gen.uniform(-0.1, 0.1);
            }
        }
    }
    auto loss_of = [&](bool record) {
        nn::Graph<double> g(record);
        const StageVars lo = run_stage(g, net, Stage::lower, lower_in);
        const StageVars hi = run_stage(g, net, Stage::higher, higher_in, lo.features);
        const std::vector<nn::Var> terms{nn::mse(g, lo.heatmaps[0], target), nn::mse(g, hi.heatmaps[0], target)};
        const std::vector<double> w{1.0, 1.0};
        const nn::Var l = nn::weighted_sum(g, std::span<const nn::Var>(terms), std::span<const double>(w));
        if (record) {
            g.backward(l);
        }
        return g.value(l)[0];
    };
    for (auto* p : net.parameters()) {
        p->grad.fill(0.0);
    }
    loss_of(true);
    int checked = 0;
    double worst = 0.0;
    std::string worst_name;
    for (auto* p : net.parameters()) {
        for (int k = 0; k < 3; ++k) {
            const std::size_t i = static_cast<std::size_t>(gen.integer(0, static_cast<int>(p->value.size()) - 1));
            const double v = p->value[i];
            const double h = 1e-5;
            p->value[i] = v + h;
            const double fp = loss_of(false);
            p->value[i] = v - h;
            const double fm = loss_of(false);
            p->value[i] = v;
            const double numeric = (fp - fm) / (2 * h);
            const double analytic = p->grad[i];
            const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6});
            if (rel > worst) {
                worst = rel;
                worst_name = p->name;
            }
            ++checked;
        }
    }
    return {worst < 1e-3 && checked > 100,
            fmt("%d parameter entries, max relative error %.3g (%s)", checked, worst, worst_name.c_str())};
}

// 8 -------------------------------------------------------------------------------------------

Outcome stub_end_to_end()
{
    SyntheticConfig sc;
    sc.count = 30;
    sc.seed = 808;
    const LoadedDataset val = synthetic_dataset(sc, Split::val);
    GroundTruthStub stub(256, 64, val.manifest.skeleton->joint_count());
    EvalOptions o;
    o.fusion = ThresholdMode::mean();
    o.before_image = [&](const ManifestRecord& r) { stub.set_pose(r.pose); };
    const EvalRun run = run_eval(val, stub, o);
    double worst = 0.0;
    std::size_t candidates = 0;
    for (std::size_t i = 0; i < run.predictions.size(); ++i) {
        const Pose& gt = val.manifest.samples[i].pose;
        for (int j = 0; j < gt.size(); ++j) {
            if (gt[j].visibility != Visibility::outer) {
                worst = std::max(worst, distance(run.predictions[i].pose[j].position(), gt[j].position()));
            }
        }
        candidates = run.predictions[i].candidates.front().candidates.size();
    }
    return {run.report.metric == "PCKh" && run.report.total == 1.0 && worst < 1.0 && candidates == 24,
            fmt("%zu images, %zu candidates per joint, %s %.2f%%, max fused error %.3f px",
                run.predictions.size(), candidates, run.report.metric.c_str(), 100 * run.report.total, worst)};
}

// 9 and 10 ------------------------------------------------------------------------------------

struct ToyRun {
    std::unique_ptr<Network<float>> network;
    std::vector<double> loss_curve;
};

fs::path work_dir()
{
    const fs::path dir = fs::temp_directory_path() / "ranet_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

LoadedDataset ingest_synthetic(const fs::path& dir, int count, std::uint64_t seed, bool occluders, Split split)
{
    IngestOptions o;
    o.split = split;
    o.synthetic.count = count;
    o.synthetic.seed = seed;
    o.synthetic.occluders = occluders;
    ingest(IngestFormat::synthetic, dir, o);
    DatasetManifest m = read_manifest(dir / "manifest.json");
    m.validate(true);
    return load_dataset(m, split == Split::train);
}

ToyRun train_toy(const LoadedDataset& train, PipelineConfig cfg, const char* tag)
{
    TrainHooks hooks;
    hooks.on_epoch = [tag](const EpochReport& r) {
        std::printf("    [%s] epoch %2d  lr %.2e  loss %.6f  %.1f s\n", tag, r.epoch, r.lr, r.mean_loss, r.seconds);
        std::fflush(stdout);
    };
    TrainRun run = train_on_dataset(train, cfg, std::move(hooks));
    return {std::move(run.network), run.state.loss_curve};
}

struct ToyContext {
    PipelineConfig cfg;
    LoadedDataset train;
    LoadedDataset val;
    LoadedDataset occluded_val;
    ToyRun full;
    bool trained = false;
};

Outcome toy_training(ToyContext& ctx)
{
    const auto t0 = Clock::now();
    const fs::path dir = work_dir();
    ctx.cfg = PipelineConfig::toy();
    ctx.cfg.seed = 909;
    ctx.train = ingest_synthetic(dir / "train", 500, 9001, false, Split::train);
    ctx.val = ingest_synthetic(dir / "val", 100, 9002, false, Split::val);
    ctx.full = train_toy(ctx.train, ctx.cfg, "pda on");
    ctx.trained = true;
    auto model = to_inference_model(*ctx.full.network, ctx.cfg.seed);
    const EvalRun run = run_eval(ctx.val, *model, EvalOptions::from_config(ctx.cfg));
    const double t = seconds_since(t0);
    const auto& curve = ctx.full.loss_curve;
    const double ratio = curve.empty() ? 1.0 : curve.back() / curve.front();
    const bool pass = run.report.metric == "PCKh" && run.report.tau == 0.5 && run.report.total >= 0.9 &&
                      t < 1800.0 && ratio < 0.5;
    return {pass, fmt("500 train / 100 val, %s@0.5 %.2f%%, final/first epoch loss %.3f, %.0f s",
                      run.report.metric.c_str(), 100 * run.report.total, ratio, t)};
}

Outcome ablation_echo(ToyContext& ctx)
{
    if (!ctx.trained) {
        return {false, "toy training did not complete"};
    }
    const fs::path dir = fs::temp_directory_path() / "ranet_acceptance";
    ctx.occluded_val = ingest_synthetic(dir / "occluded_val", 400, 9003, true, Split::val);

    PipelineConfig off = ctx.cfg;
    off.augment.pda_enabled = false;
    const ToyRun no_pda = train_toy(ctx.train, off, "pda off");

    EvalOptions cvf_on = EvalOptions::from_config(ctx.cfg);
    EvalOptions cvf_off = cvf_on;
    cvf_off.fusion = ThresholdMode::keep_all();

    auto full_model = to_inference_model(*ctx.full.network, ctx.cfg.seed);
    auto off_model = to_inference_model(*no_pda.network, ctx.cfg.seed);
    const double pda_on = run_eval(ctx.occluded_val, *full_model, cvf_on).report.total;
    const double pda_off = run_eval(ctx.occluded_val, *off_model, cvf_on).report.total;
    const double keep_all = run_eval(ctx.occluded_val, *full_model, cvf_off).report.total;
    return {pda_on >= pda_off && pda_on >= keep_all,
            fmt("occluded val PCKh: PDA on %.2f%% vs off %.2f%%; CVF on %.2f%% vs off %.2f%%", 100 * pda_on,
                100 * pda_off, 100 * pda_on, 100 * keep_all)};
}

} // namespace

int main()
{
    ToyContext toy;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 CVF oracle equivalence", cvf_oracle_equivalence},
        {"2 CVF outlier echo", cvf_outlier_echo},
        {"3 heatmap round trip", heatmap_round_trip},
        {"4 energy locality", energy_locality},
        {"5 geometry round trips", geometry_round_trips},
        {"6 PDA invariants", pda_invariants},
        {"7 gradient check", gradient_check},
        {"8 stub end to end", stub_end_to_end},
        {"9 toy training", [&] { return toy_training(toy); }},
        {"10 ablation echo", [&] { return ablation_echo(toy); }},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
