// SPDX-License-Identifier: Apache-2.0
// Command-line front end: ingest, build-pool, train, infer, eval, ablate, sweep-threshold, plot.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ranet/pipeline.hpp"
#include "ranet/plots.hpp"

namespace fs = std::filesystem;
using namespace ranet;

namespace {

constexpr int exit_validation = 2;
constexpr int exit_runtime = 3;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
};

PipelineConfig resolve_config(const Globals& g)
{
    PipelineConfig cfg = g.config.empty() ? PipelineConfig::toy() : load_pipeline_config(g.config);
    if (g.seed) {
        cfg.seed = *g.seed;
    }
    cfg.validate();
    return cfg;
}

void write_json(const fs::path& path, const nlohmann::json& j)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

void print_report(const EvalReport& report)
{
    std::cout << format_table(report) << "\n";
    std::printf("%s@%.2f total: %.2f%% (%d/%d)\n", report.metric.c_str(), report.tau, 100.0 * report.total,
                report.total_correct, report.total_count);
}

LoadedDataset load_eval_set(const std::string& manifest)
{
    DatasetManifest m = read_manifest(manifest);
    m.validate(true);
    return load_dataset(m);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ranet: two-stage human pose estimation toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "pipeline configuration JSON (default: built-in toy configuration)");
    app.add_option("--seed", g.seed, "override the configuration seed");
    app.add_option("--out", g.out, "output directory")->capture_default_str();

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "validate annotations or generate the synthetic dataset");
    std::string format = "synthetic", input, split = "train";
    SyntheticConfig synth;
    ingest_cmd->add_option("--format", format, "mpii_json | lsp_json | synthetic")->capture_default_str();
    ingest_cmd->add_option("--input", input, "annotation file (json formats)");
    ingest_cmd->add_option("--split", split, "train | val | test")->capture_default_str();
    ingest_cmd->add_option("--count", synth.count, "synthetic sample count")->capture_default_str();
    ingest_cmd->add_option("--image-size", synth.image_size, "synthetic image side")->capture_default_str();
    ingest_cmd->add_flag("--occluders", synth.occluders, "paste distractor limbs near joints");

    // build-pool
    auto* pool_cmd = app.add_subcommand("build-pool", "segment body-part patches from parsing masks");
    std::string pool_manifest;
    pool_cmd->add_option("--manifest", pool_manifest, "training manifest with parsing masks")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train the two-stage network");
    std::string train_manifest, pool_dir, resume;
    train_cmd->add_option("--manifest", train_manifest, "training manifest")->required();
    train_cmd->add_option("--pool", pool_dir, "patch pool directory (default: built from the manifest)");
    train_cmd->add_option("--resume", resume, "checkpoint to continue from");

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "write candidate sets and fused poses");
    std::string checkpoint, manifest;
    infer_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    infer_cmd->add_option("--manifest", manifest, "image manifest")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "infer, fuse and score a val/test manifest");
    bool overlays = false;
    eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    eval_cmd->add_option("--manifest", manifest, "val or test manifest")->required();
    eval_cmd->add_flag("--overlays", overlays, "render skeleton overlays");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "train and score module variants");
    std::string val_manifest;
    std::vector<std::string> variant_names;
    ablate_cmd->add_option("--train", train_manifest, "training manifest")->required();
    ablate_cmd->add_option("--val", val_manifest, "validation manifest")->required();
    ablate_cmd->add_option("--variants", variant_names, "rows to run, from a..f (default: all)")->delimiter(',');

    // sweep-threshold
    auto* sweep_cmd = app.add_subcommand("sweep-threshold", "score stored candidates over threshold multipliers");
    std::string candidates;
    std::vector<double> alphas;
    sweep_cmd->add_option("--candidates", candidates, "candidates.jsonl from infer or eval")->required();
    sweep_cmd->add_option("--manifest", manifest, "ground-truth manifest")->required();
    sweep_cmd->add_option("--alphas", alphas, "threshold multipliers (default: from the configuration)")
        ->delimiter(',');

    // plot
    auto* plot_cmd = app.add_subcommand("plot", "render plots from a report.json");
    std::string report_path;
    plot_cmd->add_option("--report", report_path, "report.json written by eval")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_validation;
    }

    try {
        const fs::path out = g.out;
        if (*ingest_cmd) {
            IngestOptions o;
            o.split = split_from_string(split);
            o.synthetic = synth;
            if (g.seed) {
                o.synthetic.seed = *g.seed;
            }
            const IngestFormat f = ingest_format_from_string(format);
            if (f == IngestFormat::synthetic) {
                const DatasetManifest m = ingest(f, out, o);
                std::printf("wrote %zu synthetic samples to %s\n", m.samples.size(), (out / "manifest.json").c_str());
            } else {
                if (input.empty()) {
                    throw std::invalid_argument("ingest: --input is required for " + format);
                }
                DatasetManifest m = ingest(f, input, o);
                // Stored paths stay valid from the new location.
                for (auto& r : m.samples) {
                    r.image = fs::absolute(m.resolve(r.image));
                    if (r.parsing) {
                        r.parsing = fs::absolute(m.resolve(*r.parsing));
                    }
                }
                write_manifest(m, out / "manifest.json");
                std::printf("validated %zu records; manifest at %s\n", m.samples.size(),
                            (out / "manifest.json").c_str());
            }
        } else if (*pool_cmd) {
            const PipelineConfig cfg = resolve_config(g);
            const LoadedDataset data = load_dataset(read_manifest(pool_manifest), true);
            PoolBuildConfig pc = cfg.pool;
            pc.seed = cfg.seed;
            const PatchPool pool = build_pool(pool_sources(data), pc);
            pool.save(out);
            std::printf("pool: %zu patches (%zu body parts) in %s\n", pool.size(), pool.body_part_count(), out.c_str());
        } else if (*train_cmd) {
            const PipelineConfig cfg = resolve_config(g);
            const LoadedDataset data = load_dataset(read_manifest(train_manifest), cfg.augment.pda_enabled);
            fs::create_directories(out);
            write_json(out / "config.json", cfg);
            TrainHooks hooks;
            hooks.checkpoint = out / "model.ckpt";
            hooks.resume = resume;
            if (!pool_dir.empty()) {
                hooks.pool = PatchPool::load(pool_dir);
            }
            hooks.on_epoch = [](const EpochReport& r) {
                std::printf("epoch %3d  lr %.3g  loss %.6f  (%.1f s)\n", r.epoch, r.lr, r.mean_loss, r.seconds);
                std::fflush(stdout);
            };
            const TrainRun run = train_on_dataset(data, cfg, std::move(hooks));
            write_json(out / "loss_curve.json", run.state.loss_curve);
            std::printf("checkpoint: %s\n", (out / "model.ckpt").c_str());
        } else if (*infer_cmd) {
            const PipelineConfig cfg = resolve_config(g);
            const LoadedDataset data = load_eval_set(manifest);
            auto model = model_from_checkpoint(checkpoint, data.manifest.skeleton->joint_count());
            const EvalOptions eo = EvalOptions::from_config(cfg);
            fs::create_directories(out);
            std::ofstream preds(out / "predictions.jsonl");
            std::ofstream cands(out / "candidates.jsonl");
            for (std::size_t i = 0; i < data.images.size(); ++i) {
                const auto& r = data.manifest.samples[i];
                ImagePrediction p;
                p.image_id = r.id;
                p.candidates =
                    infer(*model, data.images[i], r.center, r.scale, *data.manifest.skeleton, eo.inference, eo.ere);
                p.pose = fuse_pose(p.candidates, data.manifest.skeleton, eo.fusion, eo.ere.visibility);
                write_predictions_jsonl(preds, p);
                write_candidates_jsonl(cands, p.image_id, p.candidates);
            }
            std::printf("predictions for %zu images in %s\n", data.images.size(), out.c_str());
        } else if (*eval_cmd) {
            const PipelineConfig cfg = resolve_config(g);
            const LoadedDataset data = load_eval_set(manifest);
            auto model = model_from_checkpoint(checkpoint, data.manifest.skeleton->joint_count());
            const EvalRun run = run_eval(data, *model, EvalOptions::from_config(cfg));
            write_eval_outputs(run, data, out, {overlays, true});
            print_report(run.report);
        } else if (*ablate_cmd) {
            const PipelineConfig cfg = resolve_config(g);
            const LoadedDataset train = load_dataset(read_manifest(train_manifest), true);
            const LoadedDataset val = load_eval_set(val_manifest);
            std::vector<AblationVariant> variants;
            const auto all = standard_variants();
            if (variant_names.empty()) {
                variants = all;
            }
            for (const auto& name : variant_names) {
                const auto it = std::find_if(all.begin(), all.end(), [&](const auto& v) { return v.name == name; });
                if (it == all.end()) {
                    throw std::invalid_argument("unknown variant '" + name + "' (expected a..f)");
                }
                variants.push_back(*it);
            }
            const AblationTable table =
                run_ablation(train, val, variants, cfg, [](const std::string& s) { std::printf("%s\n", s.c_str()); });
            fs::create_directories(out);
            write_json(out / "ablation.json", table.to_json());
            std::ofstream(out / "ablation.txt") << table.format();
            std::cout << table.format();
        } else if (*sweep_cmd) {
            const PipelineConfig cfg = resolve_config(g);
            const DatasetManifest m = read_manifest(manifest);
            std::ifstream in(candidates);
            if (!in) {
                throw std::runtime_error("cannot open " + candidates);
            }
            const auto images = read_candidates_jsonl(in, m.skeleton->joint_count());
            std::map<std::string, std::size_t> index;
            for (std::size_t i = 0; i < m.samples.size(); ++i) {
                index[m.samples[i].id] = i;
            }
            std::vector<std::vector<CandidateSet>> sets;
            std::vector<std::size_t> rec;
            for (const auto& im : images) {
                const auto it = index.find(im.image_id);
                if (it == index.end()) {
                    throw std::invalid_argument("candidates mention unknown image '" + im.image_id + "'");
                }
                sets.push_back(im.sets);
                rec.push_back(it->second);
            }
            if (alphas.empty()) {
                alphas = cfg.sweep_alphas;
            }
            const auto rows = threshold_sweep(sets, alphas, m.skeleton);
            nlohmann::json result = nlohmann::json::array();
            std::vector<std::pair<double, double>> pts;
            for (const auto& row : rows) {
                std::vector<EvalSample> samples;
                bool heads = true;
                for (std::size_t i = 0; i < row.poses.size(); ++i) {
                    const auto& r = m.samples[rec[i]];
                    heads = heads && r.head_bbox.has_value();
                    samples.push_back({row.poses[i], r.pose, r.head_bbox, r.torso_reference});
                }
                const EvalReport rep = heads ? pckh(samples) : pck(samples);
                result.push_back({{"alpha", row.alpha}, {"accuracy", rep.total}, {"metric", rep.metric}});
                pts.emplace_back(row.alpha, rep.total);
                std::printf("alpha %.3g  %s %.2f%%\n", row.alpha, rep.metric.c_str(), 100.0 * rep.total);
            }
            write_json(out / "threshold_sweep.json", result);
            save_threshold_sweep_plot(pts, out / "threshold_sweep.png");
        } else if (*plot_cmd) {
            std::ifstream in(report_path);
            if (!in) {
                throw std::runtime_error("cannot open " + report_path);
            }
            const nlohmann::json j = nlohmann::json::parse(in);
            const EvalReport report = report_from_json(j.contains("report") ? j["report"] : j);
            save_error_ellipse_plot(report.error_stats, out / "error_ellipses.png");
            if (j.contains("threshold_sweep") && !j["threshold_sweep"].empty()) {
                std::vector<std::pair<double, double>> pts;
                for (const auto& p : j["threshold_sweep"]) {
                    pts.emplace_back(p.at("alpha").get<double>(), p.at("accuracy").get<double>());
                }
                save_threshold_sweep_plot(pts, out / "threshold_sweep.png");
            }
            std::printf("plots written to %s\n", out.c_str());
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_validation;
    } catch (const SchemaError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_validation;
    } catch (const ConfigMismatchError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_validation;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: malformed JSON: %s\n", e.what());
        return exit_validation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_runtime;
    }
    return 0;
}
