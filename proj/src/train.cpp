// SPDX-License-Identifier: Apache-2.0
#include "ranet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ranet {

namespace {

std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    return std::mt19937_64(seq);
}

nn::Tensor<float> targets_to_tensor(std::span<const HeatmapStack> stacks)
{
    const auto res = stacks.front().resolution();
    const int J = stacks.front().joint_count();
    nn::Tensor<float> t(nn::Shape{static_cast<int>(stacks.size()), J, res.height, res.width});
    for (std::size_t n = 0; n < stacks.size(); ++n) {
        for (int j = 0; j < J; ++j) {
            const auto v = stacks[n].maps[j].values();
            std::copy(v.begin(), v.end(), t.plane(static_cast<int>(n), j));
        }
    }
    return t;
}

// Builds the two-stage graph for a batch; returns the graph loss node.
nn::Var batch_graph(nn::Graph<float>& g, Network<float>& net, std::vector<PreparedSample>& batch, const TrainOptions& opts)
{
    const auto& cfg = net.config();
    const HeatmapFrame frame{cfg.fps.input_side, cfg.fps.feature_side};
    const Resolution res{cfg.fps.feature_side, cfg.fps.feature_side};

    std::vector<CropResult> lower_crops;
    std::vector<HeatmapStack> lower_targets;
    for (auto& s : batch) {
        lower_crops.push_back(s.lower_crop);
        lower_targets.push_back(s.lower_target);
    }
    std::vector<nn::Var> levels;
    for (auto& t : net.pyramid(crops_to_tensor(lower_crops))) {
        levels.push_back(g.constant(std::move(t)));
    }
    const StageVars lower = net.stage_forward(g, Stage::lower, net.fps_forward(g, Stage::lower, levels));

    // The higher crop is a data-dependent constant: no gradient flows through the box.
    std::vector<CropResult> higher_crops;
    std::vector<HeatmapStack> higher_targets;
    for (std::size_t n = 0; n < batch.size(); ++n) {
        std::vector<HeatmapStack> per_stack;
        for (nn::Var h : lower.heatmaps) {
            per_stack.push_back(stack_from_tensor(g.value(h), static_cast<int>(n), StageTag::lower));
        }
        const HeatmapStack fused = per_stack.size() == 1 ? per_stack.front() : fuse_heatmaps(per_stack);
        EreCrop e = ere_crop(batch[n].image, fused, batch[n].lower_crop, frame, opts.ere);
        const Pose in_crop = map_pose(batch[n].pose, e.crop.transform, MapDirection::forward, true);
        higher_targets.push_back(make_target_stack(frame.to_heatmap(in_crop), res, StageTag::higher));
        higher_crops.push_back(std::move(e.crop));
    }
    levels.clear();
    for (auto& t : net.pyramid(crops_to_tensor(higher_crops))) {
        levels.push_back(g.constant(std::move(t)));
    }
    const StageVars higher =
        net.stage_forward(g, Stage::higher, net.fps_forward(g, Stage::higher, levels), lower.features);

    const nn::Tensor<float> lt = targets_to_tensor(lower_targets);
    const nn::Tensor<float> ht = targets_to_tensor(higher_targets);
    std::vector<nn::Var> terms;
    for (nn::Var h : lower.heatmaps) {
        terms.push_back(nn::mse(g, h, lt));
    }
    for (nn::Var h : higher.heatmaps) {
        terms.push_back(nn::mse(g, h, ht));
    }
    const std::vector<double> weights(terms.size(), 1.0);
    return nn::weighted_sum(g, std::span<const nn::Var>(terms), std::span<const double>(weights));
}

} // namespace

PreparedSample prepare_sample(const TrainSample& sample, const TrainOptions& opts, int input_side, int heatmap_side,
                              std::uint64_t epoch, std::uint64_t index)
{
    if (!sample.image) {
        throw std::invalid_argument("training sample without image");
    }
    auto rng = keyed_rng(opts.seed, epoch, index);
    const Image* source = sample.image;
    Image composited;
    if (opts.augment.pda_enabled && opts.pool && !opts.pool->empty()) {
        const MountingPolicy policy = opts.mounting ? *opts.mounting : MountingPolicy::defaults(sample.pose.skeleton());
        composited = apply_pda(*source, sample.pose, *opts.pool, policy, rng).image;
        source = &composited;
    }
    StandardResult aug = apply_standard(*source, sample.pose, sample.center, opts.augment, rng);
    const Point2 center = aug.transform.forward(sample.center);

    PreparedSample out;
    out.lower_crop = crop_by_center_scale(aug.image, center, sample.scale, 0.0, input_side);
    const HeatmapFrame frame{input_side, heatmap_side};
    const Pose in_crop = map_pose(aug.pose, out.lower_crop.transform, MapDirection::forward, true);
    out.lower_target = make_target_stack(frame.to_heatmap(in_crop), {heatmap_side, heatmap_side}, StageTag::lower);
    out.image = std::move(aug.image);
    out.pose = std::move(aug.pose);
    return out;
}

void train(Network<float>& net, std::span<const TrainSample> samples, const TrainOptions& opts, TrainState& state)
{
    opts.train.validate();
    opts.augment.validate();
    if (samples.empty()) {
        throw std::invalid_argument("train: empty dataset");
    }
    const auto& cfg = net.config();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].pose.size() != cfg.joints) {
            throw ConfigMismatchError("train: sample " + std::to_string(i) + " has " +
                                      std::to_string(samples[i].pose.size()) + " joints, model expects " +
                                      std::to_string(cfg.joints));
        }
    }
    auto params = net.parameters();
    nn::RmsProp<float> opt(params);
    if (!state.optimizer_state.empty()) {
        if (state.optimizer_state.size() != opt.state().size()) {
            throw ConfigMismatchError("train: optimizer state does not match the network");
        }
        opt.state() = state.optimizer_state;
    }

    const int batch_size = opts.train.batch_size;
    const long batches_per_epoch = static_cast<long>((samples.size() + batch_size - 1) / batch_size);
    for (int epoch = state.epoch; epoch < opts.train.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const double lr = lr_at_epoch(opts.train, epoch);
        std::vector<std::size_t> order(samples.size());
        std::iota(order.begin(), order.end(), 0);
        auto shuffle_rng = keyed_rng(opts.seed, static_cast<std::uint64_t>(epoch), ~std::uint64_t{0});
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += batch_size) {
            const std::size_t b1 = std::min(order.size(), b0 + batch_size);
            std::vector<PreparedSample> batch;
            for (std::size_t k = b0; k < b1; ++k) {
                batch.push_back(prepare_sample(samples[order[k]], opts, cfg.fps.input_side, cfg.fps.feature_side,
                                               static_cast<std::uint64_t>(epoch), order[k]));
            }
            opt.zero_grad();
            nn::Graph<float> g(true);
            const nn::Var loss = batch_graph(g, net, batch, opts);
            const double value = g.value(loss)[0];
            if (!std::isfinite(value)) {
                throw std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batches) + " (lr " + std::to_string(lr) + ")");
            }
            g.backward(loss);
            opt.step(lr_at_step(opts.train, epoch, epoch * batches_per_epoch + batches));
            loss_sum += value;
            ++batches;
        }

        state.epoch = epoch + 1;
        state.loss_curve.push_back(loss_sum / batches);
        state.optimizer_state = opt.state();
        if (!opts.checkpoint.empty()) {
            save_checkpoint(opts.checkpoint, net, opts.skeleton, opts.train, state);
        }
        if (opts.on_epoch) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            opts.on_epoch({epoch, lr, state.loss_curve.back(), secs});
        }
    }
}

double evaluate_loss(Network<float>& net, std::span<const TrainSample> samples, const TrainOptions& opts)
{
    TrainOptions plain = opts;
    plain.augment = AugmentConfig::identity();
    const auto& cfg = net.config();
    std::vector<PreparedSample> batch;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        batch.push_back(prepare_sample(samples[i], plain, cfg.fps.input_side, cfg.fps.feature_side, 0, i));
    }
    nn::Graph<float> g(false);
    return g.value(batch_graph(g, net, batch, plain))[0];
}

} // namespace ranet
