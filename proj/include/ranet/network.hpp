// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ranet/model_config.hpp"
#include "ranet/nn/graph.hpp"
#include "ranet/nn/ops.hpp"

namespace ranet {

enum class Stage { lower = 0, higher = 1 };

inline std::string_view stage_prefix(Stage s) { return s == Stage::lower ? "lower" : "higher"; }

/// Graph handles produced by one hourglass stage.
struct StageVars {
    std::vector<nn::Var> heatmaps; // one [N, J, h, w] tensor per stacked hourglass
    nn::Var features;              // [N, C, h, w] features of the last hourglass
};

/// Two-stage stacked-hourglass network with multi-branch stems. Templated on the scalar type
/// so the same code trains in float and is gradient-checked in double.
template <typename T>
class Network {
public:
    Network(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), rng_(seed)
    {
        cfg_.validate();
        for (Stage s : {Stage::lower, Stage::higher}) {
            build_stage(s);
        }
    }

    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;
    Network(Network&&) = default;

    const ModelConfig& config() const noexcept { return cfg_; }

    std::vector<nn::Parameter<T>*> parameters()
    {
        std::vector<nn::Parameter<T>*> out;
        for (auto& p : params_) {
            out.push_back(&p);
        }
        return out;
    }

    std::vector<const nn::Parameter<T>*> parameters() const
    {
        std::vector<const nn::Parameter<T>*> out;
        for (const auto& p : params_) {
            out.push_back(&p);
        }
        return out;
    }

    nn::Parameter<T>* find(std::string_view name)
    {
        for (auto& p : params_) {
            if (p.name == name) {
                return &p;
            }
        }
        return nullptr;
    }

    /// Total scalar parameters whose name starts with `prefix`.
    std::size_t parameter_count(std::string_view prefix = {}) const
    {
        std::size_t n = 0;
        for (const auto& p : params_) {
            if (p.name.starts_with(prefix)) {
                n += p.value.size();
            }
        }
        return n;
    }

    /// Scalars in the 1x1 projections that merge branches >= 2 into the stem output.
    std::size_t merge_projection_parameter_count(Stage s) const
    {
        std::size_t n = 0;
        for (int b = 1; b < cfg_.fps.K; ++b) {
            n += parameter_count(std::string(stage_prefix(s)) + ".fps.b" + std::to_string(b) + ".proj");
        }
        return n;
    }

    /// Area-downsampled inputs for every branch; level i has side input_side / 2^i.
    std::vector<nn::Tensor<T>> pyramid(const nn::Tensor<T>& crop) const
    {
        const nn::Shape s = crop.shape();
        if (s.h != cfg_.fps.input_side || s.w != cfg_.fps.input_side || s.c != 3) {
            throw std::invalid_argument("pyramid: expected [N,3," + std::to_string(cfg_.fps.input_side) + "," +
                                        std::to_string(cfg_.fps.input_side) + "] input, got " + s.str());
        }
        std::vector<nn::Tensor<T>> levels{crop};
        for (int b = 1; b < cfg_.fps.K; ++b) {
            const auto& prev = levels.back();
            const nn::Shape ps = prev.shape();
            nn::Tensor<T> next(nn::Shape{ps.n, ps.c, ps.h / 2, ps.w / 2});
            for (int n = 0; n < ps.n; ++n) {
                for (int c = 0; c < ps.c; ++c) {
                    for (int y = 0; y < ps.h / 2; ++y) {
                        for (int x = 0; x < ps.w / 2; ++x) {
                            next.at(n, c, y, x) = T(0.25) * (prev.at(n, c, 2 * y, 2 * x) + prev.at(n, c, 2 * y, 2 * x + 1) +
                                                             prev.at(n, c, 2 * y + 1, 2 * x) +
                                                             prev.at(n, c, 2 * y + 1, 2 * x + 1));
                        }
                    }
                }
            }
            levels.push_back(std::move(next));
        }
        return levels;
    }

    /// Stem of stage `s`: every branch reaches feature_side; extra branches are projected to C
    /// channels and summed onto branch 0.
    nn::Var fps_forward(nn::Graph<T>& g, Stage s, std::span<const nn::Var> levels)
    {
        const auto& f = cfg_.fps;
        if (static_cast<int>(levels.size()) != f.K) {
            throw std::invalid_argument("fps_forward: expected " + std::to_string(f.K) + " pyramid levels");
        }
        for (int b = 0; b < f.K; ++b) {
            const nn::Shape sh = g.value(levels[b]).shape();
            if (sh.h != f.branch_side(b) || sh.w != f.branch_side(b) || sh.c != 3) {
                throw std::invalid_argument("fps_forward: branch " + std::to_string(b) + " expects side " +
                                            std::to_string(f.branch_side(b)) + ", got " + sh.str());
            }
        }
        auto& st = stages_[static_cast<int>(s)];
        nn::Var x = levels[0];
        x = nn::relu(g, st.stem_conv(g, x));
        x = st.stem_res1(g, x);
        x = nn::max_pool2(g, x);
        x = st.stem_res2(g, x);
        for (int b = 1; b < f.K; ++b) {
            const auto& br = st.branches[b - 1];
            nn::Var y = levels[b];
            for (const auto& conv : br.down) {
                y = nn::relu(g, conv(g, y));
            }
            y = br.res(g, y);
            for (int u = 0; u < br.upsamples; ++u) {
                y = nn::upsample2(g, y);
            }
            y = br.proj(g, nn::relu(g, y));
            x = nn::add(g, x, y);
        }
        return x;
    }

    /// Hourglass stage. `prior` (higher stage only) is projected and added to the stem features.
    StageVars stage_forward(nn::Graph<T>& g, Stage s, nn::Var features, std::optional<nn::Var> prior = std::nullopt)
    {
        const nn::Shape fs = g.value(features).shape();
        const int side = cfg_.fps.feature_side;
        if (fs.c != cfg_.fps.channels || fs.h != side || fs.w != side) {
            throw std::invalid_argument("stage_forward: features " + fs.str() + " do not match the configuration");
        }
        auto& st = stages_[static_cast<int>(s)];
        nn::Var x = features;
        if (prior) {
            if (s != Stage::higher) {
                throw std::invalid_argument("stage_forward: prior features are only accepted by the higher stage");
            }
            if (g.value(*prior).shape() != fs) {
                throw std::invalid_argument("stage_forward: prior features " + g.value(*prior).shape().str() +
                                            " differ from " + fs.str());
            }
            x = nn::add(g, x, st.prior_proj(g, *prior));
        }
        StageVars out;
        for (int k = 0; k < cfg_.hourglass.stacks; ++k) {
            auto& hg = st.stacks[k];
            nn::Var y = hourglass(g, hg, 0, x);
            y = hg.post_res(g, y);
            nn::Var lin = nn::relu(g, hg.lin(g, y));
            nn::Var heat = hg.head(g, lin);
            out.heatmaps.push_back(heat);
            out.features = lin;
            if (k + 1 < cfg_.hourglass.stacks) {
                x = nn::add(g, x, nn::add(g, hg.merge_features(g, lin), hg.merge_heatmaps(g, heat)));
            }
        }
        return out;
    }

private:
    struct Conv {
        nn::Parameter<T>* w = nullptr;
        nn::Parameter<T>* b = nullptr;
        int stride = 1;
        int pad = 0;

        nn::Var operator()(nn::Graph<T>& g, nn::Var x) const
        {
            return nn::conv2d(g, x, g.parameter(*w), g.parameter(*b), stride, pad);
        }
    };

    // y = skip(x) + conv_b(relu(conv_a(relu(x))))
    struct Residual {
        Conv a;
        Conv b;
        std::optional<Conv> skip;

        nn::Var operator()(nn::Graph<T>& g, nn::Var x) const
        {
            nn::Var h = b(g, nn::relu(g, a(g, nn::relu(g, x))));
            return nn::add(g, skip ? (*skip)(g, x) : x, h);
        }
    };

    struct Branch {
        std::vector<Conv> down;
        Residual res;
        int upsamples = 0;
        Conv proj;
    };

    struct Level {
        Residual up1;
        Residual low1;
        Residual low3;
        std::optional<Residual> bottom;
    };

    struct Hourglass {
        std::vector<Level> levels;
        Residual post_res;
        Conv lin;
        Conv head;
        Conv merge_features;
        Conv merge_heatmaps;
    };

    struct StageParams {
        Conv stem_conv;
        Residual stem_res1;
        Residual stem_res2;
        std::vector<Branch> branches;
        Conv prior_proj;
        std::vector<Hourglass> stacks;
    };

    nn::Var hourglass(nn::Graph<T>& g, const Hourglass& hg, int level, nn::Var x) const
    {
        const Level& lv = hg.levels[level];
        nn::Var up = lv.up1(g, x);
        nn::Var low = lv.low1(g, nn::max_pool2(g, x));
        low = lv.bottom ? (*lv.bottom)(g, low) : hourglass(g, hg, level + 1, low);
        low = lv.low3(g, low);
        return nn::add(g, up, nn::upsample2(g, low));
    }

    Conv conv(const std::string& name, int cin, int cout, int k, int stride, double gain = 1.0)
    {
        Conv c;
        params_.emplace_back(name + ".w", nn::Shape{cout, cin, k, k});
        c.w = &params_.back();
        params_.emplace_back(name + ".b", nn::Shape{1, cout, 1, 1});
        c.b = &params_.back();
        c.stride = stride;
        c.pad = k / 2;
        std::normal_distribution<double> dist(0.0, gain * std::sqrt(2.0 / (cin * k * k)));
        for (auto& v : c.w->value.values()) {
            v = static_cast<T>(dist(rng_));
        }
        return c;
    }

    Residual residual(const std::string& name, int cin, int cout)
    {
        Residual r;
        r.a = conv(name + ".a", cin, cout, 3, 1);
        // Damped second convolution keeps the identity path dominant at initialisation.
        r.b = conv(name + ".b", cout, cout, 3, 1, 0.1);
        if (cin != cout) {
            r.skip = conv(name + ".skip", cin, cout, 1, 1);
        }
        return r;
    }

    void build_stage(Stage s)
    {
        const std::string p(stage_prefix(s));
        const auto& f = cfg_.fps;
        const int C = f.channels;
        const int B = f.branch_channels;
        StageParams st;
        st.stem_conv = conv(p + ".fps.b0.conv7", 3, C, 7, 2);
        st.stem_res1 = residual(p + ".fps.b0.res1", C, C);
        st.stem_res2 = residual(p + ".fps.b0.res2", C, C);
        for (int b = 1; b < f.K; ++b) {
            const std::string bp = p + ".fps.b" + std::to_string(b);
            Branch br;
            const int side = f.branch_side(b);
            if (side > f.feature_side) {
                int cin = 3;
                for (int r = side; r > f.feature_side; r /= 2) {
                    br.down.push_back(conv(bp + ".down" + std::to_string(br.down.size()), cin, B, 3, 2));
                    cin = B;
                }
            } else {
                br.down.push_back(conv(bp + ".down0", 3, B, 3, 1));
                for (int r = side; r < f.feature_side; r *= 2) {
                    ++br.upsamples;
                }
            }
            br.res = residual(bp + ".res", B, B);
            br.proj = conv(bp + ".proj", B, C, 1, 1);
            st.branches.push_back(std::move(br));
        }
        if (s == Stage::higher) {
            st.prior_proj = conv(p + ".prior_proj", C, C, 1, 1);
        }
        for (int k = 0; k < cfg_.hourglass.stacks; ++k) {
            const std::string hp = p + ".hg" + std::to_string(k);
            Hourglass hg;
            for (int d = 0; d < cfg_.hourglass.depth; ++d) {
                const std::string lp = hp + ".l" + std::to_string(d);
                Level lv;
                lv.up1 = residual(lp + ".up1", C, C);
                lv.low1 = residual(lp + ".low1", C, C);
                if (d + 1 == cfg_.hourglass.depth) {
                    lv.bottom = residual(lp + ".bottom", C, C);
                }
                lv.low3 = residual(lp + ".low3", C, C);
                hg.levels.push_back(std::move(lv));
            }
            hg.post_res = residual(hp + ".post", C, C);
            hg.lin = conv(hp + ".lin", C, C, 1, 1);
            // Near-zero head so initial heatmaps start close to the all-zero background.
            hg.head = conv(hp + ".head", C, cfg_.joints, 1, 1, 0.01);
            if (k + 1 < cfg_.hourglass.stacks) {
                hg.merge_features = conv(hp + ".merge_f", C, C, 1, 1);
                hg.merge_heatmaps = conv(hp + ".merge_h", cfg_.joints, C, 1, 1);
            }
            st.stacks.push_back(std::move(hg));
        }
        stages_.push_back(std::move(st));
    }

    ModelConfig cfg_;
    std::mt19937_64 rng_;
    std::deque<nn::Parameter<T>> params_;
    std::vector<StageParams> stages_;
};

} // namespace ranet
