// SPDX-License-Identifier: Apache-2.0
#include "ranet/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace ranet {

namespace {
constexpr double tie_tolerance = 1e-12;
}

FusionResult vote_fuse(const CandidateSet& set, ThresholdMode mode)
{
    const auto& cands = set.candidates;
    const std::size_t n = cands.size();
    if (n == 0) {
        throw std::invalid_argument("vote_fuse: joint " + std::to_string(set.joint_index) + " has no candidates");
    }
    if (!(mode.alpha > 0.0)) {
        throw std::invalid_argument("vote_fuse: threshold scale must be positive");
    }

    Point2 center;
    for (const auto& c : cands) {
        center.x += c.x;
        center.y += c.y;
    }
    center = (1.0 / n) * center;

    std::vector<double> dist(n);
    double mean_dist = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dist[i] = distance(cands[i].position(), center);
        mean_dist += dist[i];
    }
    mean_dist /= n;

    FusionResult result;
    if (mode.keeps_all()) {
        result.threshold_used = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            result.kept_indices.push_back(static_cast<int>(i));
        }
    } else {
        result.threshold_used = mode.alpha * mean_dist;
        // Distances equal to the threshold up to rounding are ties and excluded, so that
        // symmetric configurations (e.g. two candidates) do not depend on summation order.
        const double cutoff = result.threshold_used * (1.0 - tie_tolerance);
        for (std::size_t i = 0; i < n; ++i) {
            if (dist[i] < cutoff) {
                result.kept_indices.push_back(static_cast<int>(i));
            }
        }
    }

    if (result.kept_indices.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < n; ++i) {
            const bool higher = cands[i].confidence > cands[best].confidence;
            const bool tie_wins = cands[i].confidence == cands[best].confidence && cands[i].source < cands[best].source;
            if (higher || tie_wins) {
                best = i;
            }
        }
        result.kept_indices.push_back(static_cast<int>(best));
        result.fallback = true;
    }

    double total = 0.0;
    for (int i : result.kept_indices) {
        total += cands[i].confidence;
    }
    const double m = static_cast<double>(result.kept_indices.size());
    for (int i : result.kept_indices) {
        // All-zero confidences carry no preference; average uniformly.
        const double w = total > 0.0 ? cands[i].confidence / total : 1.0 / m;
        result.weights.push_back(w);
        result.output.x += w * cands[i].x;
        result.output.y += w * cands[i].y;
        result.confidence += w * cands[i].confidence;
    }
    return result;
}

Pose fuse_pose(std::span<const CandidateSet> sets, std::shared_ptr<const SkeletonSpec> skeleton, ThresholdMode mode,
               VisibilityThresholds visibility)
{
    if (static_cast<int>(sets.size()) != skeleton->joint_count()) {
        throw std::invalid_argument("fuse_pose: expected one candidate set per joint");
    }
    Pose pose(skeleton);
    for (std::size_t j = 0; j < sets.size(); ++j) {
        const FusionResult r = vote_fuse(sets[j], mode);
        Keypoint& k = pose[static_cast<int>(j)];
        k.x = r.output.x;
        k.y = r.output.y;
        k.confidence = r.confidence;
        k.visibility = infer_visibility(r.confidence, visibility);
    }
    return pose;
}

std::vector<SweepRow> threshold_sweep(std::span<const std::vector<CandidateSet>> per_image_sets,
                                      std::span<const double> alphas, std::shared_ptr<const SkeletonSpec> skeleton)
{
    std::vector<SweepRow> rows;
    for (double alpha : alphas) {
        if (!(alpha > 0.0)) {
            throw std::invalid_argument("threshold_sweep: alphas must be positive");
        }
        SweepRow row;
        row.alpha = alpha;
        for (const auto& sets : per_image_sets) {
            row.poses.push_back(fuse_pose(sets, skeleton, ThresholdMode::scaled(alpha)));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_candidates_jsonl(std::ostream& out, const std::string& image_id, std::span<const CandidateSet> sets)
{
    for (const auto& set : sets) {
        for (const auto& c : set.candidates) {
            nlohmann::json line = {
                {"image_id", image_id},
                {"joint_index", set.joint_index},
                {"x", c.x},
                {"y", c.y},
                {"v", c.confidence},
                {"source_tag",
                 {{"scale_index", c.source.scale_index},
                  {"flip", c.source.flipped},
                  {"stage", c.source.stage == StageTag::lower ? "lower" : "higher"}}},
            };
            out << line.dump() << '\n';
        }
    }
}

std::vector<ImageCandidates> read_candidates_jsonl(std::istream& in, int joint_count)
{
    std::vector<ImageCandidates> images;
    std::map<std::string, std::size_t> index;
    std::string text;
    int line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto line = nlohmann::json::parse(text);
            const std::string id = line.value("image_id", std::string("0"));
            auto [it, inserted] = index.try_emplace(id, images.size());
            if (inserted) {
                ImageCandidates ic;
                ic.image_id = id;
                ic.sets.resize(joint_count);
                for (int j = 0; j < joint_count; ++j) {
                    ic.sets[j].joint_index = j;
                }
                images.push_back(std::move(ic));
            }
            const int j = line.at("joint_index").get<int>();
            if (j < 0 || j >= joint_count) {
                throw std::out_of_range("joint_index " + std::to_string(j) + " out of range");
            }
            Candidate c;
            c.x = line.at("x").get<double>();
            c.y = line.at("y").get<double>();
            c.confidence = line.at("v").get<double>();
            if (!std::isfinite(c.x) || !std::isfinite(c.y) || !std::isfinite(c.confidence) || c.confidence < 0.0) {
                throw std::invalid_argument("candidate values must be finite with v >= 0");
            }
            if (line.contains("source_tag")) {
                const auto& tag = line["source_tag"];
                c.source.scale_index = tag.value("scale_index", 0);
                c.source.flipped = tag.value("flip", false);
                c.source.stage = tag.value("stage", std::string("lower")) == "higher" ? StageTag::higher : StageTag::lower;
            }
            images[it->second].sets[j].candidates.push_back(c);
        } catch (const std::exception& e) {
            throw std::invalid_argument("candidates line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return images;
}

} // namespace ranet
