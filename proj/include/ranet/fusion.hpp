// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ranet/geometry.hpp"
#include "ranet/heatmaps.hpp"

namespace ranet {

/// Where a candidate came from: test scale, flip state and hourglass stage.
struct SourceTag {
    int scale_index = 0;
    bool flipped = false;
    StageTag stage = StageTag::lower;

    friend auto operator<=>(const SourceTag&, const SourceTag&) = default;
};

struct Candidate {
    double x = 0.0;
    double y = 0.0;
    double confidence = 0.0;
    SourceTag source;

    Point2 position() const { return {x, y}; }
};

struct CandidateSet {
    int joint_index = 0;
    std::vector<Candidate> candidates;
};

/// Threshold rule for the voting filter: `alpha` times the mean distance to the centre.
/// alpha = 1 is the mean threshold; alpha = +inf keeps every candidate.
struct ThresholdMode {
    double alpha = 1.0;

    static ThresholdMode mean() { return {1.0}; }
    static ThresholdMode scaled(double a) { return {a}; }
    static ThresholdMode keep_all() { return {std::numeric_limits<double>::infinity()}; }
    bool keeps_all() const { return alpha == std::numeric_limits<double>::infinity(); }
};

struct FusionResult {
    Point2 output;
    double confidence = 0.0;
    std::vector<int> kept_indices;
    double threshold_used = 0.0;
    std::vector<double> weights; // aligned with kept_indices, sums to 1
    bool fallback = false;
};

/// Cascade voting fusion for one joint. Candidates at distance >= threshold from the unweighted
/// centre are dropped, the rest are averaged with confidence weights normalised over the kept set.
/// An empty kept set falls back to the single most confident candidate.
FusionResult vote_fuse(const CandidateSet& set, ThresholdMode mode = ThresholdMode::mean());

Pose fuse_pose(std::span<const CandidateSet> sets, std::shared_ptr<const SkeletonSpec> skeleton,
               ThresholdMode mode = ThresholdMode::mean(), VisibilityThresholds visibility = {});

struct SweepRow {
    double alpha = 1.0;
    std::vector<Pose> poses; // one per image
};

/// Fuse every image's candidate sets at each alpha. `per_image_sets[i]` holds J sets.
std::vector<SweepRow> threshold_sweep(std::span<const std::vector<CandidateSet>> per_image_sets,
                                      std::span<const double> alphas, std::shared_ptr<const SkeletonSpec> skeleton);

/// JSON lines: {"image_id", "joint_index", "x", "y", "v", "source_tag": {"scale_index", "flip", "stage"}}.
void write_candidates_jsonl(std::ostream& out, const std::string& image_id, std::span<const CandidateSet> sets);
struct ImageCandidates {
    std::string image_id;
    std::vector<CandidateSet> sets;
};
/// Groups lines by image_id (first-seen order) and joint_index. `joint_count` sizes each group.
std::vector<ImageCandidates> read_candidates_jsonl(std::istream& in, int joint_count);

} // namespace ranet
