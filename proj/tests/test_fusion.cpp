// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cvf_oracle.hpp"
#include "ranet/fusion.hpp"
#include "test_support.hpp"

using namespace ranet;
using ranet::testing::Gen;

namespace {

CandidateSet random_set(Gen& g, int n)
{
    CandidateSet set;
    for (int i = 0; i < n; ++i) {
        set.candidates.push_back({g.uniform(0, 100), g.uniform(0, 100), g.uniform(0, 1),
                                  {i % 6, (i / 6) % 2 == 1, i >= 12 ? StageTag::higher : StageTag::lower}});
    }
    return set;
}

} // namespace

TEST(VoteFuse, MatchesOracle)
{
    Gen g(21);
    for (int t = 0; t < 2000; ++t) {
        const CandidateSet set = random_set(g, g.integer(1, 24));
        for (double alpha : {0.5, 1.0, 1.5, std::numeric_limits<double>::infinity()}) {
            const FusionResult r = vote_fuse(set, ThresholdMode::scaled(alpha));
            const auto o = ranet::testing::cvf_oracle(set.candidates, alpha);
            EXPECT_NEAR(r.output.x, o.x, 1e-9);
            EXPECT_NEAR(r.output.y, o.y, 1e-9);
            EXPECT_EQ(static_cast<int>(r.kept_indices.size()), o.kept);
        }
    }
}

TEST(VoteFuse, WorkedExample)
{
    // Three clustered candidates and one far outlier.
    CandidateSet set;
    set.candidates = {{0, 0, 1.0, {}}, {2, 0, 1.0, {1}}, {1, 1, 2.0, {2}}, {40, 40, 1.0, {3}}};
    const FusionResult r = vote_fuse(set);
    ASSERT_EQ(r.kept_indices.size(), 3u);
    EXPECT_NEAR(r.output.x, (0 + 2 + 2) / 4.0, 1e-12);
    EXPECT_NEAR(r.output.y, (0 + 0 + 2) / 4.0, 1e-12);
    double sum = 0;
    for (double w : r.weights) {
        sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(VoteFuse, IdenticalCandidatesFallBackToMostConfident)
{
    CandidateSet set;
    set.candidates = {{5, 5, 0.2, {1}}, {5, 5, 0.7, {2}}, {5, 5, 0.7, {0}}};
    const FusionResult r = vote_fuse(set);
    EXPECT_TRUE(r.fallback);
    ASSERT_EQ(r.kept_indices.size(), 1u);
    EXPECT_EQ(r.kept_indices[0], 2);
}

TEST(VoteFuse, ZeroConfidenceAveragesUniformly)
{
    CandidateSet set;
    set.candidates = {{0, 0, 0, {}}, {2, 0, 0, {}}};
    const FusionResult r = vote_fuse(set, ThresholdMode::keep_all());
    EXPECT_DOUBLE_EQ(r.output.x, 1.0);
    EXPECT_DOUBLE_EQ(r.confidence, 0.0);
}

TEST(VoteFuse, EmptySetThrows)
{
    EXPECT_THROW(vote_fuse(CandidateSet{}), std::invalid_argument);
}

TEST(VoteFuse, OutputInsideKeptHull)
{
    Gen g(22);
    for (int t = 0; t < 500; ++t) {
        const CandidateSet set = random_set(g, 24);
        const FusionResult r = vote_fuse(set);
        double x0 = 1e9, x1 = -1e9;
        for (int i : r.kept_indices) {
            x0 = std::min(x0, set.candidates[i].x);
            x1 = std::max(x1, set.candidates[i].x);
        }
        EXPECT_GE(r.output.x, x0 - 1e-9);
        EXPECT_LE(r.output.x, x1 + 1e-9);
    }
}

TEST(FusePose, SetsVisibilityFromConfidence)
{
    auto sk = SkeletonSpec::lsp();
    std::vector<CandidateSet> sets(sk->joint_count());
    for (int j = 0; j < sk->joint_count(); ++j) {
        sets[j].joint_index = j;
        sets[j].candidates = {{double(j), 1, j == 0 ? 0.1 : 0.9, {}}, {double(j) + 1, 1, j == 0 ? 0.1 : 0.9, {1}}};
    }
    const Pose p = fuse_pose(sets, sk);
    EXPECT_EQ(p[0].visibility, Visibility::outer);
    EXPECT_EQ(p[1].visibility, Visibility::visible);
    // Two candidates sit exactly at the mean distance, so the most confident one (first source) wins.
    EXPECT_NEAR(p[3].x, 3.0, 1e-12);
}

TEST(Candidates, JsonlRoundTrip)
{
    Gen g(23);
    std::vector<CandidateSet> sets;
    for (int j = 0; j < 3; ++j) {
        auto s = random_set(g, 24);
        s.joint_index = j;
        sets.push_back(s);
    }
    std::stringstream ss;
    write_candidates_jsonl(ss, "img7", sets);
    const auto back = read_candidates_jsonl(ss, 3);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].image_id, "img7");
    for (int j = 0; j < 3; ++j) {
        ASSERT_EQ(back[0].sets[j].candidates.size(), 24u);
        for (int i = 0; i < 24; ++i) {
            EXPECT_EQ(back[0].sets[j].candidates[i].x, sets[j].candidates[i].x);
            EXPECT_EQ(back[0].sets[j].candidates[i].source, sets[j].candidates[i].source);
        }
    }
}

TEST(ThresholdSweep, OneRowPerAlpha)
{
    Gen g(24);
    auto sk = SkeletonSpec::lsp();
    std::vector<std::vector<CandidateSet>> images(3);
    for (auto& sets : images) {
        for (int j = 0; j < sk->joint_count(); ++j) {
            sets.push_back(random_set(g, 6));
        }
    }
    const std::vector<double> alphas{0.8, 1.0, 1.2};
    const auto rows = threshold_sweep(images, alphas, sk);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1].poses.size(), 3u);
}
