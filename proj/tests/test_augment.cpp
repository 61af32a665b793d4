// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "ranet/augment.hpp"
#include "test_support.hpp"

using namespace ranet;
using ranet::testing::Gen;

namespace {

// Union-find component count used as an independent oracle for the flood fill.
int count_components(const LabelMap& m)
{
    const int w = m.width(), h = m.height();
    std::vector<int> parent(w * h);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
        while (parent[a] != a) {
            a = parent[a] = parent[parent[a]];
        }
        return a;
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!m.at(x, y)) {
                continue;
            }
            if (x + 1 < w && m.at(x + 1, y) == m.at(x, y)) {
                parent[find(y * w + x)] = find(y * w + x + 1);
            }
            if (y + 1 < h && m.at(x, y + 1) == m.at(x, y)) {
                parent[find(y * w + x)] = find((y + 1) * w + x);
            }
        }
    }
    int n = 0;
    for (int i = 0; i < w * h; ++i) {
        n += m.data()[i] && find(i) == i;
    }
    return n;
}

void fill_rect(LabelMap& m, int x0, int y0, int x1, int y1, std::uint8_t v)
{
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            m.at(x, y) = v;
}

struct Person {
    Image image;
    LabelMap parsing;
    Pose pose;
};

// Six rectangular parts around an MPII pose.
Person make_person()
{
    auto sk = SkeletonSpec::mpii();
    Person p{Image(80, 80, 3, 0.2f), LabelMap(80, 80), Pose(sk)};
    for (int j = 0; j < 16; ++j) {
        p.pose[j].x = 40;
        p.pose[j].y = 40;
    }
    p.pose[sk->index_of("upper_neck")] = {40, 14, Visibility::visible, {}};
    p.pose[sk->index_of("head_top")] = {40, 4, Visibility::visible, {}};
    p.pose[sk->index_of("r_knee")] = {34, 60, Visibility::visible, {}};
    p.pose[sk->index_of("l_knee")] = {46, 60, Visibility::visible, {}};
    p.pose[sk->index_of("r_ankle")] = {34, 76, Visibility::visible, {}};
    p.pose[sk->index_of("l_ankle")] = {46, 76, Visibility::visible, {}};
    fill_rect(p.parsing, 34, 2, 46, 14, 1);  // head
    fill_rect(p.parsing, 30, 16, 50, 40, 2); // torso
    fill_rect(p.parsing, 31, 42, 37, 58, 5); // thighs
    fill_rect(p.parsing, 43, 42, 49, 58, 5);
    fill_rect(p.parsing, 31, 62, 37, 76, 6); // shanks
    fill_rect(p.parsing, 43, 62, 49, 76, 6);
    for (int y = 0; y < 80; ++y)
        for (int x = 0; x < 80; ++x)
            if (p.parsing.at(x, y))
                for (int c = 0; c < 3; ++c)
                    p.image.at(x, y, c) = 0.1f * p.parsing.at(x, y);
    return p;
}

} // namespace

TEST(Regions, MatchUnionFindOracle)
{
    Gen g(51);
    for (int t = 0; t < 100; ++t) {
        LabelMap m(g.integer(1, 30), g.integer(1, 30));
        for (int y = 0; y < m.height(); ++y)
            for (int x = 0; x < m.width(); ++x)
                m.at(x, y) = g.coin(0.5) ? static_cast<std::uint8_t>(g.integer(1, 3)) : 0;
        const auto regions = connected_regions(m);
        EXPECT_EQ(static_cast<int>(regions.size()), count_components(m));
        std::size_t pixels = 0;
        for (const auto& r : regions) {
            pixels += r.pixels.size();
        }
        std::size_t labeled = 0;
        for (auto v : m.data()) {
            labeled += v != 0;
        }
        EXPECT_EQ(pixels, labeled);
    }
}

TEST(Regions, SolidityOracle)
{
    LabelMap m(10, 10);
    fill_rect(m, 1, 1, 5, 4, 1);
    auto regions = connected_regions(m);
    ASSERT_EQ(regions.size(), 1u);
    EXPECT_NEAR(solidity(regions[0], 10), 1.0, 1e-12);
    // L shape: 3 + 2 pixels of a 3x3 hull missing a 2x2 corner; hull cuts the corner diagonally.
    LabelMap l(10, 10);
    fill_rect(l, 0, 0, 3, 1, 1);
    fill_rect(l, 0, 1, 1, 3, 1);
    regions = connected_regions(l);
    EXPECT_NEAR(solidity(regions[0], 10), 5.0 / 7.0, 1e-12);
}

TEST(BuildPool, OnePatchPerPart)
{
    Person p = make_person();
    std::vector<PoolSource> sources{{&p.image, &p.parsing, p.pose, "p0"}};
    const PatchPool pool = build_pool(sources);
    EXPECT_EQ(static_cast<int>(pool.body_part_count()), count_components(p.parsing));
    EXPECT_EQ(pool.indices(PartLabel::shank).size(), 2u);
    for (const Patch* patch : pool.by_label(PartLabel::shank)) {
        EXPECT_EQ(patch->label, PartLabel::shank);
        EXPECT_EQ(patch->opaque_count(), 6 * 14);
        // anchored on the knee just above the region
        EXPECT_DOUBLE_EQ(patch->anchor_offset.y, 0.0);
    }
    EXPECT_GE(pool.indices(PartLabel::background).size(), 1u);
}

TEST(BuildPool, FiltersAndErrors)
{
    Person p = make_person();
    std::vector<PoolSource> sources{{&p.image, &p.parsing, p.pose, "p0"}};
    PoolBuildConfig big;
    big.min_area = 100000;
    EXPECT_EQ(build_pool(sources, big).body_part_count(), 0u);
    LabelMap empty(80, 80);
    std::vector<PoolSource> bg{{&p.image, &empty, p.pose, "bg"}};
    EXPECT_EQ(build_pool(bg).body_part_count(), 0u);
    EXPECT_TRUE(build_pool(std::span<const PoolSource>{}).empty());
    LabelMap wrong(79, 80);
    std::vector<PoolSource> bad{{&p.image, &wrong, p.pose, "bad"}};
    EXPECT_THROW(build_pool(bad), std::invalid_argument);
}

TEST(BuildPool, SaveLoadRoundTrip)
{
    Person p = make_person();
    std::vector<PoolSource> sources{{&p.image, &p.parsing, p.pose, "p0"}};
    const PatchPool pool = build_pool(sources);
    const auto dir = std::filesystem::temp_directory_path() / "ranet_pool_test";
    std::filesystem::remove_all(dir);
    pool.save(dir);
    const PatchPool back = PatchPool::load(dir);
    ASSERT_EQ(back.size(), pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        EXPECT_EQ(back[i].label, pool[i].label);
        EXPECT_EQ(back[i].anchor_offset, pool[i].anchor_offset);
        EXPECT_EQ(back[i].source_id, pool[i].source_id);
        EXPECT_EQ(back[i].opaque_count(), pool[i].opaque_count());
    }
    std::filesystem::remove_all(dir);
}

TEST(MountingPolicy, DefaultRowsSumToOne)
{
    for (auto sk : {SkeletonSpec::mpii(), SkeletonSpec::lsp()}) {
        const auto policy = MountingPolicy::defaults(*sk);
        policy.validate(sk->joint_count());
        const auto& shank = policy.affinity[static_cast<int>(PartLabel::shank)];
        const int knee = sk->index_of("r_knee");
        const int wrist = sk->index_of("r_wrist");
        EXPECT_NEAR(shank[knee], 0.6 / 4 + 0.1 / sk->joint_count(), 1e-12);
        EXPECT_NEAR(shank[wrist], 0.3 / 8 + 0.1 / sk->joint_count(), 1e-12);
    }
}

TEST(Pda, DisabledOrEmptyPoolIsIdentity)
{
    Person p = make_person();
    auto policy = MountingPolicy::defaults(p.pose.skeleton());
    std::mt19937_64 rng(1);
    const PdaResult r = apply_pda(p.image, p.pose, PatchPool{}, policy, rng);
    EXPECT_EQ(r.image, p.image);
    EXPECT_TRUE(r.record.placements.empty());
}

TEST(Pda, ChangesConfinedToMasksAndDeterministic)
{
    Person p = make_person();
    std::vector<PoolSource> sources{{&p.image, &p.parsing, p.pose, "p0"}};
    const PatchPool pool = build_pool(sources);
    auto policy = MountingPolicy::defaults(p.pose.skeleton());
    policy.image_probability = 1.0;
    Image noisy = p.image;
    Gen g(52);
    for (auto& v : noisy.data()) {
        v = static_cast<float>(g.uniform(0.3, 0.9));
    }
    int mounted = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 a(seed), b(seed);
        const PdaResult r1 = apply_pda(noisy, p.pose, pool, policy, a);
        const PdaResult r2 = apply_pda(noisy, p.pose, pool, policy, b);
        EXPECT_EQ(r1.image, r2.image);
        const LabelMap support = r1.record.support(noisy.width(), noisy.height());
        for (int y = 0; y < noisy.height(); ++y) {
            for (int x = 0; x < noisy.width(); ++x) {
                for (int c = 0; c < 3; ++c) {
                    if (!support.at(x, y)) {
                        EXPECT_EQ(r1.image.at(x, y, c), noisy.at(x, y, c));
                    }
                }
            }
        }
        mounted += static_cast<int>(r1.record.placements.size());
    }
    EXPECT_GT(mounted, 0);
}

TEST(Pda, AffinityFrequenciesWithinThreeStandardErrors)
{
    auto sk = SkeletonSpec::mpii();
    const auto policy = MountingPolicy::defaults(*sk);
    std::mt19937_64 rng(53);
    const int draws = 10000;
    std::vector<int> counts(sk->joint_count(), 0);
    for (int i = 0; i < draws; ++i) {
        ++counts[sample_target_joint(PartLabel::lower_arm, policy, rng)];
    }
    const auto& row = policy.affinity[static_cast<int>(PartLabel::lower_arm)];
    for (int j = 0; j < sk->joint_count(); ++j) {
        const double se = std::sqrt(row[j] * (1 - row[j]) / draws);
        EXPECT_LE(std::abs(counts[j] / double(draws) - row[j]), 3 * se + 1e-12) << j;
    }
}

TEST(Standard, ZeroConfigIsIdentity)
{
    Person p = make_person();
    std::mt19937_64 rng(54);
    const auto r = apply_standard(p.image, p.pose, AugmentConfig::identity(), rng);
    EXPECT_EQ(r.image, p.image);
    for (int j = 0; j < 16; ++j) {
        EXPECT_EQ(r.pose[j].x, p.pose[j].x);
        EXPECT_EQ(r.pose[j].y, p.pose[j].y);
    }
}

TEST(Standard, FlipReflectsAndSwaps)
{
    Person p = make_person();
    StandardDraw d;
    d.flip = true;
    const auto r = apply_draw(p.image, p.pose, {40, 40}, d);
    const auto perm = p.pose.skeleton().flip_permutation();
    for (int j = 0; j < 16; ++j) {
        EXPECT_NEAR(r.pose[j].x, 79.0 - p.pose[perm[j]].x, 1e-9);
        EXPECT_NEAR(r.pose[j].y, p.pose[perm[j]].y, 1e-9);
    }
}

TEST(Standard, RotationRoundTrip)
{
    Person p = make_person();
    StandardDraw d;
    d.rotation = 60.0;
    d.scale = 1.2;
    const auto r = apply_draw(p.image, p.pose, {40, 40}, d);
    const Pose back = map_pose(r.pose, r.transform, MapDirection::inverse);
    for (int j = 0; j < 16; ++j) {
        EXPECT_NEAR(back[j].x, p.pose[j].x, 1e-4);
        EXPECT_NEAR(back[j].y, p.pose[j].y, 1e-4);
    }
}

TEST(Standard, ColourJitterChangesPixelsOnly)
{
    Person p = make_person();
    StandardDraw d;
    d.gains = {1.1f, 0.9f, 1.0f};
    const auto r = apply_draw(p.image, p.pose, {40, 40}, d);
    EXPECT_NE(r.image, p.image);
    for (int j = 0; j < 16; ++j) {
        EXPECT_EQ(r.pose[j].x, p.pose[j].x);
    }
}
