// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "ranet/geometry.hpp"
#include "test_support.hpp"

using namespace ranet;
using ranet::testing::Gen;

TEST(Skeleton, FlipPermutationIsInvolution)
{
    for (auto sk : {SkeletonSpec::mpii(), SkeletonSpec::lsp()}) {
        sk->validate();
        const auto perm = sk->flip_permutation();
        for (int j = 0; j < sk->joint_count(); ++j) {
            EXPECT_EQ(perm[perm[j]], j);
        }
    }
    EXPECT_EQ(SkeletonSpec::mpii()->joint_count(), 16);
    EXPECT_EQ(SkeletonSpec::lsp()->joint_count(), 14);
    EXPECT_EQ(SkeletonSpec::mpii()->flip_permutation()[0], 5);
}

TEST(Skeleton, ValidateRejectsBadPairs)
{
    SkeletonSpec sk{"bad", {"a", "b"}, {{0, 2}}, false};
    EXPECT_THROW(sk.validate(), std::invalid_argument);
    SkeletonSpec dup{"dup", {"a", "b", "c"}, {{0, 1}, {1, 2}}, false};
    EXPECT_THROW(dup.validate(), std::invalid_argument);
}

TEST(CropTransform, CenteredUnitScaleIsIdentity)
{
    Image img(256, 256, 1);
    const auto crop = crop_by_center_scale(img, {128, 128}, 1.0, 0.0, 256);
    Gen g(1);
    for (int i = 0; i < 100; ++i) {
        const Point2 p = g.point(-50, 300);
        const Point2 q = crop.transform.forward(p);
        EXPECT_NEAR(q.x, p.x, 1e-12);
        EXPECT_NEAR(q.y, p.y, 1e-12);
    }
}

TEST(CropTransform, HalfScaleInverseOfOrigin)
{
    Image img(400, 300, 1);
    const Point2 c{200.0, 150.0};
    const auto crop = crop_by_center_scale(img, c, 0.5, 0.0, 256);
    const Point2 p = crop.transform.inverse({0.0, 0.0});
    EXPECT_NEAR(p.x, c.x - 64.0, 1e-12);
    EXPECT_NEAR(p.y, c.y - 64.0, 1e-12);
}

TEST(CropTransform, RoundTripProperty)
{
    Gen g(2);
    Image img(64, 64, 1);
    for (int i = 0; i < 2000; ++i) {
        CropTransform t;
        const Point2 c = g.point(-100, 500);
        const double half = g.uniform(5, 300);
        t.source_box = {c.x - half, c.y - half, c.x + half, c.y + half};
        t.output_width = g.integer(8, 512);
        t.output_height = g.integer(8, 512);
        t.zoom = g.uniform(0.05, 20.0);
        t.rotation = g.uniform(-180, 180);
        t.flipped = g.coin();
        t.output_center = g.point(0, 256);
        const Point2 p = g.point(-1000, 1000);
        const Point2 back = t.inverse(t.forward(p));
        EXPECT_NEAR(back.x, p.x, 1e-6);
        EXPECT_NEAR(back.y, p.y, 1e-6);
    }
}

TEST(CropTransform, RotationOracle)
{
    // 90 degrees: out = zoom * [[0, 1], [-1, 0]] * d + oc.
    CropTransform t;
    t.source_box = {-1, -1, 1, 1};
    t.output_width = t.output_height = 10;
    t.zoom = 2.0;
    t.rotation = 90.0;
    t.output_center = {5, 5};
    const Point2 q = t.forward({1.0, 0.0});
    EXPECT_NEAR(q.x, 5.0, 1e-12);
    EXPECT_NEAR(q.y, 3.0, 1e-12);
}

TEST(Crop, IdentityCropCopiesPixels)
{
    Image img(32, 32, 3);
    Gen g(3);
    for (auto& v : img.data()) {
        v = static_cast<float>(g.uniform(0, 1));
    }
    const auto crop = crop_by_center_scale(img, {16, 16}, 1.0, 0.0, 32);
    EXPECT_EQ(crop.image, img);
}

TEST(Crop, FlippedCropMirrorsColumns)
{
    Image img(16, 16, 1);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            img.at(x, y, 0) = static_cast<float>(x + 16 * y);
        }
    }
    const auto plain = crop_by_center_scale(img, {8, 8}, 1.0, 0.0, 16);
    const auto flipped = crop_by_center_scale(img, {8, 8}, 1.0, 0.0, 16, true);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            EXPECT_EQ(flipped.image.at(x, y, 0), plain.image.at(15 - x, y, 0));
        }
    }
}

TEST(Crop, BboxAspectPreservesAspect)
{
    Gen g(4);
    Image img(300, 200, 1, 1.0f);
    for (int i = 0; i < 50; ++i) {
        const double x0 = g.uniform(0, 150);
        const double y0 = g.uniform(0, 100);
        BoundingBox box{x0, y0, x0 + g.uniform(10, 140), y0 + g.uniform(10, 90)};
        const auto crop = crop_by_bbox_aspect(img, box, 256, g.coin());
        EXPECT_EQ(crop.image.width(), 256);
        EXPECT_EQ(crop.image.height(), 256);
        const BoundingBox content = content_region(crop.transform);
        EXPECT_NEAR(std::max(content.width(), content.height()), 256.0, 1e-9);
        EXPECT_NEAR(content.width() / content.height(), box.width() / box.height(), 1e-9);
        const Point2 corner = crop.transform.forward({box.x_min, box.y_min});
        const Point2 opposite = crop.transform.forward({box.x_max, box.y_max});
        EXPECT_NEAR(std::abs(opposite.x - corner.x), content.width(), 1e-9);
        EXPECT_NEAR(std::abs(opposite.y - corner.y), content.height(), 1e-9);
    }
}

TEST(Crop, BboxAspectPadsShortSideWithZeros)
{
    Image img(200, 200, 1, 1.0f);
    const auto crop = crop_by_bbox_aspect(img, {50, 80, 150, 130}, 128);
    // content is 128 x 64, centred vertically
    EXPECT_EQ(crop.image.at(64, 0, 0), 0.0f);
    EXPECT_EQ(crop.image.at(64, 31, 0), 0.0f);
    EXPECT_EQ(crop.image.at(64, 32, 0), 1.0f);
    EXPECT_EQ(crop.image.at(64, 95, 0), 1.0f);
    EXPECT_EQ(crop.image.at(64, 96, 0), 0.0f);
}

TEST(Crop, DegenerateBoxThrows)
{
    Image img(10, 10, 1);
    EXPECT_THROW(crop_by_bbox_aspect(img, {2, 2, 2, 5}, 64), std::invalid_argument);
    EXPECT_THROW(crop_by_center_scale(img, {5, 5}, 0.0, 0, 64), std::invalid_argument);
}

TEST(PoseToBbox, MarginOracle)
{
    auto sk = SkeletonSpec::lsp();
    Gen g(5);
    for (int i = 0; i < 100; ++i) {
        Pose pose = ranet::testing::random_pose(g, sk, 0, 100);
        pose[3].visibility = Visibility::outer;
        pose[3].x = 1e6;
        double x0 = 1e9, y0 = 1e9, x1 = -1e9, y1 = -1e9;
        for (int j = 0; j < pose.size(); ++j) {
            if (j == 3) {
                continue;
            }
            x0 = std::min(x0, pose[j].x);
            x1 = std::max(x1, pose[j].x);
            y0 = std::min(y0, pose[j].y);
            y1 = std::max(y1, pose[j].y);
        }
        const BoundingBox box = pose_to_bbox(pose, 0.15);
        EXPECT_NEAR(box.x_min, x0 - 0.15 * (x1 - x0), 1e-9);
        EXPECT_NEAR(box.x_max, x1 + 0.15 * (x1 - x0), 1e-9);
        EXPECT_NEAR(box.y_min, y0 - 0.15 * (y1 - y0), 1e-9);
        EXPECT_NEAR(box.y_max, y1 + 0.15 * (y1 - y0), 1e-9);
        const BoundingBox clamped = pose_to_bbox(pose, 0.15, ImageBounds{90, 90});
        EXPECT_GE(clamped.x_min, 0.0);
        EXPECT_LE(clamped.x_max, 89.0);
    }
}

TEST(PoseToBbox, AllOuterThrows)
{
    Pose pose(SkeletonSpec::lsp());
    for (int j = 0; j < pose.size(); ++j) {
        pose[j].visibility = Visibility::outer;
    }
    EXPECT_THROW(pose_to_bbox(pose, 0.15), std::domain_error);
}

TEST(MapPose, FlipSwapsLeftRight)
{
    auto sk = SkeletonSpec::mpii();
    Gen g(6);
    Pose pose = ranet::testing::random_pose(g, sk, 10, 90);
    Image img(100, 100, 1);
    const auto crop = crop_by_center_scale(img, {50, 50}, 1.0, 0.0, 100, true);
    const Pose mapped = map_pose(pose, crop.transform, MapDirection::forward);
    const auto perm = sk->flip_permutation();
    for (int j = 0; j < pose.size(); ++j) {
        EXPECT_NEAR(mapped[j].x, 99.0 - pose[perm[j]].x, 1e-9);
        EXPECT_NEAR(mapped[j].y, pose[perm[j]].y, 1e-9);
        EXPECT_EQ(mapped[j].visibility, pose[perm[j]].visibility);
    }
    const Pose back = map_pose(mapped, crop.transform, MapDirection::inverse);
    for (int j = 0; j < pose.size(); ++j) {
        EXPECT_NEAR(back[j].x, pose[j].x, 1e-9);
        EXPECT_NEAR(back[j].y, pose[j].y, 1e-9);
    }
}

TEST(MapPose, RemarkOutside)
{
    auto sk = SkeletonSpec::lsp();
    Pose pose(sk);
    for (int j = 0; j < pose.size(); ++j) {
        pose[j].x = 50;
        pose[j].y = 50;
    }
    pose[0].x = 5;
    Image img(100, 100, 1);
    const auto crop = crop_by_center_scale(img, {50, 50}, 1.0, 0.0, 64);
    const Pose mapped = map_pose(pose, crop.transform, MapDirection::forward, true);
    EXPECT_EQ(mapped[0].visibility, Visibility::outer);
    EXPECT_EQ(mapped[1].visibility, Visibility::visible);
}
