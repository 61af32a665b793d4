// SPDX-License-Identifier: Apache-2.0
#include "ranet/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ranet/augment.hpp"

namespace ranet {

namespace {

using Rgb = std::array<float, 3>;

struct Canvas {
    Image image;
    LabelMap labels;
    std::vector<int> instance; // last instance drawn per pixel, -1 for background

    Canvas(int size) : image(size, size, 3), labels(size, size), instance(static_cast<std::size_t>(size) * size, -1) {}

    void put(int x, int y, const Rgb& c, PartLabel label, int id)
    {
        for (int k = 0; k < 3; ++k) {
            image.at(x, y, k) = c[k];
        }
        labels.at(x, y) = static_cast<std::uint8_t>(label);
        instance[static_cast<std::size_t>(y) * image.width() + x] = id;
    }
};

double segment_distance(Point2 p, Point2 a, Point2 b)
{
    const Point2 ab = b - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    double t = len2 > 0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, a + t * ab);
}

Rgb shade(const Rgb& c, float f)
{
    return {std::clamp(c[0] * f, 0.0f, 1.0f), std::clamp(c[1] * f, 0.0f, 1.0f), std::clamp(c[2] * f, 0.0f, 1.0f)};
}

void draw_capsule(Canvas& cv, Point2 a, Point2 b, double radius, const Rgb& color, PartLabel label, int id,
                  bool write_labels = true)
{
    const int size = cv.image.width();
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - radius)));
    const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - radius)));
    const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + radius)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double d = segment_distance({double(x), double(y)}, a, b);
            if (d <= radius) {
                // Darker rim gives limbs a visible outline.
                const Rgb c = shade(color, static_cast<float>(1.0 - 0.35 * d / radius));
                if (write_labels) {
                    cv.put(x, y, c, label, id);
                } else {
                    for (int k = 0; k < 3; ++k) {
                        cv.image.at(x, y, k) = c[k];
                    }
                }
            }
        }
    }
}

Point2 polar(double length, double angle_deg)
{
    const double a = angle_deg * std::numbers::pi / 180.0;
    return {length * std::sin(a), length * std::cos(a)};
}

Point2 rotate(Point2 p, Point2 c, double deg)
{
    const double a = deg * std::numbers::pi / 180.0;
    const Point2 d = p - c;
    return {c.x + std::cos(a) * d.x - std::sin(a) * d.y, c.y + std::sin(a) * d.x + std::cos(a) * d.y};
}

} // namespace

SyntheticSample generate_synthetic(const SyntheticConfig& cfg, int index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(index), 0x5eedu};
    std::mt19937_64 rng(seq);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

    const int S = cfg.image_size;
    Canvas cv(S);

    // Background: two-colour gradient plus random blobs and stripes.
    const Rgb bg0{float(uni(0.1, 0.5)), float(uni(0.1, 0.5)), float(uni(0.1, 0.5))};
    const Rgb bg1{float(uni(0.1, 0.5)), float(uni(0.1, 0.5)), float(uni(0.1, 0.5))};
    const double stripe_freq = uni(0.05, 0.25);
    const double stripe_angle = uni(0, std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 0.03);
    for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
            const float t = static_cast<float>(y) / S;
            const double stripe =
                0.05 * std::sin(stripe_freq * (x * std::cos(stripe_angle) + y * std::sin(stripe_angle)));
            for (int k = 0; k < 3; ++k) {
                cv.image.at(x, y, k) =
                    std::clamp(static_cast<float>(bg0[k] * (1 - t) + bg1[k] * t + stripe + noise(rng)), 0.0f, 1.0f);
            }
        }
    }
    const int blobs = std::uniform_int_distribution<int>(2, 5)(rng);
    for (int b = 0; b < blobs; ++b) {
        const Point2 c{uni(0, S), uni(0, S)};
        const double r = uni(0.04, 0.12) * S;
        const Rgb col{float(uni(0.1, 0.6)), float(uni(0.1, 0.6)), float(uni(0.1, 0.6))};
        draw_capsule(cv, c, c + Point2{uni(-r, r), uni(-r, r)}, r, col, PartLabel::background, -1, false);
    }

    // Skeleton in a canonical upright frame, then rotated about the pelvis.
    const double L = uni(0.16, 0.20) * S; // torso length
    const Point2 pelvis{S / 2.0 + uni(-0.06, 0.06) * S, S / 2.0 + uni(0.02, 0.10) * S};
    const Point2 thorax = pelvis + Point2{uni(-0.1, 0.1) * L, -L};
    const Point2 neck = thorax + Point2{0, -0.22 * L};
    const Point2 head_top = neck + Point2{0, -0.62 * L};
    const Point2 r_sho = thorax + Point2{-0.38 * L, 0.05 * L};
    const Point2 l_sho = thorax + Point2{0.38 * L, 0.05 * L};
    const Point2 r_hip = pelvis + Point2{-0.24 * L, 0};
    const Point2 l_hip = pelvis + Point2{0.24 * L, 0};
    // Angles in degrees from straight down, positive toward +x.
    const Point2 r_elb = r_sho + polar(0.6 * L, uni(-160, 10));
    const Point2 r_wri = r_elb + polar(0.55 * L, uni(-170, 40));
    const Point2 l_elb = l_sho + polar(0.6 * L, uni(-10, 160));
    const Point2 l_wri = l_elb + polar(0.55 * L, uni(-40, 170));
    const Point2 r_kne = r_hip + polar(0.75 * L, uni(-50, 15));
    const Point2 r_ank = r_kne + polar(0.7 * L, uni(-40, 30));
    const Point2 l_kne = l_hip + polar(0.75 * L, uni(-15, 50));
    const Point2 l_ank = l_kne + polar(0.7 * L, uni(-30, 40));

    auto sk = SkeletonSpec::mpii();
    // r_ankle,r_knee,r_hip,l_hip,l_knee,l_ankle,pelvis,thorax,upper_neck,head_top,r_wrist,r_elbow,r_shoulder,l_shoulder,l_elbow,l_wrist
    std::array<Point2, 16> joints = {r_ank, r_kne, r_hip, l_hip, l_kne, l_ank, pelvis, thorax,
                                     neck,  head_top, r_wri, r_elb, r_sho, l_sho, l_elb, l_wri};
    const double body_rot = uni(-30, 30);
    for (auto& p : joints) {
        p = rotate(p, pelvis, body_rot);
    }

    // Parts: {a, b, radius, colour, label, owning joints}.
    struct Part {
        int a, b;
        double radius;
        Rgb color;
        PartLabel label;
    };
    auto jit = [&](Rgb c) {
        for (auto& v : c) {
            v = std::clamp(static_cast<float>(v + uni(-0.08, 0.08)), 0.0f, 1.0f);
        }
        return c;
    };
    const double limb_r = 0.13 * L;
    std::vector<Part> limbs = {
        {12, 11, limb_r, jit({0.95f, 0.25f, 0.15f}), PartLabel::upper_arm},
        {11, 10, limb_r * 0.9, jit({1.0f, 0.65f, 0.1f}), PartLabel::lower_arm},
        {13, 14, limb_r, jit({0.15f, 0.35f, 0.95f}), PartLabel::upper_arm},
        {14, 15, limb_r * 0.9, jit({0.1f, 0.85f, 0.95f}), PartLabel::lower_arm},
        {2, 1, limb_r * 1.2, jit({0.8f, 0.15f, 0.55f}), PartLabel::thigh},
        {1, 0, limb_r * 1.05, jit({1.0f, 0.55f, 0.7f}), PartLabel::shank},
        {3, 4, limb_r * 1.2, jit({0.2f, 0.75f, 0.25f}), PartLabel::thigh},
        {4, 5, limb_r * 1.05, jit({0.65f, 0.95f, 0.3f}), PartLabel::shank},
    };
    const Rgb torso_color = jit({0.9f, 0.9f, 0.85f});
    const Rgb head_color = jit({0.95f, 0.8f, 0.6f});

    // Instance ids: 0..7 limbs, 8 torso, 9 head. Joint owners for occlusion labelling.
    const std::array<std::vector<int>, 16> owners = {{{5}, {4, 5}, {4, 8}, {6, 8}, {6, 7}, {7}, {8}, {8}, {8, 9}, {9},
                                                      {1}, {0, 1}, {0, 8}, {2, 8}, {2, 3}, {3}}};
    // Legs behind the torso, arms randomly in front of or behind it.
    std::vector<int> back, front;
    for (int i = 4; i < 8; ++i) {
        back.push_back(i);
    }
    for (int i = 0; i < 4; i += 2) {
        auto& dst = uni(0, 1) < 0.5 ? back : front;
        dst.push_back(i);
        dst.push_back(i + 1);
    }
    auto draw_limb = [&](int id) {
        const Part& p = limbs[id];
        draw_capsule(cv, joints[p.a], joints[p.b], p.radius, p.color, p.label, id);
    };
    for (int id : back) {
        draw_limb(id);
    }
    {
        // Torso: a fat capsule between pelvis and thorax plus one between the shoulders.
        draw_capsule(cv, joints[6], joints[7], 0.3 * L, torso_color, PartLabel::torso, 8);
        draw_capsule(cv, joints[12], joints[13], 0.14 * L, torso_color, PartLabel::torso, 8);
        draw_capsule(cv, joints[2], joints[3], 0.16 * L, torso_color, PartLabel::torso, 8);
    }
    for (int id : front) {
        draw_limb(id);
    }
    const Point2 head_c = 0.5 * (joints[8] + joints[9]);
    const double head_r = 0.5 * distance(joints[8], joints[9]);
    draw_capsule(cv, head_c, head_c, head_r, head_color, PartLabel::head, 9);
    // Eyes mark the facing direction.
    const Point2 up = (1.0 / std::max(1e-9, 2 * head_r)) * (joints[9] - joints[8]);
    const Point2 side{-up.y, up.x};
    for (double s : {-1.0, 1.0}) {
        const Point2 e = head_c + (0.35 * head_r * s) * side + (0.15 * head_r) * up;
        draw_capsule(cv, e, e, std::max(0.8, 0.12 * head_r), {0.1f, 0.1f, 0.1f}, PartLabel::head, 9);
    }

    SyntheticSample out;
    out.id = "synthetic_" + std::to_string(cfg.seed) + "_" + std::to_string(index);
    std::vector<Keypoint> kps(16);
    for (int j = 0; j < 16; ++j) {
        kps[j].x = joints[j].x;
        kps[j].y = joints[j].y;
        const int px = static_cast<int>(std::lround(joints[j].x));
        const int py = static_cast<int>(std::lround(joints[j].y));
        if (px < 0 || py < 0 || px >= S || py >= S) {
            kps[j].visibility = Visibility::outer;
            continue;
        }
        const int top = cv.instance[static_cast<std::size_t>(py) * S + px];
        const auto& own = owners[j];
        kps[j].visibility =
            std::find(own.begin(), own.end(), top) != own.end() ? Visibility::visible : Visibility::occluded;
    }

    if (cfg.occluders) {
        const int n = std::uniform_int_distribution<int>(cfg.min_occluders, cfg.max_occluders)(rng);
        for (int k = 0; k < n; ++k) {
            const Part& p = limbs[std::uniform_int_distribution<int>(0, 7)(rng)];
            const int j = std::uniform_int_distribution<int>(0, 15)(rng);
            const Point2 a = joints[j] + Point2{uni(-0.3, 0.3) * L, uni(-0.3, 0.3) * L};
            const Point2 b = a + polar(distance(joints[p.a], joints[p.b]), uni(-180, 180));
            draw_capsule(cv, a, b, p.radius, p.color, PartLabel::background, -1, false);
        }
    }

    out.pose = Pose(sk, std::move(kps));
    out.image = std::move(cv.image);
    out.parsing = std::move(cv.labels);
    const double hs = 2 * head_r;
    out.head_bbox = {head_c.x - 0.5 * hs, head_c.y - 0.5 * hs, head_c.x + 0.5 * hs, head_c.y + 0.5 * hs};
    std::vector<Point2> pts(joints.begin(), joints.end());
    const BoundingBox box = points_to_bbox(pts, 0.0);
    out.center = box.center();
    out.scale = std::max(box.width(), box.height()) / 200.0;
    return out;
}

} // namespace ranet
