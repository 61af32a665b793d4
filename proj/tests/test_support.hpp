// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "ranet/geometry.hpp"

namespace ranet::testing {

/// Small seeded generator helpers for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }
    Point2 point(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi)}; }
    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline Pose random_pose(Gen& g, std::shared_ptr<const SkeletonSpec> skeleton, double lo, double hi)
{
    std::vector<Keypoint> kps(skeleton->joint_count());
    for (auto& k : kps) {
        k.x = g.uniform(lo, hi);
        k.y = g.uniform(lo, hi);
        k.visibility = g.coin(0.8) ? Visibility::visible : Visibility::occluded;
    }
    return Pose(std::move(skeleton), std::move(kps));
}

} // namespace ranet::testing
