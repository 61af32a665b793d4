// SPDX-License-Identifier: Apache-2.0
#include "ranet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ranet {

namespace {

constexpr std::array<std::string_view, part_label_count> label_names = {
    "background", "head", "torso", "upper_arm", "lower_arm", "thigh", "shank"};

bool name_has(const std::string& name, std::initializer_list<std::string_view> keys)
{
    for (auto k : keys) {
        if (name.find(k) != std::string::npos) {
            return true;
        }
    }
    return false;
}

std::vector<int> joints_matching(const SkeletonSpec& skeleton, std::initializer_list<std::string_view> keys)
{
    std::vector<int> out;
    for (int j = 0; j < skeleton.joint_count(); ++j) {
        if (name_has(skeleton.joint_names[j], keys)) {
            out.push_back(j);
        }
    }
    return out;
}

// Joints a patch is anchored to: the proximal joint of the part.
std::vector<int> anchor_joints(PartLabel label, const SkeletonSpec& skeleton)
{
    switch (label) {
    case PartLabel::head:
        return joints_matching(skeleton, {"neck"});
    case PartLabel::torso:
        return joints_matching(skeleton, {"thorax", "neck", "shoulder"});
    case PartLabel::upper_arm:
        return joints_matching(skeleton, {"shoulder"});
    case PartLabel::lower_arm:
        return joints_matching(skeleton, {"elbow"});
    case PartLabel::thigh:
        return joints_matching(skeleton, {"hip"});
    case PartLabel::shank:
        return joints_matching(skeleton, {"knee"});
    case PartLabel::background:
        break;
    }
    return {};
}

double cross(Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

// Andrew's monotone chain; returns the hull area.
double hull_area(std::vector<Point2> pts)
{
    if (pts.size() < 3) {
        return 0.0;
    }
    std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    std::vector<Point2> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) {
            --k;
        }
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
        const Point2 p = pts[i - 1];
        while (k >= t && cross(hull[k - 2], hull[k - 1], p) <= 0) {
            --k;
        }
        hull[k++] = p;
    }
    hull.resize(k - 1);
    double area = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Point2 a = hull[i];
        const Point2 b = hull[(i + 1) % hull.size()];
        area += a.x * b.y - b.x * a.y;
    }
    return 0.5 * std::abs(area);
}

Patch resize_patch(const Patch& patch, double factor)
{
    const int w = std::max(1, static_cast<int>(std::lround(patch.pixels.width() * factor)));
    const int h = std::max(1, static_cast<int>(std::lround(patch.pixels.height() * factor)));
    if (w == patch.pixels.width() && h == patch.pixels.height()) {
        return patch;
    }
    const double sx = static_cast<double>(patch.pixels.width()) / w;
    const double sy = static_cast<double>(patch.pixels.height()) / h;
    Patch out = patch;
    out.pixels = Image(w, h, 4);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = (x + 0.5) * sx - 0.5;
            const double v = (y + 0.5) * sy - 0.5;
            const int nx = std::clamp(static_cast<int>(std::lround(u)), 0, patch.pixels.width() - 1);
            const int ny = std::clamp(static_cast<int>(std::lround(v)), 0, patch.pixels.height() - 1);
            const float alpha = patch.pixels.at(nx, ny, 3);
            out.pixels.at(x, y, 3) = alpha;
            for (int c = 0; c < 3; ++c) {
                // Colour comes from the nearest source pixel so transparent neighbours never bleed in.
                out.pixels.at(x, y, c) = patch.pixels.at(nx, ny, c);
            }
        }
    }
    out.anchor_offset = {std::clamp((patch.anchor_offset.x + 0.5) / sx - 0.5, 0.0, w - 1.0),
                         std::clamp((patch.anchor_offset.y + 0.5) / sy - 0.5, 0.0, h - 1.0)};
    return out;
}

} // namespace

std::string_view to_string(PartLabel label) { return label_names.at(static_cast<std::size_t>(label)); }

PartLabel part_label_from_string(std::string_view name)
{
    for (std::size_t i = 0; i < label_names.size(); ++i) {
        if (label_names[i] == name) {
            return static_cast<PartLabel>(i);
        }
    }
    throw std::invalid_argument("unknown part label '" + std::string(name) + "'");
}

std::map<int, std::string> default_label_map()
{
    std::map<int, std::string> m;
    for (std::size_t i = 0; i < label_names.size(); ++i) {
        m[static_cast<int>(i)] = std::string(label_names[i]);
    }
    return m;
}

int Patch::opaque_count() const
{
    int n = 0;
    for (int y = 0; y < pixels.height(); ++y) {
        for (int x = 0; x < pixels.width(); ++x) {
            n += pixels.at(x, y, 3) > 0.0f ? 1 : 0;
        }
    }
    return n;
}

void Patch::validate() const
{
    if (pixels.channels() != 4 || pixels.empty()) {
        throw std::invalid_argument("patch '" + source_id + "': pixels must be a non-empty RGBA image");
    }
    if (label != PartLabel::background && opaque_count() == 0) {
        throw std::invalid_argument("patch '" + source_id + "': body-part patch without opaque pixels");
    }
    if (anchor_offset.x < 0 || anchor_offset.y < 0 || anchor_offset.x > pixels.width() - 1 ||
        anchor_offset.y > pixels.height() - 1) {
        throw std::invalid_argument("patch '" + source_id + "': anchor outside patch bounds");
    }
}

void PatchPool::add(Patch patch)
{
    patch.validate();
    by_label_[static_cast<std::size_t>(patch.label)].push_back(patches_.size());
    patches_.push_back(std::move(patch));
}

const std::vector<std::size_t>& PatchPool::indices(PartLabel label) const
{
    return by_label_.at(static_cast<std::size_t>(label));
}

std::vector<const Patch*> PatchPool::by_label(PartLabel label) const
{
    std::vector<const Patch*> out;
    for (std::size_t i : indices(label)) {
        out.push_back(&patches_[i]);
    }
    return out;
}

std::size_t PatchPool::body_part_count() const { return size() - indices(PartLabel::background).size(); }

void PatchPool::save(const std::filesystem::path& dir) const
{
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["rng_seed"] = rng_seed;
    manifest["patches"] = nlohmann::json::array();
    for (std::size_t i = 0; i < patches_.size(); ++i) {
        std::ostringstream name;
        name << "patch_" << std::setw(5) << std::setfill('0') << i << ".png";
        save_png(patches_[i].pixels, dir / name.str());
        manifest["patches"].push_back({{"file", name.str()},
                                       {"label", to_string(patches_[i].label)},
                                       {"anchor_offset", {patches_[i].anchor_offset.x, patches_[i].anchor_offset.y}},
                                       {"source_id", patches_[i].source_id},
                                       {"reference_length", patches_[i].reference_length}});
    }
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) {
        throw std::runtime_error("cannot write pool manifest in " + dir.string());
    }
}

PatchPool PatchPool::load(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "manifest.json");
    if (!in) {
        throw std::runtime_error("cannot open pool manifest in " + dir.string());
    }
    const nlohmann::json manifest = nlohmann::json::parse(in);
    PatchPool pool;
    pool.rng_seed = manifest.value("rng_seed", std::uint64_t{0});
    for (const auto& e : manifest.at("patches")) {
        Patch p;
        p.pixels = load_png(dir / e.at("file").get<std::string>());
        if (p.pixels.channels() != 4) {
            throw std::runtime_error("pool patch is not RGBA: " + e.at("file").get<std::string>());
        }
        p.label = part_label_from_string(e.at("label").get<std::string>());
        p.anchor_offset = {e.at("anchor_offset").at(0).get<double>(), e.at("anchor_offset").at(1).get<double>()};
        p.source_id = e.at("source_id").get<std::string>();
        p.reference_length = e.value("reference_length", 0.0);
        pool.add(std::move(p));
    }
    return pool;
}

std::vector<Region> connected_regions(const LabelMap& labels)
{
    const int w = labels.width();
    const int h = labels.height();
    std::vector<int> seen(static_cast<std::size_t>(w) * h, 0);
    std::vector<Region> regions;
    std::vector<int> stack;
    for (int start = 0; start < w * h; ++start) {
        const std::uint8_t label = labels.data()[start];
        if (label == 0 || seen[start]) {
            continue;
        }
        Region region{label, {}};
        stack.push_back(start);
        seen[start] = 1;
        while (!stack.empty()) {
            const int idx = stack.back();
            stack.pop_back();
            region.pixels.push_back(idx);
            const int x = idx % w;
            const int y = idx / w;
            const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
            for (const auto& n : nbr) {
                if (n[0] < 0 || n[1] < 0 || n[0] >= w || n[1] >= h) {
                    continue;
                }
                const int ni = n[1] * w + n[0];
                if (!seen[ni] && labels.data()[ni] == label) {
                    seen[ni] = 1;
                    stack.push_back(ni);
                }
            }
        }
        std::sort(region.pixels.begin(), region.pixels.end());
        regions.push_back(std::move(region));
    }
    return regions;
}

double solidity(const Region& region, int width)
{
    std::vector<Point2> corners;
    corners.reserve(region.pixels.size() * 4);
    for (int idx : region.pixels) {
        const double x = idx % width;
        const double y = idx / width;
        corners.push_back({x, y});
        corners.push_back({x + 1, y});
        corners.push_back({x, y + 1});
        corners.push_back({x + 1, y + 1});
    }
    const double hull = hull_area(std::move(corners));
    return hull > 0.0 ? static_cast<double>(region.pixels.size()) / hull : 0.0;
}

double pose_reference_length(const Pose& pose)
{
    try {
        const BoundingBox box = pose_to_bbox(pose, 0.0);
        return std::hypot(box.width(), box.height());
    } catch (const std::domain_error&) {
        return 0.0;
    }
}

PatchPool build_pool(std::span<const PoolSource> sources, const PoolBuildConfig& cfg)
{
    PatchPool pool;
    pool.rng_seed = cfg.seed;
    std::mt19937_64 rng(cfg.seed);
    for (std::size_t s = 0; s < sources.size(); ++s) {
        const PoolSource& src = sources[s];
        if (!src.image || !src.parsing) {
            throw std::invalid_argument("build_pool: source " + std::to_string(s) + " lacks image or parsing mask");
        }
        const Image& img = *src.image;
        const LabelMap& parsing = *src.parsing;
        if (img.width() != parsing.width() || img.height() != parsing.height()) {
            throw std::invalid_argument("build_pool: source " + std::to_string(s) + " ('" + src.id +
                                        "') mask size differs from image size");
        }
        if (img.channels() != 3) {
            throw std::invalid_argument("build_pool: source " + std::to_string(s) + " must be RGB");
        }
        const double ref = pose_reference_length(src.pose);
        const int w = img.width();
        int part_index = 0;
        for (const Region& region : connected_regions(parsing)) {
            if (region.label >= part_label_count) {
                continue;
            }
            if (static_cast<int>(region.pixels.size()) < cfg.min_area) {
                continue;
            }
            int x0 = w, y0 = img.height(), x1 = -1, y1 = -1;
            double cx = 0.0, cy = 0.0;
            for (int idx : region.pixels) {
                const int x = idx % w;
                const int y = idx / w;
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
                cx += x;
                cy += y;
            }
            const int bw = x1 - x0 + 1;
            const int bh = y1 - y0 + 1;
            if (static_cast<double>(std::max(bw, bh)) / std::min(bw, bh) > cfg.max_aspect) {
                continue;
            }
            if (solidity(region, w) < cfg.min_solidity) {
                continue;
            }
            cx /= region.pixels.size();
            cy /= region.pixels.size();

            Patch patch;
            patch.label = static_cast<PartLabel>(region.label);
            patch.source_id = src.id + "/part" + std::to_string(part_index++);
            patch.reference_length = ref;
            patch.pixels = Image(bw, bh, 4);
            for (int idx : region.pixels) {
                const int x = idx % w;
                const int y = idx / w;
                for (int c = 0; c < 3; ++c) {
                    patch.pixels.at(x - x0, y - y0, c) = img.at(x, y, c);
                }
                patch.pixels.at(x - x0, y - y0, 3) = 1.0f;
            }
            Point2 anchor{cx, cy};
            double best = std::numeric_limits<double>::infinity();
            if (src.pose.skeleton_ptr()) {
                for (int j : anchor_joints(patch.label, src.pose.skeleton())) {
                    const Keypoint& k = src.pose[j];
                    if (k.visibility == Visibility::outer) {
                        continue;
                    }
                    const double d = distance(k.position(), {cx, cy});
                    if (d < best) {
                        best = d;
                        anchor = k.position();
                    }
                }
            }
            patch.anchor_offset = {std::clamp(anchor.x - x0, 0.0, bw - 1.0), std::clamp(anchor.y - y0, 0.0, bh - 1.0)};
            pool.add(std::move(patch));
        }

        // Background patches: squares made only of unlabeled pixels.
        const int side = std::max(4, static_cast<int>(std::lround(cfg.background_side_fraction *
                                                                   (ref > 0 ? ref : std::min(w, img.height())))));
        if (side >= w || side >= img.height()) {
            continue;
        }
        int made = 0;
        for (int attempt = 0; attempt < 50 && made < cfg.background_per_image; ++attempt) {
            const int x0 = std::uniform_int_distribution<int>(0, w - side)(rng);
            const int y0 = std::uniform_int_distribution<int>(0, img.height() - side)(rng);
            bool clean = true;
            for (int y = y0; y < y0 + side && clean; ++y) {
                for (int x = x0; x < x0 + side; ++x) {
                    if (parsing.at(x, y) != 0) {
                        clean = false;
                        break;
                    }
                }
            }
            if (!clean) {
                continue;
            }
            Patch patch;
            patch.label = PartLabel::background;
            patch.source_id = src.id + "/bg" + std::to_string(made);
            patch.reference_length = ref;
            patch.pixels = Image(side, side, 4);
            for (int y = 0; y < side; ++y) {
                for (int x = 0; x < side; ++x) {
                    for (int c = 0; c < 3; ++c) {
                        patch.pixels.at(x, y, c) = img.at(x0 + x, y0 + y, c);
                    }
                    patch.pixels.at(x, y, 3) = 1.0f;
                }
            }
            patch.anchor_offset = {0.5 * (side - 1), 0.5 * (side - 1)};
            pool.add(std::move(patch));
            ++made;
        }
    }
    return pool;
}

std::vector<int> articulating_joints(PartLabel label, const SkeletonSpec& skeleton)
{
    switch (label) {
    case PartLabel::head:
        return joints_matching(skeleton, {"head", "neck"});
    case PartLabel::torso:
        return joints_matching(skeleton, {"shoulder", "hip", "thorax", "pelvis"});
    case PartLabel::upper_arm:
        return joints_matching(skeleton, {"shoulder", "elbow"});
    case PartLabel::lower_arm:
        return joints_matching(skeleton, {"elbow", "wrist"});
    case PartLabel::thigh:
        return joints_matching(skeleton, {"hip", "knee"});
    case PartLabel::shank:
        return joints_matching(skeleton, {"knee", "ankle"});
    case PartLabel::background:
        break;
    }
    return {};
}

std::vector<int> limb_joints(const SkeletonSpec& skeleton)
{
    return joints_matching(skeleton, {"shoulder", "elbow", "wrist", "hip", "knee", "ankle"});
}

MountingPolicy MountingPolicy::defaults(const SkeletonSpec& skeleton)
{
    MountingPolicy p;
    const int J = skeleton.joint_count();
    const auto limbs = limb_joints(skeleton);
    p.affinity.assign(part_label_count, std::vector<double>(J, 0.0));
    for (int l = 0; l < part_label_count; ++l) {
        auto& row = p.affinity[l];
        const auto label = static_cast<PartLabel>(l);
        const auto art = articulating_joints(label, skeleton);
        if (label == PartLabel::background || art.empty()) {
            std::fill(row.begin(), row.end(), 1.0 / J);
            continue;
        }
        std::vector<int> others;
        for (int j : limbs) {
            if (std::find(art.begin(), art.end(), j) == art.end()) {
                others.push_back(j);
            }
        }
        double uniform = 0.1;
        double semantic = 0.6;
        if (others.empty()) {
            semantic += 0.3;
        }
        for (int j = 0; j < J; ++j) {
            row[j] = uniform / J;
        }
        for (int j : art) {
            row[j] += semantic / art.size();
        }
        for (int j : others) {
            row[j] += 0.3 / others.size();
        }
    }
    return p;
}

void MountingPolicy::validate(int joint_count) const
{
    auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!prob(image_probability) || !prob(on_joint_ratio)) {
        throw std::invalid_argument("mounting policy: probabilities must lie in [0, 1]");
    }
    if (min_patches < 0 || max_patches_per_image < min_patches) {
        throw std::invalid_argument("mounting policy: need 0 <= min_patches <= max_patches_per_image");
    }
    if (jitter_radius < 0 || near_inner < 0 || near_outer < near_inner) {
        throw std::invalid_argument("mounting policy: invalid placement radii");
    }
    if (static_cast<int>(affinity.size()) != part_label_count) {
        throw std::invalid_argument("mounting policy: affinity table needs one row per part label");
    }
    for (std::size_t l = 0; l < affinity.size(); ++l) {
        const auto& row = affinity[l];
        if (static_cast<int>(row.size()) != joint_count) {
            throw std::invalid_argument("mounting policy: affinity row " + std::to_string(l) + " has wrong length");
        }
        double sum = 0.0;
        for (double v : row) {
            if (!prob(v)) {
                throw std::invalid_argument("mounting policy: affinity entries must lie in [0, 1]");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument("mounting policy: affinity row " + std::to_string(l) + " does not sum to 1");
        }
    }
}

int sample_target_joint(PartLabel label, const MountingPolicy& policy, std::mt19937_64& rng)
{
    const auto& row = policy.affinity.at(static_cast<std::size_t>(label));
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
        acc += row[j];
        if (u < acc) {
            return static_cast<int>(j);
        }
    }
    // Rounding left u above the running sum: take the last joint with mass.
    for (std::size_t j = row.size(); j-- > 0;) {
        if (row[j] > 0.0) {
            return static_cast<int>(j);
        }
    }
    return 0;
}

LabelMap PdaRecord::support(int width, int height) const
{
    LabelMap out(width, height);
    for (const auto& p : placements) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                if (p.mask.at(x, y)) {
                    out.at(x, y) = 1;
                }
            }
        }
    }
    return out;
}

PdaResult apply_pda(const Image& image, const Pose& pose, const PatchPool& pool, const MountingPolicy& policy,
                    std::mt19937_64& rng)
{
    PdaResult result{image, {}};
    if (pool.empty()) {
        return result;
    }
    policy.validate(pose.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) >= policy.image_probability) {
        return result;
    }
    const int count = std::uniform_int_distribution<int>(policy.min_patches, policy.max_patches_per_image)(rng);
    const double target_ref = pose_reference_length(pose);
    Image& out = result.image;
    const int channels = std::min(3, out.channels());

    for (int n = 0; n < count; ++n) {
        const std::size_t index = std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng);
        const Patch& source = pool[index];
        int joint = -1;
        for (int attempt = 0; attempt < 10; ++attempt) {
            const int j = sample_target_joint(source.label, policy, rng);
            if (pose[j].visibility != Visibility::outer) {
                joint = j;
                break;
            }
        }
        if (joint < 0) {
            continue;
        }
        const double factor =
            source.reference_length > 0.0 && target_ref > 0.0 ? target_ref / source.reference_length : 1.0;
        const Patch patch = resize_patch(source, factor);
        const bool on = unit(rng) < policy.on_joint_ratio;
        const double angle = unit(rng) * 2.0 * std::numbers::pi;
        double radius;
        if (on) {
            radius = policy.jitter_radius * std::sqrt(unit(rng));
        } else {
            const double diag = std::hypot(patch.pixels.width(), patch.pixels.height());
            radius = diag * (policy.near_inner + (policy.near_outer - policy.near_inner) * unit(rng));
        }
        const Point2 anchor_pos{pose[joint].x + radius * std::cos(angle), pose[joint].y + radius * std::sin(angle)};
        const int ox = static_cast<int>(std::lround(anchor_pos.x - patch.anchor_offset.x));
        const int oy = static_cast<int>(std::lround(anchor_pos.y - patch.anchor_offset.y));

        PdaPlacement placement;
        placement.patch_index = index;
        placement.label = source.label;
        placement.target_joint = joint;
        placement.on_joint = on;
        placement.anchor_position = anchor_pos;
        placement.mask = LabelMap(out.width(), out.height());
        for (int y = 0; y < patch.pixels.height(); ++y) {
            for (int x = 0; x < patch.pixels.width(); ++x) {
                const float a = patch.pixels.at(x, y, 3);
                const int tx = ox + x;
                const int ty = oy + y;
                if (a <= 0.0f || !out.contains(tx, ty)) {
                    continue;
                }
                for (int c = 0; c < channels; ++c) {
                    out.at(tx, ty, c) = a * patch.pixels.at(x, y, c) + (1.0f - a) * out.at(tx, ty, c);
                }
                placement.mask.at(tx, ty) = 1;
            }
        }
        result.record.placements.push_back(std::move(placement));
    }

    if (policy.relabel_occluded) {
        Pose relabeled = pose;
        const LabelMap support = result.record.support(out.width(), out.height());
        for (int j = 0; j < relabeled.size(); ++j) {
            auto& k = relabeled[j];
            const int x = static_cast<int>(std::lround(k.x));
            const int y = static_cast<int>(std::lround(k.y));
            if (k.visibility == Visibility::visible && out.contains(x, y) && support.at(x, y)) {
                k.visibility = Visibility::occluded;
            }
        }
        result.record.relabeled_pose = std::move(relabeled);
    }
    return result;
}

AugmentConfig AugmentConfig::identity()
{
    AugmentConfig c;
    c.scale_range = {1.0, 1.0};
    c.rotation_range = {0.0, 0.0};
    c.hflip_prob = 0.0;
    c.color_jitter = 0.0;
    c.pda_enabled = false;
    return c;
}

void AugmentConfig::validate() const
{
    if (!(scale_range[0] > 0.0) || scale_range[0] > scale_range[1]) {
        throw std::invalid_argument("augment: scale_range must be positive and ordered");
    }
    if (rotation_range[0] > rotation_range[1]) {
        throw std::invalid_argument("augment: rotation_range must be ordered");
    }
    if (hflip_prob < 0.0 || hflip_prob > 1.0) {
        throw std::invalid_argument("augment: hflip_prob must lie in [0, 1]");
    }
    if (color_jitter < 0.0 || color_jitter >= 1.0) {
        throw std::invalid_argument("augment: color_jitter must lie in [0, 1)");
    }
}

StandardDraw draw_standard(const AugmentConfig& cfg, std::mt19937_64& rng)
{
    cfg.validate();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    StandardDraw d;
    d.scale = cfg.scale_range[0] + (cfg.scale_range[1] - cfg.scale_range[0]) * unit(rng);
    d.rotation = cfg.rotation_range[0] + (cfg.rotation_range[1] - cfg.rotation_range[0]) * unit(rng);
    d.flip = unit(rng) < cfg.hflip_prob;
    for (auto& g : d.gains) {
        g = static_cast<float>(1.0 + cfg.color_jitter * (2.0 * unit(rng) - 1.0));
    }
    return d;
}

StandardResult apply_draw(const Image& image, const Pose& pose, Point2 center, const StandardDraw& draw)
{
    CropTransform t;
    const double hw = 0.5 * image.width();
    const double hh = 0.5 * image.height();
    t.source_box = {center.x - hw, center.y - hh, center.x + hw, center.y + hh};
    t.output_width = image.width();
    t.output_height = image.height();
    t.zoom = draw.scale;
    t.rotation = draw.rotation;
    t.flipped = draw.flip;
    t.output_center = center;

    StandardResult r;
    r.transform = t;
    const bool geometric = draw.scale != 1.0 || draw.rotation != 0.0 || draw.flip;
    r.image = geometric ? warp_image(image, t) : image;
    r.pose = geometric ? map_pose(pose, t, MapDirection::forward, true) : pose;
    const bool photometric = draw.gains != std::array<float, 3>{1.0f, 1.0f, 1.0f};
    if (photometric) {
        for (int y = 0; y < r.image.height(); ++y) {
            for (int x = 0; x < r.image.width(); ++x) {
                for (int c = 0; c < std::min(3, r.image.channels()); ++c) {
                    r.image.at(x, y, c) = std::clamp(r.image.at(x, y, c) * draw.gains[c], 0.0f, 1.0f);
                }
            }
        }
    }
    return r;
}

StandardResult apply_standard(const Image& image, const Pose& pose, Point2 center, const AugmentConfig& cfg,
                              std::mt19937_64& rng)
{
    return apply_draw(image, pose, center, draw_standard(cfg, rng));
}

StandardResult apply_standard(const Image& image, const Pose& pose, const AugmentConfig& cfg, std::mt19937_64& rng)
{
    Point2 center{0.5 * (image.width() - 1), 0.5 * (image.height() - 1)};
    try {
        center = pose_to_bbox(pose, 0.0).center();
    } catch (const std::domain_error&) {
    }
    return apply_standard(image, pose, center, cfg, rng);
}

} // namespace ranet
