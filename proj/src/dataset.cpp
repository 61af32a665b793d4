// SPDX-License-Identifier: Apache-2.0
#include "ranet/dataset.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace ranet {

namespace {

using nlohmann::json;

[[noreturn]] void record_error(std::size_t index, const std::string& what)
{
    throw SchemaError("record " + std::to_string(index) + ": " + what);
}

Visibility parse_visibility(const json& v, std::size_t index)
{
    if (v.is_number_integer()) {
        switch (v.get<int>()) {
        case 2:
            return Visibility::visible;
        case 1:
            return Visibility::occluded;
        case 0:
            return Visibility::outer;
        default:
            break;
        }
        record_error(index, "visibility must be 0, 1 or 2");
    }
    if (v.is_string()) {
        try {
            return visibility_from_string(v.get<std::string>());
        } catch (const std::invalid_argument& e) {
            record_error(index, e.what());
        }
    }
    record_error(index, "visibility must be an integer or a string");
}

int visibility_code(Visibility v)
{
    switch (v) {
    case Visibility::visible:
        return 2;
    case Visibility::occluded:
        return 1;
    case Visibility::outer:
        return 0;
    }
    return 0;
}

double number(const json& j, std::size_t index, const char* what)
{
    if (!j.is_number()) {
        record_error(index, std::string(what) + " must be a number");
    }
    return j.get<double>();
}

ManifestRecord parse_record(const json& r, std::size_t index, const std::shared_ptr<const SkeletonSpec>& skeleton)
{
    if (!r.is_object()) {
        record_error(index, "expected an object");
    }
    for (const char* key : {"image", "center", "scale", "joints"}) {
        if (!r.contains(key)) {
            record_error(index, std::string("missing field '") + key + "'");
        }
    }
    ManifestRecord rec;
    rec.id = r.value("id", "record_" + std::to_string(index));
    if (!r["image"].is_string()) {
        record_error(index, "'image' must be a path string");
    }
    rec.image = r["image"].get<std::string>();
    const json& c = r["center"];
    if (!c.is_array() || c.size() != 2) {
        record_error(index, "'center' must be [x, y]");
    }
    rec.center = {number(c[0], index, "center.x"), number(c[1], index, "center.y")};
    rec.scale = number(r["scale"], index, "scale");
    const json& joints = r["joints"];
    if (!joints.is_array()) {
        record_error(index, "'joints' must be an array");
    }
    if (static_cast<int>(joints.size()) != skeleton->joint_count()) {
        record_error(index, "has " + std::to_string(joints.size()) + " joints, skeleton '" + skeleton->name +
                                "' expects " + std::to_string(skeleton->joint_count()));
    }
    std::vector<Keypoint> kps;
    for (const json& jt : joints) {
        if (!jt.is_array() || jt.size() != 3) {
            record_error(index, "each joint must be [x, y, v]");
        }
        Keypoint k;
        k.x = number(jt[0], index, "joint x");
        k.y = number(jt[1], index, "joint y");
        k.visibility = parse_visibility(jt[2], index);
        kps.push_back(k);
    }
    rec.pose = Pose(skeleton, std::move(kps));
    if (r.contains("head_bbox")) {
        const json& b = r["head_bbox"];
        if (!b.is_array() || b.size() != 4) {
            record_error(index, "'head_bbox' must be [x0, y0, x1, y1]");
        }
        rec.head_bbox = BoundingBox{number(b[0], index, "head_bbox"), number(b[1], index, "head_bbox"),
                                    number(b[2], index, "head_bbox"), number(b[3], index, "head_bbox")};
    }
    if (r.contains("torso_reference")) {
        rec.torso_reference = number(r["torso_reference"], index, "torso_reference");
    }
    if (r.contains("parsing")) {
        if (!r["parsing"].is_string()) {
            record_error(index, "'parsing' must be a path string");
        }
        rec.parsing = std::filesystem::path(r["parsing"].get<std::string>());
    }
    return rec;
}

json load_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

std::filesystem::path parent_or_current(const std::filesystem::path& path)
{
    const auto parent = path.parent_path();
    return parent.empty() ? std::filesystem::path(".") : parent;
}

ManifestRecord synthetic_record(const SyntheticSample& s)
{
    ManifestRecord rec;
    rec.id = s.id;
    rec.image = std::filesystem::path("images") / (s.id + ".png");
    rec.parsing = std::filesystem::path("parsing") / (s.id + ".png");
    rec.center = s.center;
    rec.scale = s.scale;
    rec.pose = s.pose;
    rec.head_bbox = s.head_bbox;
    return rec;
}

DatasetManifest ingest_synthetic(const std::filesystem::path& dir, const IngestOptions& options)
{
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "parsing");
    DatasetManifest m;
    m.skeleton = SkeletonSpec::mpii();
    m.split = options.split;
    m.root = dir;
    for (int i = 0; i < options.synthetic.count; ++i) {
        const SyntheticSample s = generate_synthetic(options.synthetic, i);
        ManifestRecord rec = synthetic_record(s);
        save_png(s.image, dir / rec.image);
        save_label_png(s.parsing, dir / *rec.parsing);
        m.samples.push_back(std::move(rec));
    }
    write_manifest(m, dir / "manifest.json");
    return m;
}

Image to_rgb(const Image& img)
{
    if (img.channels() == 3) {
        return img;
    }
    Image out(img.width(), img.height(), 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = img.at(x, y, img.channels() == 1 ? 0 : c);
            }
        }
    }
    return out;
}

} // namespace

std::string_view to_string(Split split)
{
    switch (split) {
    case Split::train:
        return "train";
    case Split::val:
        return "val";
    case Split::test:
        return "test";
    }
    return "train";
}

Split split_from_string(std::string_view name)
{
    if (name == "train") {
        return Split::train;
    }
    if (name == "val") {
        return Split::val;
    }
    if (name == "test") {
        return Split::test;
    }
    throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

std::filesystem::path DatasetManifest::resolve(const std::filesystem::path& p) const
{
    return p.is_absolute() || root.empty() ? p : root / p;
}

void DatasetManifest::validate(bool check_files) const
{
    if (!skeleton) {
        throw SchemaError("manifest without skeleton");
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& r = samples[i];
        if (r.pose.size() != skeleton->joint_count()) {
            record_error(i, "joint count does not match skeleton '" + skeleton->name + "'");
        }
        if (!(r.scale > 0.0) || !std::isfinite(r.scale)) {
            record_error(i, "scale must be positive");
        }
        if (!ids.insert(r.id).second) {
            record_error(i, "duplicate id '" + r.id + "'");
        }
        if (r.head_bbox && !(r.head_bbox->width() > 0.0 && r.head_bbox->height() > 0.0)) {
            record_error(i, "head_bbox has no area");
        }
        if (r.torso_reference && !(*r.torso_reference > 0.0)) {
            record_error(i, "torso_reference must be positive");
        }
        if (check_files) {
            if (!std::filesystem::exists(resolve(r.image))) {
                record_error(i, "image not found: " + resolve(r.image).string());
            }
            if (r.parsing && !std::filesystem::exists(resolve(*r.parsing))) {
                record_error(i, "parsing mask not found: " + resolve(*r.parsing).string());
            }
        }
    }
}

bool operator==(const DatasetManifest& a, const DatasetManifest& b)
{
    const bool same_skeleton = a.skeleton && b.skeleton ? a.skeleton->name == b.skeleton->name : a.skeleton == b.skeleton;
    return same_skeleton && a.split == b.split && a.samples == b.samples;
}

json manifest_to_json(const DatasetManifest& manifest)
{
    json samples = json::array();
    for (const auto& r : manifest.samples) {
        json joints = json::array();
        for (const auto& k : r.pose.keypoints()) {
            joints.push_back({k.x, k.y, visibility_code(k.visibility)});
        }
        json rec = {{"id", r.id},
                    {"image", r.image.generic_string()},
                    {"center", {r.center.x, r.center.y}},
                    {"scale", r.scale},
                    {"joints", joints}};
        if (r.head_bbox) {
            rec["head_bbox"] = {r.head_bbox->x_min, r.head_bbox->y_min, r.head_bbox->x_max, r.head_bbox->y_max};
        }
        if (r.torso_reference) {
            rec["torso_reference"] = *r.torso_reference;
        }
        if (r.parsing) {
            rec["parsing"] = r.parsing->generic_string();
        }
        samples.push_back(std::move(rec));
    }
    return {{"skeleton", manifest.skeleton ? manifest.skeleton->name : "mpii"},
            {"split", std::string(to_string(manifest.split))},
            {"samples", samples}};
}

DatasetManifest manifest_from_json(const json& j, const std::filesystem::path& root, std::string_view default_skeleton)
{
    if (!j.is_object()) {
        throw SchemaError("manifest must be a JSON object");
    }
    DatasetManifest m;
    m.root = root;
    try {
        m.skeleton = SkeletonSpec::by_name(j.value("skeleton", std::string(default_skeleton)));
        m.split = split_from_string(j.value("split", std::string("train")));
    } catch (const std::invalid_argument& e) {
        throw SchemaError(e.what());
    }
    if (!j.contains("samples") || !j["samples"].is_array()) {
        throw SchemaError("manifest needs a 'samples' array");
    }
    const json& samples = j["samples"];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        m.samples.push_back(parse_record(samples[i], i, m.skeleton));
    }
    m.validate(false);
    return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << manifest_to_json(manifest).dump(1) << "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& path)
{
    return manifest_from_json(load_json_file(path), parent_or_current(path));
}

IngestFormat ingest_format_from_string(std::string_view name)
{
    if (name == "mpii_json") {
        return IngestFormat::mpii_json;
    }
    if (name == "lsp_json") {
        return IngestFormat::lsp_json;
    }
    if (name == "synthetic") {
        return IngestFormat::synthetic;
    }
    throw std::invalid_argument("unknown ingest format '" + std::string(name) + "'");
}

DatasetManifest ingest(IngestFormat format, const std::filesystem::path& path, const IngestOptions& options)
{
    if (format == IngestFormat::synthetic) {
        return ingest_synthetic(path, options);
    }
    json j = load_json_file(path);
    if (j.is_object() && !j.contains("split")) {
        j["split"] = std::string(to_string(options.split));
    }
    const bool lsp = format == IngestFormat::lsp_json;
    DatasetManifest m = manifest_from_json(j, parent_or_current(path), lsp ? "lsp" : "mpii");
    for (std::size_t i = 0; i < m.samples.size(); ++i) {
        auto& r = m.samples[i];
        if (lsp && !r.torso_reference) {
            const int rs = m.skeleton->index_of("r_shoulder");
            const int lh = m.skeleton->index_of("l_hip");
            if (r.pose[rs].visibility == Visibility::outer || r.pose[lh].visibility == Visibility::outer) {
                record_error(i, "no torso_reference and the torso joints are not annotated");
            }
            r.torso_reference = distance(r.pose[rs].position(), r.pose[lh].position());
        }
        if (!lsp && !r.head_bbox) {
            record_error(i, "mpii records need 'head_bbox'");
        }
    }
    m.validate(true);
    return m;
}

LoadedDataset load_dataset(const DatasetManifest& manifest, bool with_parsing)
{
    LoadedDataset d;
    d.manifest = manifest;
    for (const auto& r : manifest.samples) {
        d.images.push_back(to_rgb(load_png(manifest.resolve(r.image))));
        if (with_parsing && r.parsing) {
            d.parsing.push_back(load_label_png(manifest.resolve(*r.parsing)));
        } else {
            d.parsing.emplace_back();
        }
    }
    return d;
}

LoadedDataset synthetic_dataset(const SyntheticConfig& cfg, Split split)
{
    LoadedDataset d;
    d.manifest.skeleton = SkeletonSpec::mpii();
    d.manifest.split = split;
    for (int i = 0; i < cfg.count; ++i) {
        SyntheticSample s = generate_synthetic(cfg, i);
        d.manifest.samples.push_back(synthetic_record(s));
        d.images.push_back(std::move(s.image));
        d.parsing.emplace_back(std::move(s.parsing));
    }
    return d;
}

std::vector<PoolSource> pool_sources(const LoadedDataset& data)
{
    std::vector<PoolSource> out;
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        if (data.parsing[i]) {
            out.push_back({&data.images[i], &*data.parsing[i], data.manifest.samples[i].pose, data.manifest.samples[i].id});
        }
    }
    return out;
}

} // namespace ranet
