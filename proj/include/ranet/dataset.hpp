// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ranet/augment.hpp"
#include "ranet/geometry.hpp"
#include "ranet/image.hpp"
#include "ranet/synthetic.hpp"

namespace ranet {

/// Annotation file or manifest does not follow the documented schema.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct ManifestRecord {
    std::string id;
    std::filesystem::path image; // relative paths resolve against DatasetManifest::root
    Point2 center;
    double scale = 1.0; // person size / 200 px
    Pose pose;
    std::optional<BoundingBox> head_bbox;
    std::optional<double> torso_reference;
    std::optional<std::filesystem::path> parsing;

    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
    std::shared_ptr<const SkeletonSpec> skeleton;
    Split split = Split::train;
    std::vector<ManifestRecord> samples;
    std::filesystem::path root;

    std::filesystem::path resolve(const std::filesystem::path& p) const;
    /// Joint counts, positive scales, unique ids and (optionally) that the files exist.
    void validate(bool check_files = true) const;

    /// Equal skeleton, split and records; the root directory is not compared.
    friend bool operator==(const DatasetManifest& a, const DatasetManifest& b);
};

/// Manifest JSON:
///   {"skeleton": "mpii", "split": "val", "samples": [{"id", "image", "center": [x, y], "scale",
///     "joints": [[x, y, v], ...], "head_bbox": [x0, y0, x1, y1], "torso_reference", "parsing"}]}
/// `v` is 2/1/0 or "visible"/"occluded"/"outer".
nlohmann::json manifest_to_json(const DatasetManifest& manifest);
/// Throws SchemaError naming the offending record index.
DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& root,
                                   std::string_view default_skeleton = "mpii");
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

enum class IngestFormat { mpii_json, lsp_json, synthetic };
IngestFormat ingest_format_from_string(std::string_view name);

struct IngestOptions {
    Split split = Split::train;
    SyntheticConfig synthetic; // synthetic format only
};

/// mpii_json / lsp_json: validate an annotation file (manifest schema; LSP records without a torso
/// reference get the right-shoulder to left-hip distance).
/// synthetic: render images and parsing masks into directory `path` and write manifest.json there.
DatasetManifest ingest(IngestFormat format, const std::filesystem::path& path, const IngestOptions& options = {});

/// Images (and parsing masks when present) of a manifest, in record order.
struct LoadedDataset {
    DatasetManifest manifest;
    std::vector<Image> images;
    std::vector<std::optional<LabelMap>> parsing;
};
LoadedDataset load_dataset(const DatasetManifest& manifest, bool with_parsing = false);

/// In-memory synthetic dataset (image paths are set but nothing is written).
LoadedDataset synthetic_dataset(const SyntheticConfig& cfg, Split split);

/// Pool sources for every record that has a parsing mask.
std::vector<PoolSource> pool_sources(const LoadedDataset& data);

} // namespace ranet
