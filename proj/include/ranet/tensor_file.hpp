// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ranet {

/// Named float32 tensor stored in a tensor container.
struct NamedTensor {
    std::string name;
    std::vector<std::uint64_t> shape;
    std::vector<float> data;

    std::uint64_t element_count() const;
};

/// Container used for heatmap dumps and model checkpoints.
///
/// Layout (all integers little-endian):
///   char[8]  magic "RANETTF1"
///   u32      format version (1)
///   u32      metadata byte length, followed by UTF-8 metadata (JSON, may be empty)
///   u32      tensor count
///   per tensor:
///     u32 name length, name bytes
///     u8  dtype (1 = float32)
///     u32 rank, u64 dims[rank]
///     float32 data[prod(dims)]
struct TensorFile {
    std::string metadata;
    std::vector<NamedTensor> tensors;

    const NamedTensor* find(const std::string& name) const;
    const NamedTensor& at(const std::string& name) const;
};

void write_tensor_file(const TensorFile& file, const std::filesystem::path& path);
TensorFile read_tensor_file(const std::filesystem::path& path);

} // namespace ranet
