// SPDX-License-Identifier: Apache-2.0
#include "ranet/tensor_file.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace ranet {

static_assert(std::endian::native == std::endian::little, "tensor container assumes a little-endian host");

namespace {

constexpr std::array<char, 8> magic = {'R', 'A', 'N', 'E', 'T', 'T', 'F', '1'};
constexpr std::uint32_t format_version = 1;
constexpr std::uint8_t dtype_float32 = 1;

template <typename T>
void put(std::ostream& out, T value)
{
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in)
{
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw std::runtime_error("tensor file truncated");
    }
    return value;
}

std::string get_string(std::istream& in, std::uint32_t length)
{
    std::string s(length, '\0');
    in.read(s.data(), length);
    if (!in) {
        throw std::runtime_error("tensor file truncated");
    }
    return s;
}

} // namespace

std::uint64_t NamedTensor::element_count() const
{
    return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1}, std::multiplies<>());
}

const NamedTensor* TensorFile::find(const std::string& name) const
{
    for (const auto& t : tensors) {
        if (t.name == name) {
            return &t;
        }
    }
    return nullptr;
}

const NamedTensor& TensorFile::at(const std::string& name) const
{
    if (const auto* t = find(name)) {
        return *t;
    }
    throw std::out_of_range("tensor '" + name + "' not found");
}

void write_tensor_file(const TensorFile& file, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out.write(magic.data(), magic.size());
    put<std::uint32_t>(out, format_version);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(file.metadata.size()));
    out.write(file.metadata.data(), static_cast<std::streamsize>(file.metadata.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(file.tensors.size()));
    for (const auto& t : file.tensors) {
        if (t.element_count() != t.data.size()) {
            throw std::invalid_argument("tensor '" + t.name + "' shape does not match its data");
        }
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put<std::uint8_t>(out, dtype_float32);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) {
            put<std::uint64_t>(out, d);
        }
        out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 4));
    }
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

TensorFile read_tensor_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::array<char, 8> head{};
    in.read(head.data(), head.size());
    if (!in || head != magic) {
        throw std::runtime_error(path.string() + " is not a tensor container");
    }
    if (get<std::uint32_t>(in) != format_version) {
        throw std::runtime_error(path.string() + ": unsupported container version");
    }
    TensorFile file;
    file.metadata = get_string(in, get<std::uint32_t>(in));
    const auto count = get<std::uint32_t>(in);
    file.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = get_string(in, get<std::uint32_t>(in));
        if (get<std::uint8_t>(in) != dtype_float32) {
            throw std::runtime_error("tensor '" + t.name + "': unsupported dtype");
        }
        const auto rank = get<std::uint32_t>(in);
        t.shape.resize(rank);
        for (auto& d : t.shape) {
            d = get<std::uint64_t>(in);
        }
        t.data.resize(t.element_count());
        in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 4));
        if (!in) {
            throw std::runtime_error("tensor file truncated in '" + t.name + "'");
        }
        file.tensors.push_back(std::move(t));
    }
    return file;
}

} // namespace ranet
