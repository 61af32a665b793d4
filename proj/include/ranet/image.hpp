// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ranet {

/// Interleaved float image (HWC). Colour values are nominally in [0, 1].
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, float fill = 0.0f);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t size() const noexcept { return data_.size(); }

    float& at(int x, int y, int c) { return data_[index(x, y, c)]; }
    float at(int x, int y, int c) const { return data_[index(x, y, c)]; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y, int c) const noexcept
    {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

/// Per-pixel integer label map (e.g. a human-parsing result).
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(int width, int height, std::uint8_t fill = 0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::uint8_t& at(int x, int y) { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
    std::uint8_t at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
    std::span<const std::uint8_t> data() const noexcept { return labels_; }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> labels_;
};

/// Bilinear sample of channel `c` at sub-pixel position (x, y). Pixel centres sit on
/// integer coordinates; neighbours outside the image contribute zero.
float sample_bilinear(const Image& image, double x, double y, int c);

/// Box-filter downsampling by an integer factor. Width and height must be divisible.
Image area_downsample(const Image& image, int factor);

Image load_png(const std::filesystem::path& path);
void save_png(const Image& image, const std::filesystem::path& path);
LabelMap load_label_png(const std::filesystem::path& path);
void save_label_png(const LabelMap& labels, const std::filesystem::path& path);

} // namespace ranet
