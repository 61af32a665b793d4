// SPDX-License-Identifier: Apache-2.0
#include "ranet/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <opencv2/imgcodecs.hpp>

namespace ranet {

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels)
{
    if (width < 0 || height < 0 || channels <= 0) {
        throw std::invalid_argument("image dimensions must be non-negative with at least one channel");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

LabelMap::LabelMap(int width, int height, std::uint8_t fill) : width_(width), height_(height)
{
    if (width < 0 || height < 0) {
        throw std::invalid_argument("label map dimensions must be non-negative");
    }
    labels_.assign(static_cast<std::size_t>(width) * height, fill);
}

float sample_bilinear(const Image& image, double x, double y, int c)
{
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const double ax = x - fx;
    const double ay = y - fy;

    auto value = [&](int px, int py) -> double {
        return image.contains(px, py) ? image.at(px, py, c) : 0.0;
    };

    // Exact lattice hits skip the blend so identity warps reproduce pixels bit-for-bit.
    if (ax == 0.0 && ay == 0.0) {
        return static_cast<float>(value(x0, y0));
    }
    const double top = value(x0, y0) * (1.0 - ax) + value(x0 + 1, y0) * ax;
    const double bottom = value(x0, y0 + 1) * (1.0 - ax) + value(x0 + 1, y0 + 1) * ax;
    return static_cast<float>(top * (1.0 - ay) + bottom * ay);
}

Image area_downsample(const Image& image, int factor)
{
    if (factor <= 0 || image.width() % factor != 0 || image.height() % factor != 0) {
        throw std::invalid_argument("area_downsample: factor must divide the image size");
    }
    if (factor == 1) {
        return image;
    }
    Image out(image.width() / factor, image.height() / factor, image.channels());
    const float norm = 1.0f / static_cast<float>(factor * factor);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            for (int c = 0; c < image.channels(); ++c) {
                float acc = 0.0f;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) {
                        acc += image.at(x * factor + dx, y * factor + dy, c);
                    }
                }
                out.at(x, y, c) = acc * norm;
            }
        }
    }
    return out;
}

Image load_png(const std::filesystem::path& path)
{
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty()) {
        throw std::runtime_error("cannot read image: " + path.string());
    }
    if (mat.depth() != CV_8U) {
        throw std::runtime_error("only 8-bit images are supported: " + path.string());
    }
    const int channels = mat.channels();
    Image image(mat.cols, mat.rows, channels);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < mat.cols; ++x) {
            for (int c = 0; c < channels; ++c) {
                // OpenCV stores BGR(A); we keep RGB(A).
                int src = c;
                if (channels >= 3 && c < 3) {
                    src = 2 - c;
                }
                image.at(x, y, c) = row[x * channels + src] / 255.0f;
            }
        }
    }
    return image;
}

void save_png(const Image& image, const std::filesystem::path& path)
{
    const int channels = image.channels();
    if (channels != 1 && channels != 3 && channels != 4) {
        throw std::invalid_argument("save_png: unsupported channel count " + std::to_string(channels));
    }
    cv::Mat mat(image.height(), image.width(), CV_8UC(channels));
    for (int y = 0; y < image.height(); ++y) {
        auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < channels; ++c) {
                int dst = c;
                if (channels >= 3 && c < 3) {
                    dst = 2 - c;
                }
                const float v = std::clamp(image.at(x, y, c), 0.0f, 1.0f);
                row[x * channels + dst] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
            }
        }
    }
    if (!cv::imwrite(path.string(), mat)) {
        throw std::runtime_error("cannot write image: " + path.string());
    }
}

LabelMap load_label_png(const std::filesystem::path& path)
{
    cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty()) {
        throw std::runtime_error("cannot read label map: " + path.string());
    }
    if (mat.type() != CV_8UC1) {
        throw std::runtime_error("label map must be single-channel 8-bit: " + path.string());
    }
    LabelMap labels(mat.cols, mat.rows);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < mat.cols; ++x) {
            labels.at(x, y) = row[x];
        }
    }
    return labels;
}

void save_label_png(const LabelMap& labels, const std::filesystem::path& path)
{
    cv::Mat mat(labels.height(), labels.width(), CV_8UC1);
    for (int y = 0; y < labels.height(); ++y) {
        auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < labels.width(); ++x) {
            row[x] = labels.at(x, y);
        }
    }
    if (!cv::imwrite(path.string(), mat)) {
        throw std::runtime_error("cannot write label map: " + path.string());
    }
}

} // namespace ranet
