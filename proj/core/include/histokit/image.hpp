#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "histokit/error.hpp"
#include "histokit/tensor.hpp"

namespace histokit::img {

// 8-bit RGB raster, row-major triples.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // 3 * width * height

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {
        if (w <= 0 || h <= 0) throw DimensionError("image dimensions must be positive");
    }

    std::uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + static_cast<std::size_t>(c)];
    }
    std::uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + static_cast<std::size_t>(c)];
    }

    bool operator==(const RgbImage&) const = default;
};

// [H,W,3] float tensor in [0,1].
Tensor image_to_tensor(const RgbImage& image);
RgbImage tensor_to_image(const Tensor& t);

// Binary PPM (P6). The test container; always available.
RgbImage read_ppm(const std::string& path);
void write_ppm(const RgbImage& image, const std::string& path);

// PNG via libpng, for convenience alongside PPM.
RgbImage read_png(const std::string& path);
void write_png(const RgbImage& image, const std::string& path);

// Dispatch by file extension (.ppm or .png).
RgbImage load_image(const std::string& path);
void save_image(const RgbImage& image, const std::string& path);

}  // namespace histokit::img
