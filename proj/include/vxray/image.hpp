// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

namespace vxray {

/// Interleaved RGB float image, row-major, values nominally in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;  // height * width * 3

    Image() = default;
    Image(int w, int h, float fill = 0.f)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, fill) {}

    float& at(int x, int y, int c) { return pixels[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
};

class ImageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Reads an 8-bit RGB or RGBA PNG; alpha is composited over white.
Image read_png(const std::filesystem::path& path);

/// Writes 8-bit RGB; values are clamped to [0,1] and rounded half to even.
void write_png(const std::filesystem::path& path, const Image& image);

/// 8-bit quantization used by write_png.
unsigned char quantize_u8(float v);

/// s x s box average; width and height must be divisible by s.
Image box_downscale(const Image& image, int s);

}  // namespace vxray
