// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace vxray {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw ImageError(msg); }
void png_warn(png_structp, png_const_charp) {}

}  // namespace

Image read_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw ImageError("cannot open " + path.string());
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw ImageError("not a PNG file: " + path.string());
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageError("libpng initialisation failed");
    }
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_read_struct(p, i, nullptr); }
    } guard{&png, &info};

    Image image;
    try {
        png_init_io(png, file.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);
        const int bit_depth = png_get_bit_depth(png, info);
        const int color = png_get_color_type(png, info);
        if (bit_depth != 8 || (color != PNG_COLOR_TYPE_RGB && color != PNG_COLOR_TYPE_RGBA)) {
            throw ImageError("unsupported PNG format (need 8-bit RGB/RGBA): " + path.string());
        }
        const int w = static_cast<int>(png_get_image_width(png, info));
        const int h = static_cast<int>(png_get_image_height(png, info));
        const int channels = color == PNG_COLOR_TYPE_RGBA ? 4 : 3;
        png_read_update_info(png, info);
        std::vector<unsigned char> raw(static_cast<size_t>(w) * h * channels);
        std::vector<png_bytep> rows(h);
        for (int y = 0; y < h; ++y) rows[y] = raw.data() + static_cast<size_t>(y) * w * channels;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);

        image = Image(w, h);
        for (size_t p = 0; p < static_cast<size_t>(w) * h; ++p) {
            const unsigned char* src = raw.data() + p * channels;
            const float a = channels == 4 ? src[3] / 255.f : 1.f;
            for (int c = 0; c < 3; ++c) image.pixels[p * 3 + c] = src[c] / 255.f * a + (1.f - a);
        }
    } catch (const ImageError& e) {
        throw ImageError(path.string() + ": " + e.what());
    }
    return image;
}

unsigned char quantize_u8(float v) {
    const float scaled = std::clamp(v, 0.f, 1.f) * 255.f;
    return static_cast<unsigned char>(std::nearbyint(scaled));  // default mode: half to even
}

void write_png(const std::filesystem::path& path, const Image& image) {
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw ImageError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageError("libpng initialisation failed");
    }
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_write_struct(p, i); }
    } guard{&png, &info};

    std::vector<unsigned char> raw(image.pixels.size());
    std::transform(image.pixels.begin(), image.pixels.end(), raw.begin(), quantize_u8);
    std::vector<png_bytep> rows(image.height);
    for (int y = 0; y < image.height; ++y)
        rows[y] = raw.data() + static_cast<size_t>(y) * image.width * 3;

    png_init_io(png, file.get());
    png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
}

Image box_downscale(const Image& image, int s) {
    if (s < 1 || image.width % s != 0 || image.height % s != 0) {
        throw ImageError("image " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) + " is not divisible by factor " +
                         std::to_string(s));
    }
    Image out(image.width / s, image.height / s);
    const float norm = 1.f / static_cast<float>(s * s);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < 3; ++c) {
                float acc = 0.f;
                for (int dy = 0; dy < s; ++dy)
                    for (int dx = 0; dx < s; ++dx) acc += image.at(x * s + dx, y * s + dy, c);
                out.at(x, y, c) = acc * norm;
            }
    return out;
}

}  // namespace vxray
