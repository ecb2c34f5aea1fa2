// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "vxray/detail_decoder.hpp"
#include "vxray/field_encoder.hpp"
#include "vxray/image.hpp"
#include "vxray/scene_io.hpp"
#include "vxray/trainer.hpp"

namespace vxray {

inline constexpr double kPsnrCap = 99.0;

struct RenderOptions {
    int chunk = 4096;     // rays per work item
    int threads = 0;      // 0: hardware concurrency
    bool use_depth = true;
};

struct RenderResult {
    Image image;          // full resolution
    Image rgb_low;        // encoder's low-resolution render
    std::vector<float> depth;  // low-resolution expected depth, row-major
    double seconds = 0.0;
};

/// Renders every low-resolution ray of `camera` in chunks, assembles F_en and
/// M, then decodes once. Deterministic and independent of chunk size and
/// thread count.
RenderResult render_view(const FieldEncoder<float>& encoder, const DetailDecoder<float>& decoder,
                         const Camera& camera, const RenderOptions& options = {});
RenderResult render_view(const Model& model, const Camera& camera, RenderOptions options = {});

/// Tensor [3,H,W] <-> interleaved image.
Image tensor_to_image(const Tensor<float>& t);
Tensor<float> image_to_tensor(const Image& image);

/// -10 log10(MSE) over all channels, capped at 99 dB.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse);

/// Mean SSIM of the luma channels over all valid 11x11 Gaussian windows
/// (sigma 1.5, K1 0.01, K2 0.03, dynamic range 1).
double ssim(const Image& a, const Image& b);

/// Bicubic resampling by an integer factor (a = -0.75, pixel-center aligned,
/// clamped borders); results clamped to [0,1].
Image bicubic_upsample(const Image& image, int factor);

/// Column `column`, rows [y0, y0 + height), of every frame placed side by
/// side: output width = number of frames. height < 0 takes all rows from y0.
Image consistency_strip(const std::vector<Image>& frames, int column, int y0 = 0, int height = -1);

struct ViewMetrics {
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
    double psnr_bicubic = 0.0;  // bicubic upsampling of the low-resolution render
    double psnr_low = 0.0;      // low-resolution render vs downscaled ground truth
};

struct MetricReport {
    std::vector<ViewMetrics> views;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_psnr_bicubic = 0.0;
    double mean_psnr_low = 0.0;

    std::string to_json() const;
};

/// Renders every view and compares it with its ground truth.
MetricReport evaluate(const Model& model, const std::vector<ViewImage>& views, RenderOptions options = {});

}  // namespace vxray
