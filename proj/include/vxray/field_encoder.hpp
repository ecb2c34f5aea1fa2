// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "vxray/rng.hpp"
#include "vxray/scene_io.hpp"
#include "vxray/tensor.hpp"

namespace vxray {

struct EncoderConfig {
    std::array<int, 3> grid_dims{96, 96, 96};
    Vec3 box_min{-1.0, -1.0, -1.0};
    Vec3 box_max{1.0, 1.0, 1.0};
    int grid_channels = 12;    // color-feature grid channels
    int hidden = 64;
    int feature_dim = 6;       // C'
    int pos_freqs = 4;
    int dir_freqs = 2;
    double density_init = -4.0;  // raw grid value before softplus
    int n_samples = 128;

    int mlp_input_dim() const { return grid_channels + 3 * (1 + 2 * pos_freqs) + 3 * (1 + 2 * dir_freqs); }
};

/// Points along one ray. t has n entries; delta has n - 1 (the last sample
/// closes the final interval and carries no weight).
struct RaySamples {
    Vec3 origin{};
    Vec3 direction{};
    std::vector<double> t;
    std::vector<double> delta;
};

/// Ray through the center of low-resolution pixel (px, py), i.e. full-res
/// coordinates ((px + 0.5) s, (py + 0.5) s). With `jitter`, every sample but
/// the last moves uniformly inside its own interval.
RaySamples sample_ray(const Camera& camera, int px, int py, int scale, int n_samples,
                      Rng* jitter = nullptr);

/// Voxel grids, color MLP and the low-resolution RGB head. Grids are stored
/// channel-last as [X, Y, Z, C].
template <typename T>
struct FieldEncoder {
    EncoderConfig config;
    Tensor<T> density_grid;  // [X,Y,Z,1]
    Tensor<T> color_grid;    // [X,Y,Z,grid_channels]
    Tensor<T> w0, b0, w1, b1, w2, b2;  // MLP; w2/b2 is the reduction layer
    Tensor<T> head_w, head_b;          // [3,C'], [3]

    static FieldEncoder create(const EncoderConfig& config, Rng& rng);

    /// Grid tensors, then MLP, then head; names match checkpoint sections.
    std::vector<std::pair<std::string, Tensor<T>*>> named_parameters();
    std::vector<std::pair<std::string, const Tensor<T>*>> named_parameters() const;
    std::vector<Tensor<T>*> grid_parameters() { return {&density_grid, &color_grid}; }
    std::vector<Tensor<T>*> mlp_parameters() { return {&w0, &b0, &w1, &b1, &w2, &b2}; }
    std::vector<Tensor<T>*> head_parameters() { return {&head_w, &head_b}; }

    /// World points [P,3] to grid index coordinates.
    Tensor<T> to_grid_coords(const Tensor<T>& points) const;
    /// Mask of points inside the bounding box (closed).
    std::vector<int64_t> inside_rows(const Tensor<T>& points) const;
};

template <typename T, typename U>
FieldEncoder<U> cast_encoder(const FieldEncoder<T>& enc);

/// softplus(interp(x, V_d)) per point as [P]; zero outside the box.
template <typename T>
Tensor<T> query_density(const FieldEncoder<T>& enc, const Tensor<T>& points);

/// [x, sin(2^k pi x), cos(2^k pi x)] for k < n_freqs, per row of [P,3]. Sample
/// positions are constants, so no gradient is recorded.
template <typename T>
Tensor<T> positional_encoding(const Tensor<T>& x, int n_freqs);

/// MLP(interp(x, V_c), PE(x), PE(d)) reduced to C' channels, as [P,C'].
template <typename T>
Tensor<T> query_color_features(const FieldEncoder<T>& enc, const Tensor<T>& points,
                               const Tensor<T>& dirs);

/// Pre-sigmoid RGB head: W f + b * opacity, so that for f = sum_i w_i g_i
/// with sum_i w_i = opacity it equals sum_i w_i (W g_i + b).
template <typename T>
Tensor<T> rgb_head_logits(const FieldEncoder<T>& enc, const Tensor<T>& features,
                          const Tensor<T>& opacity);

/// Per-ray encoder outputs for R rays.
template <typename T>
struct RayBatchOutput {
    Tensor<T> features;       // [R,C']
    Tensor<T> depth;          // [R]
    Tensor<T> rgb;            // [R,3], white background
    Tensor<T> transmittance;  // [R]
};

/// All rays must share the sample count.
template <typename T>
RayBatchOutput<T> render_rays(const FieldEncoder<T>& enc, const std::vector<RaySamples>& rays);

/// Channel-first maps over one low-resolution rectangle.
template <typename T>
struct EncoderOutput {
    Tensor<T> feature_map;  // [C',h,w]
    Tensor<T> depth_map;    // [h,w]
    Tensor<T> rgb_low;      // [3,h,w]
};

template <typename T>
EncoderOutput<T> render_patch_lowres(const FieldEncoder<T>& enc, const Camera& camera,
                                     const PatchSpec& patch, int scale, Rng* jitter = nullptr);

/// Low-resolution rectangle [x0, x0+w) x [y0, y0+h) of a camera.
template <typename T>
EncoderOutput<T> render_region_lowres(const FieldEncoder<T>& enc, const Camera& camera, int x0,
                                      int y0, int w, int h, int scale, Rng* jitter = nullptr);

/// [R,C] rows -> [C,h,w] with R = h*w in row-major pixel order.
template <typename T>
Tensor<T> rows_to_map(const Tensor<T>& rows, int64_t h, int64_t w);

extern template struct FieldEncoder<float>;
extern template struct FieldEncoder<double>;

}  // namespace vxray
