// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "vxray/tensor.hpp"

// Differentiable primitives. Each op computes its forward value eagerly and,
// when a tape is active on the calling thread and any input requires a
// gradient, records a closure that accumulates input gradients.
namespace vxray {

inline constexpr double kLeakySlope = 0.2;

// Elementwise, identical shapes.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> neg(const Tensor<T>& a);

template <typename T> Tensor<T> exp(const Tensor<T>& a);
template <typename T> Tensor<T> log(const Tensor<T>& a);
template <typename T> Tensor<T> abs(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
/// ln(1 + e^x) evaluated as max(x, 0) + log1p(e^-|x|).
template <typename T> Tensor<T> softplus(const Tensor<T>& a);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& a, T slope = T(kLeakySlope));
/// Gradient passes only where lo <= x <= hi.
template <typename T> Tensor<T> clamp(const Tensor<T>& a, T lo, T hi);

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);

/// [M,K] x [K,N] -> [M,N]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// x[N,in], weight[out,in], bias[out] -> x * weight^T + bias, shape [N,out].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
/// [A,B] -> [B,A]
template <typename T> Tensor<T> transpose2d(const Tensor<T>& a);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, size_t axis);
template <typename T>
Tensor<T> narrow(const Tensor<T>& a, size_t axis, int64_t start, int64_t length);
/// Places the rows of x[K,C] at row indices `rows` of a zero [n_rows,C] tensor.
template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& x, const std::vector<int64_t>& rows, int64_t n_rows);

/// Cross-correlation of input[C_in,H,W] with kernel[C_out,C_in,k,k] plus
/// bias[C_out]; odd k, zero padding k/2. Output is
/// [C_out, (H-1)/stride+1, (W-1)/stride+1].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 int stride = 1);

/// [C,H,W] -> [C,2H,2W], bilinear with half-pixel centers (align_corners=false).
template <typename T> Tensor<T> upsample_bilinear2x(const Tensor<T>& input);

/// Trilinear interpolation of a channel-last grid[X,Y,Z,C] at points[P,3]
/// given in grid index coordinates ([0, N-1] per axis). Points outside the
/// grid evaluate to zero. Gradients flow to the grid values only.
template <typename T>
Tensor<T> trilinear_sample(const Tensor<T>& grid, const Tensor<T>& points);

/// Front-to-back emission-absorption accumulation along rays.
/// sigma[R,N] >= 0, values[R,N,C], delta[R,N] >= 0 (constant).
/// Returns (sum_i T_i alpha_i v_i as [R,C], residual transmittance T_{N+1} as [R]),
/// alpha_i = 1 - exp(-sigma_i delta_i), T_i = prod_{j<i} (1 - alpha_j).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> composite(const Tensor<T>& sigma, const Tensor<T>& values,
                                          const Tensor<T>& delta);

/// Per-sample compositing weights T_i alpha_i for sigma[R,N], delta[R,N]
/// (no gradient; used for diagnostics and tests).
template <typename T>
std::vector<T> composite_weights(std::span<const T> sigma, std::span<const T> delta, int64_t n);

}  // namespace vxray
