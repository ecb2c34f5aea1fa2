// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vxray/rng.hpp"
#include "vxray/tensor.hpp"

namespace vxray {

struct DecoderConfig {
    int n_blocks = 5;
    int channels = 64;     // C_k
    int scale = 4;         // s, a power of two
    int feature_dim = 6;   // C' of the encoder features

    void validate() const;
};

inline constexpr double kResidualScale = 0.2;

template <typename T>
struct ResidualBlock {
    Tensor<T> conv1_w, conv1_b, conv2_w, conv2_b;
    Tensor<T> mod_w, mod_b;  // 1x1 conv depth -> [gamma | beta], shapes [2C,1,1,1], [2C]
};

/// Convolutional backbone with per-block depth modulation and a 2x
/// bilinear upsampling head.
template <typename T>
struct DetailDecoder {
    DecoderConfig config;
    Tensor<T> in_w, in_b;
    std::vector<ResidualBlock<T>> blocks;
    std::vector<std::pair<Tensor<T>, Tensor<T>>> up;  // one 3x3 conv per 2x stage
    Tensor<T> out_w, out_b;

    static DetailDecoder create(const DecoderConfig& config, Rng& rng);

    /// Backbone and head tensors ("decoder.*").
    std::vector<std::pair<std::string, Tensor<T>*>> decoder_parameters();
    /// Depth-modulation tensors ("modulators.*").
    std::vector<std::pair<std::string, Tensor<T>*>> modulator_parameters();
    std::vector<std::pair<std::string, Tensor<T>*>> named_parameters();
    std::vector<std::pair<std::string, const Tensor<T>*>> named_parameters() const;
};

template <typename T, typename U>
DetailDecoder<U> cast_decoder(const DetailDecoder<T>& dec);

/// clamp((M - near) / (far - near), 0, 1).
template <typename T>
Tensor<T> normalize_depth(const Tensor<T>& depth, double near, double far);

/// gamma(depth) * x + beta(depth) for x[C,h,w] and normalized depth[h,w].
template <typename T>
Tensor<T> modulate(const Tensor<T>& x, const Tensor<T>& depth, const Tensor<T>& mod_w,
                   const Tensor<T>& mod_b);

/// (F_en[C',h,w], normalized depth[h,w]) -> image[3, s*h, s*w] in (0,1).
/// With use_depth false the modulators are bypassed.
template <typename T>
Tensor<T> decode(const DetailDecoder<T>& dec, const Tensor<T>& features, const Tensor<T>& depth,
                 bool use_depth = true);

extern template struct DetailDecoder<float>;
extern template struct DetailDecoder<double>;

}  // namespace vxray
