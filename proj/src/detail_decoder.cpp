// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/detail_decoder.hpp"

#include <cmath>
#include <stdexcept>

#include "vxray/ops.hpp"

namespace vxray {

void DecoderConfig::validate() const {
    if (n_blocks < 1) throw std::invalid_argument("decoder needs at least one block");
    if (channels < 1 || feature_dim < 1) throw std::invalid_argument("decoder widths must be positive");
    if (scale < 1 || (scale & (scale - 1)) != 0) {
        throw std::invalid_argument("decoder scale must be a power of two");
    }
}

namespace {

template <typename T>
Tensor<T> conv_init(Rng& rng, int64_t out, int64_t in, int64_t k, double gain) {
    Tensor<T> w({out, in, k, k});
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(in * k * k));
    for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
    return w;
}

int log2_int(int s) {
    int n = 0;
    while ((1 << n) < s) ++n;
    return n;
}

}  // namespace

template <typename T>
DetailDecoder<T> DetailDecoder<T>::create(const DecoderConfig& config, Rng& rng) {
    config.validate();
    const double leaky_gain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
    const int64_t c = config.channels;
    DetailDecoder dec;
    dec.config = config;
    dec.in_w = conv_init<T>(rng, c, config.feature_dim, 3, 1.0);
    dec.in_b = Tensor<T>({c});
    for (int k = 0; k < config.n_blocks; ++k) {
        ResidualBlock<T> b;
        b.conv1_w = conv_init<T>(rng, c, c, 3, leaky_gain);
        b.conv1_b = Tensor<T>({c});
        b.conv2_w = conv_init<T>(rng, c, c, 3, 1.0);
        b.conv2_b = Tensor<T>({c});
        b.mod_w = Tensor<T>({2 * c, 1, 1, 1});
        b.mod_b = Tensor<T>({2 * c});
        for (int64_t i = 0; i < c; ++i) b.mod_b.data()[i] = T(1);
        dec.blocks.push_back(std::move(b));
    }
    for (int j = 0; j < log2_int(config.scale); ++j) {
        dec.up.emplace_back(conv_init<T>(rng, c, c, 3, leaky_gain), Tensor<T>({c}));
    }
    dec.out_w = conv_init<T>(rng, 3, c, 3, 0.1);
    dec.out_b = Tensor<T>({3});
    for (auto& [name, p] : dec.named_parameters()) p->set_requires_grad(true);
    return dec;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> DetailDecoder<T>::decoder_parameters() {
    std::vector<std::pair<std::string, Tensor<T>*>> out{{"decoder.in.w", &in_w},
                                                       {"decoder.in.b", &in_b}};
    for (size_t k = 0; k < blocks.size(); ++k) {
        const std::string p = "decoder.block" + std::to_string(k) + ".";
        out.emplace_back(p + "conv1.w", &blocks[k].conv1_w);
        out.emplace_back(p + "conv1.b", &blocks[k].conv1_b);
        out.emplace_back(p + "conv2.w", &blocks[k].conv2_w);
        out.emplace_back(p + "conv2.b", &blocks[k].conv2_b);
    }
    for (size_t j = 0; j < up.size(); ++j) {
        const std::string p = "decoder.up" + std::to_string(j) + ".";
        out.emplace_back(p + "w", &up[j].first);
        out.emplace_back(p + "b", &up[j].second);
    }
    out.emplace_back("decoder.out.w", &out_w);
    out.emplace_back("decoder.out.b", &out_b);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> DetailDecoder<T>::modulator_parameters() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (size_t k = 0; k < blocks.size(); ++k) {
        const std::string p = "modulators." + std::to_string(k) + ".";
        out.emplace_back(p + "w", &blocks[k].mod_w);
        out.emplace_back(p + "b", &blocks[k].mod_b);
    }
    return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> DetailDecoder<T>::named_parameters() {
    auto out = decoder_parameters();
    for (auto& p : modulator_parameters()) out.push_back(p);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> DetailDecoder<T>::named_parameters() const {
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    for (auto& [name, p] : const_cast<DetailDecoder*>(this)->named_parameters()) out.emplace_back(name, p);
    return out;
}

template <typename T, typename U>
DetailDecoder<U> cast_decoder(const DetailDecoder<T>& dec) {
    Rng dummy(0);
    DetailDecoder<U> out = DetailDecoder<U>::create(dec.config, dummy);
    const auto from = dec.named_parameters();
    auto to = out.named_parameters();
    for (size_t i = 0; i < from.size(); ++i) {
        Tensor<U> u(from[i].second->shape());
        std::copy(from[i].second->data().begin(), from[i].second->data().end(), u.data().begin());
        u.set_requires_grad(from[i].second->requires_grad());
        *to[i].second = u;
    }
    return out;
}

template <typename T>
Tensor<T> normalize_depth(const Tensor<T>& depth, double near, double far) {
    if (!(far > near)) throw std::invalid_argument("normalize_depth needs far > near");
    const Tensor<T> shifted = add_scalar(depth, static_cast<T>(-near));
    return clamp(mul_scalar(shifted, static_cast<T>(1.0 / (far - near))), T(0), T(1));
}

template <typename T>
Tensor<T> modulate(const Tensor<T>& x, const Tensor<T>& depth, const Tensor<T>& mod_w,
                   const Tensor<T>& mod_b) {
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (depth.rank() != 2 || depth.dim(0) != h || depth.dim(1) != w) {
        throw TensorError("depth map " + shape_str(depth.shape()) + " does not match features " +
                          shape_str(x.shape()));
    }
    const Tensor<T> gb = conv2d(reshape(depth, {1, h, w}), mod_w, mod_b);
    return add(mul(narrow(gb, 0, 0, c), x), narrow(gb, 0, c, c));
}

template <typename T>
Tensor<T> decode(const DetailDecoder<T>& dec, const Tensor<T>& features, const Tensor<T>& depth,
                 bool use_depth) {
    if (features.rank() != 3 || features.dim(0) != dec.config.feature_dim) {
        throw TensorError("decoder expects features [" + std::to_string(dec.config.feature_dim) +
                          ",h,w], got " + shape_str(features.shape()));
    }
    if (depth.rank() != 2 || depth.dim(0) != features.dim(1) || depth.dim(1) != features.dim(2)) {
        throw TensorError("depth map " + shape_str(depth.shape()) +
                          " does not match feature map " + shape_str(features.shape()));
    }
    Tensor<T> x = conv2d(features, dec.in_w, dec.in_b);
    for (const auto& b : dec.blocks) {
        const Tensor<T> body = conv2d(leaky_relu(conv2d(x, b.conv1_w, b.conv1_b)), b.conv2_w, b.conv2_b);
        x = add(x, mul_scalar(body, static_cast<T>(kResidualScale)));
        if (use_depth) x = modulate(x, depth, b.mod_w, b.mod_b);
    }
    for (const auto& [w, bias] : dec.up) x = leaky_relu(conv2d(upsample_bilinear2x(x), w, bias));
    return sigmoid(conv2d(x, dec.out_w, dec.out_b));
}

#define VXRAY_INSTANTIATE(T)                                                                    \
    template struct DetailDecoder<T>;                                                           \
    template Tensor<T> normalize_depth(const Tensor<T>&, double, double);                       \
    template Tensor<T> modulate(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                const Tensor<T>&);                                              \
    template Tensor<T> decode(const DetailDecoder<T>&, const Tensor<T>&, const Tensor<T>&, bool);

VXRAY_INSTANTIATE(float)
VXRAY_INSTANTIATE(double)
#undef VXRAY_INSTANTIATE

template DetailDecoder<double> cast_decoder<float, double>(const DetailDecoder<float>&);
template DetailDecoder<float> cast_decoder<double, float>(const DetailDecoder<double>&);

}  // namespace vxray
