// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/losses.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "vxray/container.hpp"
#include "vxray/ops.hpp"

namespace vxray {

void LossWeights::validate() const {
    for (double w : {l1, adversarial, perceptual, mse_low}) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument("loss weights must be finite and non-negative");
        }
    }
}

namespace {

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw TensorError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    }
}

}  // namespace

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& gt) {
    require_same(pred, gt, "l1_loss");
    return mean(abs(sub(pred, gt)));
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& gt) {
    require_same(pred, gt, "mse_loss");
    return mean(square(sub(pred, gt)));
}

template <typename T>
Discriminator<T> Discriminator<T>::create(int patch_size, Rng& rng) {
    if (patch_size < 16) throw std::invalid_argument("discriminator needs patches of at least 16 pixels");
    Discriminator d;
    d.patch_size = patch_size;
    const std::array<int64_t, 6> widths{3, 32, 64, 128, 256, 1};
    const double leaky_gain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
    for (size_t i = 0; i + 1 < widths.size(); ++i) {
        const int64_t k = i + 2 < widths.size() ? 3 : 1;
        Tensor<T> w({widths[i + 1], widths[i], k, k});
        const double gain = k == 3 ? leaky_gain : 1.0;
        const double bound = gain * std::sqrt(3.0 / static_cast<double>(widths[i] * k * k));
        for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
        d.layers.emplace_back(std::move(w), Tensor<T>({widths[i + 1]}));
    }
    for (auto& [name, p] : d.named_parameters()) p->set_requires_grad(true);
    return d;
}

template <typename T>
Tensor<T> Discriminator<T>::forward(const Tensor<T>& patch) const {
    if (patch.rank() != 3 || patch.dim(0) != 3 || patch.dim(1) != patch_size || patch.dim(2) != patch_size) {
        throw TensorError("discriminator expects [3," + std::to_string(patch_size) + "," +
                          std::to_string(patch_size) + "], got " + shape_str(patch.shape()));
    }
    Tensor<T> x = patch;
    for (size_t i = 0; i + 1 < layers.size(); ++i) {
        x = leaky_relu(conv2d(x, layers[i].first, layers[i].second, 2));
    }
    return conv2d(x, layers.back().first, layers.back().second);
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Discriminator<T>::named_parameters() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (size_t i = 0; i < layers.size(); ++i) {
        const std::string p = "discriminator." + std::to_string(i) + ".";
        out.emplace_back(p + "w", &layers[i].first);
        out.emplace_back(p + "b", &layers[i].second);
    }
    return out;
}

template <typename T>
Tensor<T> discriminator_loss(const Discriminator<T>& d, const Tensor<T>& real, const Tensor<T>& fake) {
    return add(mean(softplus(neg(d.forward(real)))), mean(softplus(d.forward(fake.detach()))));
}

template <typename T>
Tensor<T> generator_loss(const Discriminator<T>& d, const Tensor<T>& fake) {
    return mean(softplus(neg(d.forward(fake))));
}

template <typename T>
AdversarialLosses<T> adversarial_losses(const Discriminator<T>& d, const Tensor<T>& real,
                                        const Tensor<T>& fake) {
    return {discriminator_loss(d, real, fake), generator_loss(d, fake)};
}

template <typename T>
std::vector<double> FilterBankExtractor<T>::base_filters() {
    std::vector<double> f(8 * 25, 0.0);
    auto put3 = [&](int idx, const std::array<double, 9>& k) {
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) f[idx * 25 + (y + 1) * 5 + (x + 1)] = k[y * 3 + x];
    };
    put3(0, {-1, 0, 1, -2, 0, 2, -1, 0, 1});
    put3(1, {-1, -2, -1, 0, 0, 0, 1, 2, 1});
    put3(2, {0, 1, 2, -1, 0, 1, -2, -1, 0});
    put3(3, {-2, -1, 0, -1, 0, 1, 0, 1, 2});
    const std::array<double, 5> smooth{1, 4, 6, 4, 1}, diff{-1, -2, 0, 2, 1};
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            f[4 * 25 + y * 5 + x] = smooth[y] * diff[x];
            f[5 * 25 + y * 5 + x] = diff[y] * smooth[x];
        }
    auto dog = [&](int idx, double s1, double s2) {
        double total = 0.0;
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 5; ++x) {
                const double r2 = (x - 2) * (x - 2) + (y - 2) * (y - 2);
                const double g1 = std::exp(-0.5 * r2 / (s1 * s1)) / (s1 * s1);
                const double g2 = std::exp(-0.5 * r2 / (s2 * s2)) / (s2 * s2);
                f[idx * 25 + y * 5 + x] = g1 - g2;
                total += g1 - g2;
            }
        for (int i = 0; i < 25; ++i) f[idx * 25 + i] -= total / 25.0;  // exact zero response to constants
    };
    dog(6, 0.7, 1.4);
    dog(7, 1.0, 2.0);
    for (int idx = 0; idx < 8; ++idx) {
        double l1 = 0.0;
        for (int i = 0; i < 25; ++i) l1 += std::abs(f[idx * 25 + i]);
        for (int i = 0; i < 25; ++i) f[idx * 25 + i] /= l1;
    }
    return f;
}

template <typename T>
FilterBankExtractor<T>::FilterBankExtractor()
    : bank_({24, 3, 5, 5}), bank_bias_({24}), blur_({3, 3, 3, 3}), blur_bias_({3}) {
    const auto base = base_filters();
    auto bank = bank_.data();
    for (int c = 0; c < 3; ++c)
        for (int f = 0; f < 8; ++f)
            for (int i = 0; i < 25; ++i) bank[((c * 8 + f) * 3 + c) * 25 + i] = static_cast<T>(base[f * 25 + i]);
    const std::array<double, 3> tap{0.25, 0.5, 0.25};
    auto blur = blur_.data();
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) blur[((c * 3 + c) * 3 + y) * 3 + x] = static_cast<T>(tap[y] * tap[x]);
}

template <typename T>
std::vector<Tensor<T>> FilterBankExtractor<T>::features(const Tensor<T>& image) const {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw TensorError("feature extractor expects [3,H,W], got " + shape_str(image.shape()));
    }
    return {conv2d(image, bank_, bank_bias_), conv2d(conv2d(image, blur_, blur_bias_, 2), bank_, bank_bias_)};
}

template <typename T>
ConvStackExtractor<T>::ConvStackExtractor(const Container& weights) {
    for (int i = 0;; ++i) {
        const std::string p = "features." + std::to_string(i) + ".";
        if (!weights.has(p + "w")) break;
        const Tensor<float> w = weights.tensor(p + "w");
        const Tensor<float> b = weights.tensor(p + "b");
        if (w.rank() != 4 || w.dim(2) != 3 || w.dim(3) != 3 || b.shape() != Shape{w.dim(0)}) {
            throw CheckpointError("feature layer " + std::to_string(i) + " must be [O,I,3,3] with bias [O]");
        }
        if (layers_.empty() ? w.dim(1) != 3 : w.dim(1) != layers_.back().first.dim(0)) {
            throw CheckpointError("feature layer " + std::to_string(i) + " has mismatched input channels");
        }
        Tensor<T> wt(w.shape()), bt(b.shape());
        std::copy(w.data().begin(), w.data().end(), wt.data().begin());
        std::copy(b.data().begin(), b.data().end(), bt.data().begin());
        layers_.emplace_back(std::move(wt), std::move(bt));
    }
    if (layers_.empty()) throw CheckpointError("feature weights file has no features.0.w section");
}

template <typename T>
ConvStackExtractor<T> ConvStackExtractor<T>::load(const std::filesystem::path& path) {
    return ConvStackExtractor(Container::load(path));
}

template <typename T>
std::vector<Tensor<T>> ConvStackExtractor<T>::features(const Tensor<T>& image) const {
    std::vector<Tensor<T>> out;
    Tensor<T> x = image;
    for (const auto& [w, b] : layers_) {
        x = leaky_relu(conv2d(x, w, b));
        out.push_back(x);
    }
    return out;
}

template <typename T>
Tensor<T> perceptual_loss(const FeatureExtractor<T>& phi, const Tensor<T>& pred, const Tensor<T>& gt) {
    require_same(pred, gt, "perceptual_loss");
    std::vector<Tensor<T>> target;
    {
        NoGradScope<T> no_grad;
        target = phi.features(gt.detach());
    }
    const auto feats = phi.features(pred);
    Tensor<T> total;
    for (size_t l = 0; l < feats.size(); ++l) {
        const Tensor<T> term = mean(square(sub(feats[l], target[l])));
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

template <typename T>
Tensor<T> total_loss(const LossWeights& weights, const LossComponents<T>& c) {
    weights.validate();
    Tensor<T> total;
    auto accumulate = [&](double w, const Tensor<T>& term, const char* name) {
        if (w == 0.0) return;
        if (!term.defined()) throw std::invalid_argument(std::string("loss term '") + name + "' has weight but no value");
        const Tensor<T> scaled = mul_scalar(term, static_cast<T>(w));
        total = total.defined() ? add(total, scaled) : scaled;
    };
    accumulate(weights.l1, c.l1, "l1");
    accumulate(weights.adversarial, c.adversarial, "adversarial");
    accumulate(weights.perceptual, c.perceptual, "perceptual");
    accumulate(weights.mse_low, c.mse_low, "mse_low");
    return total.defined() ? total : Tensor<T>::scalar(T(0));
}

#define VXRAY_INSTANTIATE(T)                                                                      \
    template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);                               \
    template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                              \
    template struct Discriminator<T>;                                                             \
    template AdversarialLosses<T> adversarial_losses(const Discriminator<T>&, const Tensor<T>&,   \
                                                     const Tensor<T>&);                           \
    template Tensor<T> discriminator_loss(const Discriminator<T>&, const Tensor<T>&,              \
                                          const Tensor<T>&);                                      \
    template Tensor<T> generator_loss(const Discriminator<T>&, const Tensor<T>&);                 \
    template class FilterBankExtractor<T>;                                                        \
    template class ConvStackExtractor<T>;                                                         \
    template Tensor<T> perceptual_loss(const FeatureExtractor<T>&, const Tensor<T>&,              \
                                       const Tensor<T>&);                                         \
    template Tensor<T> total_loss(const LossWeights&, const LossComponents<T>&);

VXRAY_INSTANTIATE(float)
VXRAY_INSTANTIATE(double)
#undef VXRAY_INSTANTIATE

}  // namespace vxray
