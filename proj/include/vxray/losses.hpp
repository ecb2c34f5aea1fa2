// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vxray/rng.hpp"
#include "vxray/tensor.hpp"

namespace vxray {

class Container;

struct LossWeights {
    double l1 = 1.0;           // lambda_h
    double adversarial = 0.02;  // lambda_a
    double perceptual = 0.5;    // lambda_p
    double mse_low = 1.0;       // lambda_l

    /// Throws std::invalid_argument on a negative or non-finite weight.
    void validate() const;
};

/// Mean absolute error over every value.
template <typename T> Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& gt);
/// Mean squared error over every value.
template <typename T> Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& gt);

/// Patch discriminator: four stride-2 3x3 convs (3->32->64->128->256) with
/// leaky ReLU, then a 1x1 conv to a single-channel logit map.
template <typename T>
struct Discriminator {
    int patch_size = 0;
    std::vector<std::pair<Tensor<T>, Tensor<T>>> layers;

    static Discriminator create(int patch_size, Rng& rng);
    Tensor<T> forward(const Tensor<T>& patch) const;
    std::vector<std::pair<std::string, Tensor<T>*>> named_parameters();
};

template <typename T>
struct AdversarialLosses {
    Tensor<T> loss_d;  // BCE(D(real), 1) + BCE(D(fake.detach()), 0)
    Tensor<T> loss_g;  // BCE(D(fake), 1)
};

/// Non-saturating GAN losses on logits, averaged over the logit map.
template <typename T>
AdversarialLosses<T> adversarial_losses(const Discriminator<T>& d, const Tensor<T>& real,
                                        const Tensor<T>& fake);
template <typename T>
Tensor<T> discriminator_loss(const Discriminator<T>& d, const Tensor<T>& real, const Tensor<T>& fake);
template <typename T>
Tensor<T> generator_loss(const Discriminator<T>& d, const Tensor<T>& fake);

/// Fixed mapping from an RGB patch [3,H,W] to a list of feature maps.
template <typename T>
class FeatureExtractor {
  public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<Tensor<T>> features(const Tensor<T>& image) const = 0;
};

/// Two-level pyramid of eight 5x5 filters (four 3x3 Sobel/diagonal, two 5x5
/// Sobel, two difference-of-Gaussians) applied to each color channel.
template <typename T>
class FilterBankExtractor : public FeatureExtractor<T> {
  public:
    FilterBankExtractor();
    std::vector<Tensor<T>> features(const Tensor<T>& image) const override;
    /// The eight single-channel 5x5 filters, [8,5,5] row-major.
    static std::vector<double> base_filters();

  private:
    Tensor<T> bank_, bank_bias_, blur_, blur_bias_;
};

/// Stack of 3x3 stride-1 convs with leaky ReLU read from a container file with
/// sections features.<i>.w [O,I,3,3] and features.<i>.b [O]; every layer's
/// output is one feature level.
template <typename T>
class ConvStackExtractor : public FeatureExtractor<T> {
  public:
    explicit ConvStackExtractor(const Container& weights);
    static ConvStackExtractor load(const std::filesystem::path& path);
    std::vector<Tensor<T>> features(const Tensor<T>& image) const override;

  private:
    std::vector<std::pair<Tensor<T>, Tensor<T>>> layers_;
};

/// Sum over feature levels of the mean squared feature difference; the
/// ground-truth branch carries no gradient.
template <typename T>
Tensor<T> perceptual_loss(const FeatureExtractor<T>& phi, const Tensor<T>& pred, const Tensor<T>& gt);

/// Individual loss values; a term may be left undefined when its weight is zero.
template <typename T>
struct LossComponents {
    Tensor<T> l1, adversarial, perceptual, mse_low;
};

/// Weighted sum of the components with nonzero weight.
template <typename T>
Tensor<T> total_loss(const LossWeights& weights, const LossComponents<T>& components);

}  // namespace vxray
