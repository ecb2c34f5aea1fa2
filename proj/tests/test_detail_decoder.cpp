// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vxray/detail_decoder.hpp"
#include "vxray/grad_check.hpp"
#include "vxray/ops.hpp"

using namespace vxray;
using vxray::testing::random_tensor;

namespace {

DecoderConfig small_config(int scale = 2) {
    DecoderConfig cfg;
    cfg.n_blocks = 2;
    cfg.channels = 4;
    cfg.scale = scale;
    return cfg;
}

void randomize_modulators(DetailDecoder<double>& dec, Rng& rng) {
    for (auto& [name, p] : dec.modulator_parameters())
        for (auto& v : p->data()) v += rng.uniform(-0.5, 0.5);
}

}  // namespace

TEST(Decoder, OutputShape) {
    Rng rng(1);
    DecoderConfig cfg;
    cfg.n_blocks = 1;
    cfg.channels = 8;
    const auto dec = DetailDecoder<float>::create(cfg, rng);
    const auto out = decode(dec, random_tensor<float>(rng, {6, 16, 16}), Tensor<float>({16, 16}, 0.5f));
    EXPECT_EQ(out.shape(), (Shape{3, 64, 64}));
    for (float v : out.data()) {
        EXPECT_GT(v, 0.f);
        EXPECT_LT(v, 1.f);
    }
}

TEST(Decoder, IdentityModulatorsIgnoreDepth) {
    Rng rng(2);
    const auto dec = DetailDecoder<double>::create(small_config(), rng);
    const auto f = random_tensor(rng, {6, 8, 8});
    const auto a = decode(dec, f, random_tensor(rng, {8, 8}, 0, 1));
    const auto b = decode(dec, f, random_tensor(rng, {8, 8}, 0, 1));
    for (int64_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], b[i]);
    const auto c = decode(dec, f, random_tensor(rng, {8, 8}, 0, 1), false);
    for (int64_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], c[i]);
}

TEST(Decoder, ModulatorsMatterOnceTrained) {
    Rng rng(3);
    auto dec = DetailDecoder<double>::create(small_config(), rng);
    randomize_modulators(dec, rng);
    const auto f = random_tensor(rng, {6, 8, 8});
    const auto a = decode(dec, f, random_tensor(rng, {8, 8}, 0, 1));
    const auto b = decode(dec, f, random_tensor(rng, {8, 8}, 0, 1));
    double diff = 0;
    for (int64_t i = 0; i < a.numel(); ++i) diff += std::abs(a[i] - b[i]);
    EXPECT_GT(diff, 0.0);
}

TEST(Decoder, ConstantInputGivesConstantInterior) {
    Rng rng(4);
    auto dec = DetailDecoder<double>::create(small_config(), rng);
    randomize_modulators(dec, rng);
    Tensor<double> f({6, 24, 24});
    for (int c = 0; c < 6; ++c)
        for (int i = 0; i < 24 * 24; ++i) f.data()[c * 576 + i] = 0.1 * (c - 2);
    const auto out = decode(dec, f, Tensor<double>({24, 24}, 0.3));
    // Receptive-field radius: (1 + 2 * blocks) low-res taps, doubled, plus
    // the upsample tap and two full-res convs.
    const int margin = 2 * (1 + 2 * 2) + 1 + 2 + 1;
    for (int c = 0; c < 3; ++c) {
        const double ref = out[(c * 48 + margin) * 48 + margin];
        for (int y = margin; y < 48 - margin; ++y)
            for (int x = margin; x < 48 - margin; ++x)
                EXPECT_NEAR(out[(c * 48 + y) * 48 + x], ref, 1e-12);
    }
}

TEST(Decoder, GammaTwoDoublesActivation) {
    Rng rng(5);
    const int64_t c = 4;
    const auto x = random_tensor(rng, {c, 5, 5});
    Tensor<double> w({2 * c, 1, 1, 1});
    Tensor<double> b({2 * c});
    for (int64_t i = 0; i < c; ++i) b.data()[i] = 2.0;
    const auto y = modulate(x, random_tensor(rng, {5, 5}, 0, 1), w, b);
    for (int64_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], 2.0 * x[i]);
}

TEST(Decoder, NormalizeDepth) {
    const Tensor<double> m({5}, std::vector<double>{1.0, 3.0, 2.0, 0.0, 9.0});
    const auto n = normalize_depth(m, 1.0, 3.0);
    EXPECT_EQ(n[0], 0.0);
    EXPECT_EQ(n[1], 1.0);
    EXPECT_EQ(n[2], 0.5);
    EXPECT_EQ(n[3], 0.0);
    EXPECT_EQ(n[4], 1.0);
    EXPECT_THROW(normalize_depth(m, 2.0, 2.0), std::invalid_argument);
}

TEST(Decoder, GradCheckEightByEightWithL1) {
    Rng rng(6);
    auto dec0 = DetailDecoder<double>::create(small_config(), rng);
    randomize_modulators(dec0, rng);
    const auto target = random_tensor(rng, {3, 16, 16}, 0, 1);
    std::vector<Tensor<double>> inputs{random_tensor(rng, {6, 8, 8}),
                                       random_tensor(rng, {8, 8}, 0.1, 0.9)};
    for (auto& [name, p] : dec0.named_parameters()) inputs.push_back(*p);
    auto f = [&](const std::vector<Tensor<double>>& in) {
        DetailDecoder<double> dec = dec0;
        auto params = dec.named_parameters();
        for (size_t i = 0; i < params.size(); ++i) *params[i].second = in[i + 2];
        return mean(abs(sub(decode(dec, in[0], in[1]), target)));
    };
    GradCheckOptions opt;
    opt.max_coords_per_input = 40;
    EXPECT_LT(grad_check(f, inputs, opt), 1e-4);
}

TEST(Decoder, PurelyFunctional) {
    Rng rng(7);
    const auto dec = DetailDecoder<float>::create(small_config(4), rng);
    const auto f = random_tensor<float>(rng, {6, 6, 6});
    const auto m = random_tensor<float>(rng, {6, 6}, 0, 1);
    const auto a = decode(dec, f, m);
    const auto b = decode(dec, f, m);
    for (int64_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Decoder, Errors) {
    Rng rng(8);
    auto cfg = small_config(3);
    EXPECT_THROW(DetailDecoder<float>::create(cfg, rng), std::invalid_argument);
    cfg = small_config();
    cfg.n_blocks = 0;
    EXPECT_THROW(DetailDecoder<float>::create(cfg, rng), std::invalid_argument);
    const auto dec = DetailDecoder<float>::create(small_config(), rng);
    EXPECT_THROW(decode(dec, Tensor<float>({6, 8, 8}), Tensor<float>({8, 7})), TensorError);
    EXPECT_THROW(decode(dec, Tensor<float>({5, 8, 8}), Tensor<float>({8, 8})), TensorError);
}

TEST(Decoder, ParameterNamesAndModulatorInit) {
    Rng rng(9);
    auto dec = DetailDecoder<float>::create(small_config(), rng);
    const auto mods = dec.modulator_parameters();
    ASSERT_EQ(mods.size(), 4u);
    EXPECT_EQ(mods[0].first, "modulators.0.w");
    for (float v : mods[0].second->data()) EXPECT_EQ(v, 0.f);
    const auto& bias = *mods[1].second;
    for (int i = 0; i < 4; ++i) EXPECT_EQ(bias[i], 1.f);
    for (int i = 4; i < 8; ++i) EXPECT_EQ(bias[i], 0.f);
    EXPECT_EQ(dec.decoder_parameters().front().first, "decoder.in.w");
}
