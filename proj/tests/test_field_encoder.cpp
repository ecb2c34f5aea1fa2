// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "vxray/field_encoder.hpp"
#include "vxray/grad_check.hpp"
#include "vxray/ops.hpp"

using namespace vxray;
using vxray::testing::random_tensor;

namespace {

Camera axis_camera(double near, double far) {
    Camera cam;
    cam.width = cam.height = 16;
    cam.focal = 20.0;
    cam.pose = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 3, 0, 0, 0, 1};
    cam.near = near;
    cam.far = far;
    return cam;
}

EncoderConfig small_config() {
    EncoderConfig cfg;
    cfg.grid_dims = {5, 4, 6};
    cfg.grid_channels = 3;
    cfg.hidden = 8;
    cfg.n_samples = 8;
    return cfg;
}

FieldEncoder<double> random_encoder(Rng& rng, const EncoderConfig& cfg) {
    auto enc = FieldEncoder<double>::create(cfg, rng);
    for (auto& v : enc.density_grid.data()) v = rng.uniform(-1.0, 2.0);
    for (auto& v : enc.color_grid.data()) v = rng.uniform(-1.0, 1.0);
    for (auto* p : {&enc.b0, &enc.b1, &enc.b2, &enc.head_b})
        for (auto& v : p->data()) v = rng.uniform(-0.5, 0.5);
    return enc;
}

Tensor<double> points_tensor(const std::vector<Vec3>& pts) {
    Tensor<double> t({static_cast<int64_t>(pts.size()), 3});
    for (size_t i = 0; i < pts.size(); ++i)
        for (int a = 0; a < 3; ++a) t.data()[i * 3 + a] = pts[i][a];
    return t;
}

}  // namespace

TEST(SampleRay, CenterPixelDirection) {
    const auto rs = sample_ray(axis_camera(1.0, 3.0), 0, 0, 16, 4);
    EXPECT_NEAR(rs.direction[0], 0.0, 1e-12);
    EXPECT_NEAR(rs.direction[1], 0.0, 1e-12);
    EXPECT_NEAR(rs.direction[2], -1.0, 1e-12);
}

TEST(SampleRay, UniformSpacing) {
    const auto rs = sample_ray(axis_camera(1.0, 3.0), 0, 0, 1, 3);
    ASSERT_EQ(rs.t.size(), 3u);
    EXPECT_DOUBLE_EQ(rs.t[0], 1.0);
    EXPECT_DOUBLE_EQ(rs.t[1], 2.0);
    EXPECT_DOUBLE_EQ(rs.t[2], 3.0);
    ASSERT_EQ(rs.delta.size(), 2u);
    EXPECT_DOUBLE_EQ(rs.delta[0], 1.0);
    EXPECT_DOUBLE_EQ(rs.delta[1], 1.0);
}

TEST(SampleRay, JitterStaysInIntervalAndIsReproducible) {
    const Camera cam = axis_camera(1.0, 5.0);
    const int n = 17;
    const double step = 4.0 / (n - 1);
    Rng a(5), b(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto ra = sample_ray(cam, trial % 4, trial / 13, 4, n, &a);
        const auto rb = sample_ray(cam, trial % 4, trial / 13, 4, n, &b);
        EXPECT_EQ(ra.t, rb.t);
        for (int i = 0; i < n; ++i) {
            const double lo = 1.0 + step * i;
            EXPECT_GE(ra.t[i], lo);
            if (i + 1 < n) {
                EXPECT_LT(ra.t[i], lo + step);
            }
            if (i > 0) {
                EXPECT_GT(ra.t[i], ra.t[i - 1]);
            }
        }
        for (double d : ra.delta) EXPECT_GT(d, 0.0);
        EXPECT_DOUBLE_EQ(ra.t.back(), 5.0);
    }
}

TEST(SampleRay, RejectsOutOfBounds) {
    EXPECT_THROW(sample_ray(axis_camera(1, 3), 4, 0, 4, 8), std::out_of_range);
    EXPECT_THROW(sample_ray(axis_camera(1, 3), 0, 0, 4, 1), std::invalid_argument);
}

TEST(QueryDensity, ClosedFormsAndOutside) {
    Rng rng(1);
    auto enc = FieldEncoder<double>::create(small_config(), rng);
    for (auto& v : enc.density_grid.data()) v = 0.0;
    const auto pts = points_tensor({{0.1, -0.3, 0.2}, {1.5, 0.0, 0.0}, {0.0, 0.0, -1.01}});
    const auto sigma = query_density(enc, pts);
    EXPECT_NEAR(sigma[0], std::log(2.0), 1e-15);
    EXPECT_EQ(sigma[1], 0.0);
    EXPECT_EQ(sigma[2], 0.0);
    for (auto& v : enc.density_grid.data()) v = -40.0;
    const auto low = query_density(enc, pts);
    EXPECT_GE(low[0], 0.0);
    EXPECT_LT(low[0], 1e-16);
}

TEST(QueryDensity, NonNegativeEverywhere) {
    Rng rng(2);
    auto enc = random_encoder(rng, small_config());
    for (auto& v : enc.density_grid.data()) v = rng.uniform(-30.0, 30.0);
    const auto pts = random_tensor(rng, {500, 3}, -1.5, 1.5);
    for (double s : query_density(enc, pts).data()) EXPECT_GE(s, 0.0);
}

TEST(QueryColorFeatures, ZeroReductionLayerGivesZero) {
    Rng rng(3);
    auto enc = random_encoder(rng, small_config());
    enc.w2 = Tensor<double>(enc.w2.shape());
    enc.b2 = Tensor<double>(enc.b2.shape());
    const auto pts = random_tensor(rng, {20, 3}, -1, 1);
    const auto g = query_color_features(enc, pts, random_tensor(rng, {20, 3}, -1, 1));
    EXPECT_EQ(g.shape(), (Shape{20, 6}));
    for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(QueryColorFeatures, IdenticalInputsIdenticalOutputs) {
    Rng rng(4);
    auto enc = random_encoder(rng, small_config());
    const auto pts = points_tensor({{0.2, 0.1, -0.4}, {0.2, 0.1, -0.4}});
    const auto dirs = points_tensor({{0.0, 0.6, 0.8}, {0.0, 0.6, 0.8}});
    const auto g = query_color_features(enc, pts, dirs);
    for (int c = 0; c < 6; ++c) EXPECT_EQ(g[c], g[6 + c]);
}

TEST(QueryColorFeatures, GradCheckThreePoints) {
    Rng rng(5);
    const auto cfg = small_config();
    const auto enc0 = random_encoder(rng, cfg);
    const auto pts = random_tensor(rng, {3, 3}, -0.9, 0.9);
    auto dirs = random_tensor(rng, {3, 3}, -1, 1);
    for (int r = 0; r < 3; ++r) {
        double n = 0;
        for (int a = 0; a < 3; ++a) n += dirs[r * 3 + a] * dirs[r * 3 + a];
        for (int a = 0; a < 3; ++a) dirs.data()[r * 3 + a] /= std::sqrt(n);
    }
    std::vector<Tensor<double>> inputs;
    for (auto& [name, p] : enc0.named_parameters()) inputs.push_back(*p);
    const auto weights = random_tensor(rng, {3, 6}, -1, 1);
    auto f = [&](const std::vector<Tensor<double>>& in) {
        FieldEncoder<double> enc = enc0;
        auto params = enc.named_parameters();
        for (size_t i = 0; i < params.size(); ++i) *params[i].second = in[i];
        return sum(mul(query_color_features(enc, pts, dirs), weights));
    };
    EXPECT_LT(grad_check(f, inputs), 1e-4);
}

TEST(RenderRays, EmptySceneIsWhite) {
    Rng rng(6);
    auto enc = random_encoder(rng, small_config());
    for (auto& v : enc.density_grid.data()) v = -200.0;
    const Camera cam = axis_camera(1.0, 5.0);
    const auto out = render_region_lowres(enc, cam, 0, 0, 4, 4, 4);
    for (double v : out.rgb_low.data()) EXPECT_NEAR(v, 1.0, 1e-12);
    for (double v : out.depth_map.data()) EXPECT_NEAR(v, 0.0, 1e-12);
    for (double v : out.feature_map.data()) EXPECT_NEAR(v, 0.0, 1e-12);
    EXPECT_EQ(out.feature_map.shape(), (Shape{6, 4, 4}));
    EXPECT_EQ(out.rgb_low.shape(), (Shape{3, 4, 4}));
}

TEST(RenderRays, OpaqueFirstSampleGivesItsDepth) {
    Rng rng(7);
    auto enc = random_encoder(rng, small_config());
    for (auto& v : enc.density_grid.data()) v = 1000.0;
    RaySamples rs;
    rs.origin = {0.0, 0.0, 2.5};
    rs.direction = {0.0, 0.0, -1.0};
    rs.t = {2.0, 3.0, 4.0};
    rs.delta = {1.0, 1.0};
    const auto out = render_rays(enc, {rs});
    EXPECT_EQ(out.depth[0], 2.0);
    EXPECT_EQ(out.transmittance[0], 0.0);
}

TEST(RenderRays, LinearHeadCommutes) {
    Rng rng(8);
    const auto enc = random_encoder(rng, small_config());
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 10;
        const auto g = random_tensor(rng, {n, 6}, -2, 2);
        std::vector<double> sigma(n), delta(n);
        for (int i = 0; i < n; ++i) {
            sigma[i] = rng.uniform(0.0, 3.0);
            delta[i] = rng.uniform(0.05, 0.3);
        }
        const auto w = composite_weights<double>(sigma, delta, n);
        Tensor<double> f({1, 6});
        double opacity = 0.0;
        std::vector<double> expected(3, 0.0);
        const auto per_point = rgb_head_logits(enc, g, Tensor<double>({n}, 1.0));
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < 6; ++c) f.data()[c] += w[i] * g[i * 6 + c];
            for (int k = 0; k < 3; ++k) expected[k] += w[i] * per_point[i * 3 + k];
            opacity += w[i];
        }
        const auto logits = rgb_head_logits(enc, f, Tensor<double>({1}, opacity));
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(logits[k], expected[k], 1e-5);
    }
}

TEST(RenderRays, RgbInUnitRangeAndDepthBounded) {
    Rng rng(9);
    auto enc = random_encoder(rng, small_config());
    for (auto& v : enc.density_grid.data()) v = rng.uniform(-5.0, 8.0);
    const Camera cam = Camera::look_at({2.2, 1.0, 1.3}, {0, 0, 0}, {0, 0, 1}, 32, 32, 30, 1.0, 5.0);
    const auto out = render_region_lowres(enc, cam, 0, 0, 8, 8, 4, &rng);
    for (double v : out.rgb_low.data()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    for (double v : out.depth_map.data()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 5.0);
    }
}

TEST(RenderRays, FullEncoderGradCheckOnTwoByTwoPatch) {
    Rng rng(10);
    const auto cfg = small_config();
    const auto enc0 = random_encoder(rng, cfg);
    const Camera cam = Camera::look_at({2.5, 0.3, 0.8}, {0, 0, 0}, {0, 0, 1}, 8, 8, 9, 1.0, 4.0);
    PatchSpec patch;
    patch.low_side = 2;
    const auto target = random_tensor(rng, {3, 2, 2}, 0, 1);
    std::vector<Tensor<double>> inputs;
    for (auto& [name, p] : enc0.named_parameters()) inputs.push_back(*p);
    auto f = [&](const std::vector<Tensor<double>>& in) {
        FieldEncoder<double> enc = enc0;
        auto params = enc.named_parameters();
        for (size_t i = 0; i < params.size(); ++i) *params[i].second = in[i];
        return mean(square(sub(render_patch_lowres(enc, cam, patch, 4).rgb_low, target)));
    };
    EXPECT_LT(grad_check(f, inputs), 1e-4);
}

TEST(Encoder, CastRoundTripAndNames) {
    Rng rng(11);
    auto enc = FieldEncoder<float>::create(small_config(), rng);
    const auto d = cast_encoder<float, double>(enc);
    const auto back = cast_encoder<double, float>(d);
    const auto a = enc.named_parameters();
    const auto b = back.named_parameters();
    ASSERT_EQ(a.size(), 10u);
    EXPECT_EQ(a.front().first, "density_grid");
    for (size_t i = 0; i < a.size(); ++i)
        for (int64_t k = 0; k < a[i].second->numel(); ++k)
            EXPECT_EQ((*a[i].second)[k], (*b[i].second)[k]);
    auto bad = small_config();
    bad.grid_dims = {1, 4, 4};
    EXPECT_THROW(FieldEncoder<float>::create(bad, rng), std::invalid_argument);
}

TEST(PositionalEncoding, MatchesDirectEvaluation) {
    Rng rng(12);
    const auto x = random_tensor(rng, {50, 3}, -1.2, 1.2);
    const auto pe = positional_encoding(x, 5);
    ASSERT_EQ(pe.shape(), (Shape{50, 33}));
    for (int r = 0; r < 50; ++r)
        for (int a = 0; a < 3; ++a) {
            EXPECT_EQ(pe[r * 33 + a], x[r * 3 + a]);
            for (int k = 0; k < 5; ++k) {
                const double arg = std::ldexp(M_PI, k) * x[r * 3 + a];
                EXPECT_NEAR(pe[r * 33 + 3 + 6 * k + a], std::sin(arg), 1e-12);
                EXPECT_NEAR(pe[r * 33 + 6 + 6 * k + a], std::cos(arg), 1e-12);
            }
        }
}
