// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "vxray/metrics_render.hpp"
#include "vxray/ops.hpp"

using namespace vxray;

namespace {

Image random_image(Rng& rng, int w, int h) {
    Image im(w, h);
    for (auto& v : im.pixels) v = static_cast<float>(rng.uniform());
    return im;
}

// Direct 11x11 window sums, no separability, no shared intermediates.
double ssim_oracle(const Image& a, const Image& b) {
    double g[11][11], total = 0.0;
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) total += g[y][x] = std::exp(-((x - 5) * (x - 5) + (y - 5) * (y - 5)) / 4.5);
    auto lum = [](const Image& im, int x, int y) {
        return 0.299 * im.at(x, y, 0) + 0.587 * im.at(x, y, 1) + 0.114 * im.at(x, y, 2);
    };
    const double c1 = 1e-4, c2 = 9e-4;
    double sum = 0.0;
    int count = 0;
    for (int y0 = 0; y0 + 11 <= a.height; ++y0)
        for (int x0 = 0; x0 + 11 <= a.width; ++x0) {
            double mx = 0, my = 0;
            for (int y = 0; y < 11; ++y)
                for (int x = 0; x < 11; ++x) {
                    mx += g[y][x] / total * lum(a, x0 + x, y0 + y);
                    my += g[y][x] / total * lum(b, x0 + x, y0 + y);
                }
            double vx = 0, vy = 0, cxy = 0;
            for (int y = 0; y < 11; ++y)
                for (int x = 0; x < 11; ++x) {
                    const double dx = lum(a, x0 + x, y0 + y) - mx, dy = lum(b, x0 + x, y0 + y) - my;
                    vx += g[y][x] / total * dx * dx;
                    vy += g[y][x] / total * dy * dy;
                    cxy += g[y][x] / total * dx * dy;
                }
            sum += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return sum / count;
}

struct SmallModel {
    FieldEncoder<float> encoder;
    DetailDecoder<float> decoder;
    Camera camera;
};

SmallModel small_model(double density_init = 1.0) {
    Rng rng(3);
    EncoderConfig ec;
    ec.grid_dims = {8, 8, 8};
    ec.n_samples = 16;
    ec.density_init = density_init;
    SmallModel m;
    m.encoder = FieldEncoder<float>::create(ec, rng);
    for (auto& v : m.encoder.density_grid.data()) v += static_cast<float>(rng.uniform(-2, 2));
    for (auto& v : m.encoder.color_grid.data()) v = static_cast<float>(rng.uniform(-1, 1));
    DecoderConfig dc;
    dc.n_blocks = 1;
    dc.channels = 8;
    dc.scale = 2;
    m.decoder = DetailDecoder<float>::create(dc, rng);
    m.camera = Camera::look_at({2.4, 1.1, 1.2}, {0, 0, 0}, {0, 0, 1}, 24, 20, 22, 1.0, 5.0);
    return m;
}

}  // namespace

TEST(Psnr, ClosedForms) {
    EXPECT_EQ(psnr_from_mse(0.01), 20.0);
    EXPECT_EQ(psnr_from_mse(1.0), 0.0);
    EXPECT_EQ(psnr_from_mse(0.0), kPsnrCap);
    EXPECT_EQ(psnr_from_mse(1e-12), kPsnrCap);
    Image black(8, 8, 0.f), white(8, 8, 1.f), tenth(8, 8, 0.1f);
    EXPECT_EQ(psnr(black, white), 0.0);
    EXPECT_NEAR(psnr(black, tenth), 20.0, 1e-5);
    EXPECT_THROW(psnr(black, Image(8, 7)), std::invalid_argument);
}

TEST(Psnr, IdentityAndSymmetryProperties) {
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        const int w = 4 + static_cast<int>(rng.below(20)), h = 4 + static_cast<int>(rng.below(20));
        const Image a = random_image(rng, w, h), b = random_image(rng, w, h);
        EXPECT_EQ(psnr(a, a), kPsnrCap);
        EXPECT_EQ(psnr(a, b), psnr(b, a));
        EXPECT_GT(psnr(a, b), 0.0);
        EXPECT_LE(psnr(a, b), kPsnrCap);
    }
}

TEST(Ssim, IdentityProperty) {
    Rng rng(2);
    for (int i = 0; i < 30; ++i) {
        const int w = 11 + static_cast<int>(rng.below(20)), h = 11 + static_cast<int>(rng.below(20));
        const Image a = random_image(rng, w, h);
        EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
    }
    EXPECT_NEAR(ssim(Image(12, 12, 0.3f), Image(12, 12, 0.3f)), 1.0, 1e-12);
}

TEST(Ssim, MatchesSlidingWindowOracle) {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const int w = 11 + static_cast<int>(rng.below(8)), h = 11 + static_cast<int>(rng.below(8));
        const Image a = random_image(rng, w, h), b = random_image(rng, w, h);
        const double s = ssim(a, b);
        ASSERT_NEAR(s, ssim_oracle(a, b), 1e-6) << "instance " << i;
        EXPECT_GE(s, -1.0);
        EXPECT_LE(s, 1.0);
    }
}

TEST(Ssim, NegatedCheckerboardIsAnticorrelated) {
    Image a(16, 16), b(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) {
                a.at(x, y, c) = (x + y) % 2 ? 0.75f : 0.25f;
                b.at(x, y, c) = 1.f - a.at(x, y, c);
            }
    const double s = ssim(a, b);
    EXPECT_LT(s, 0.0);
    EXPECT_NEAR(s, ssim_oracle(a, b), 1e-9);
}

TEST(Ssim, RejectsSmallImages) {
    EXPECT_THROW(ssim(Image(10, 20), Image(10, 20)), std::invalid_argument);
    EXPECT_THROW(ssim(Image(12, 12), Image(12, 13)), std::invalid_argument);
}

TEST(Bicubic, ConstantAndIdentity) {
    Rng rng(4);
    const Image c(5, 4, 0.4f);
    const Image up = bicubic_upsample(c, 4);
    ASSERT_EQ(up.width, 20);
    ASSERT_EQ(up.height, 16);
    for (float v : up.pixels) EXPECT_NEAR(v, 0.4f, 1e-6);
    const Image a = random_image(rng, 6, 5);
    EXPECT_EQ(bicubic_upsample(a, 1).pixels, a.pixels);
}

TEST(Bicubic, MatchesDirectKernel) {
    Rng rng(5);
    const Image a = random_image(rng, 7, 6);
    const Image up = bicubic_upsample(a, 2);
    auto k = [](double x) {
        x = std::abs(x);
        const double A = -0.75;
        if (x <= 1) return (A + 2) * x * x * x - (A + 3) * x * x + 1;
        if (x < 2) return A * x * x * x - 5 * A * x * x + 8 * A * x - 4 * A;
        return 0.0;
    };
    for (int oy = 0; oy < up.height; ++oy)
        for (int ox = 0; ox < up.width; ++ox) {
            const double sx = (ox + 0.5) / 2 - 0.5, sy = (oy + 0.5) / 2 - 0.5;
            double acc = 0.0;
            for (int y = -3; y < 10; ++y)
                for (int x = -3; x < 11; ++x) {
                    const double w = k(sx - x) * k(sy - y);
                    if (w == 0.0) continue;
                    acc += w * a.at(std::clamp(x, 0, 6), std::clamp(y, 0, 5), 2);
                }
            ASSERT_NEAR(up.at(ox, oy, 2), std::clamp(acc, 0.0, 1.0), 1e-6);
        }
}

TEST(Strip, ShapeAndConstantRows) {
    std::vector<Image> frames(10, Image(8, 6));
    for (auto& f : frames)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 8; ++x)
                for (int c = 0; c < 3; ++c) f.at(x, y, c) = 0.1f * y + 0.01f * x;
    const Image s = consistency_strip(frames, 3);
    EXPECT_EQ(s.width, 10);
    EXPECT_EQ(s.height, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 10; ++x) EXPECT_EQ(s.at(x, y, 0), s.at(0, y, 0));
    EXPECT_EQ(consistency_strip(frames, 0, 2, 3).height, 3);
}

TEST(Strip, MovingEdgeBecomesDiagonal) {
    std::vector<Image> frames;
    for (int i = 0; i < 8; ++i) {
        Image f(5, 12, 0.f);
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 5; ++x)
                if (y < i + 2) f.at(x, y, 1) = 1.f;
        frames.push_back(f);
    }
    const Image s = consistency_strip(frames, 2);
    for (int i = 0; i < 8; ++i) {
        int boundary = 0;
        while (boundary < 12 && s.at(i, boundary, 1) == 1.f) ++boundary;
        EXPECT_EQ(boundary, i + 2);
    }
}

TEST(Strip, Errors) {
    std::vector<Image> one(1, Image(4, 4));
    EXPECT_THROW(consistency_strip(one, 0), std::invalid_argument);
    std::vector<Image> two(2, Image(4, 4));
    EXPECT_THROW(consistency_strip(two, 4), std::out_of_range);
    EXPECT_THROW(consistency_strip(two, 0, 3, 2), std::out_of_range);
    two[1] = Image(4, 5);
    EXPECT_THROW(consistency_strip(two, 0), std::invalid_argument);
}

TEST(RenderView, ChunkAndThreadInvariance) {
    const auto m = small_model();
    RenderOptions one;
    one.chunk = 1;
    one.threads = 1;
    const auto a = render_view(m.encoder, m.decoder, m.camera, one);
    RenderOptions big;
    big.chunk = 4096;
    const auto b = render_view(m.encoder, m.decoder, m.camera, big);
    RenderOptions mixed;
    mixed.chunk = 7;
    mixed.threads = 3;
    const auto c = render_view(m.encoder, m.decoder, m.camera, mixed);
    EXPECT_EQ(a.image.pixels, b.image.pixels);
    EXPECT_EQ(a.image.pixels, c.image.pixels);
    EXPECT_EQ(a.rgb_low.pixels, c.rgb_low.pixels);
    EXPECT_EQ(a.depth, c.depth);
    EXPECT_EQ(a.image.width, 24);
    EXPECT_EQ(a.image.height, 20);
    EXPECT_EQ(a.rgb_low.width, 12);
    EXPECT_GE(a.seconds, 0.0);
}

TEST(RenderView, MatchesPatchPath) {
    const auto m = small_model();
    const auto r = render_view(m.encoder, m.decoder, m.camera);
    NoGradScope<float> no_grad;
    const auto out = render_region_lowres(m.encoder, m.camera, 0, 0, 12, 10, 2);
    const auto img = decode(m.decoder, out.feature_map, normalize_depth(out.depth_map, 1.0, 5.0));
    const Image expect = tensor_to_image(img);
    for (size_t i = 0; i < expect.pixels.size(); ++i) ASSERT_NEAR(r.image.pixels[i], expect.pixels[i], 1e-5);
    const Image low = tensor_to_image(out.rgb_low);
    for (size_t i = 0; i < low.pixels.size(); ++i) ASSERT_NEAR(r.rgb_low.pixels[i], low.pixels[i], 1e-5);
}

TEST(RenderView, EmptySceneRendersWhiteLowRes) {
    auto m = small_model(-80.0);
    std::fill(m.encoder.density_grid.data().begin(), m.encoder.density_grid.data().end(), -80.f);
    const auto r = render_view(m.encoder, m.decoder, m.camera);
    for (float v : r.rgb_low.pixels) EXPECT_EQ(v, 1.f);
    for (float d : r.depth) EXPECT_NEAR(d, 0.0, 1e-6);
}

TEST(RenderView, RejectsIndivisibleSize) {
    auto m = small_model();
    m.camera.width = 23;
    EXPECT_THROW(render_view(m.encoder, m.decoder, m.camera), std::invalid_argument);
}

TEST(TensorImage, RoundTrip) {
    Rng rng(6);
    const Image a = random_image(rng, 5, 3);
    EXPECT_EQ(tensor_to_image(image_to_tensor(a)).pixels, a.pixels);
    EXPECT_THROW(tensor_to_image(Tensor<float>({2, 3, 3})), std::invalid_argument);
}

TEST(MetricReport, JsonIsStable) {
    MetricReport r;
    r.views.push_back({"view_0", 30.5, 0.9, 28.0, 31.0});
    r.mean_psnr = 30.5;
    const std::string a = r.to_json();
    EXPECT_EQ(a, r.to_json());
    EXPECT_NE(a.find("\"psnr_bicubic\": 28.0"), std::string::npos) << a;
}
