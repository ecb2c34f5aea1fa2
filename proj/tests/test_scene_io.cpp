// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <json.hpp>
#include <png.h>

#include <cmath>
#include <fstream>
#include <set>

#include "vxray/rng.hpp"
#include "vxray/scene_io.hpp"
#include "vxray/toy_scene.hpp"

using namespace vxray;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("vxray_scene_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_manifest(const fs::path& dir, const nlohmann::json& frames) {
    nlohmann::json doc;
    doc["camera_angle_x"] = 0.69;
    doc["frames"] = frames;
    std::ofstream(dir / "transforms.json") << doc.dump();
}

nlohmann::json identity_frame(const std::string& file) {
    return {{"file_path", file},
            {"transform_matrix", {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 4}, {0, 0, 0, 1}}}};
}

ToySceneOptions quick_options() {
    ToySceneOptions opt;
    opt.gt_samples = 64;
    opt.test_views = 2;
    return opt;
}

}  // namespace

TEST(Camera, CenterPixelLooksDownMinusZ) {
    Camera cam;
    cam.width = 64;
    cam.height = 64;
    cam.focal = 80.0;
    cam.pose = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 3, 0, 0, 0, 1};
    const Ray r = cam.ray_at(32.0, 32.0);
    EXPECT_NEAR(r.direction[0], 0.0, 1e-12);
    EXPECT_NEAR(r.direction[1], 0.0, 1e-12);
    EXPECT_NEAR(r.direction[2], -1.0, 1e-12);
    EXPECT_DOUBLE_EQ(r.origin[2], 3.0);
}

TEST(Camera, ValidateRejectsBadPose) {
    Camera cam;
    cam.width = cam.height = 8;
    cam.focal = 10.0;
    cam.pose = {2, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    EXPECT_THROW(cam.validate(), std::invalid_argument);
    cam.pose[0] = 1;
    cam.near = 3.0;
    cam.far = 2.0;
    EXPECT_THROW(cam.validate(), std::invalid_argument);
}

TEST(Camera, LookAtIsOrthonormalAndAimsAtTarget) {
    const Camera cam = Camera::look_at({2, -1, 1.5}, {0, 0, 0}, {0, 0, 1}, 32, 32, 40, 0.5, 6);
    EXPECT_NO_THROW(cam.validate());
    const Ray r = cam.ray_at(16.0, 16.0);
    const double n = std::sqrt(4 + 1 + 2.25);
    EXPECT_NEAR(r.direction[0], -2 / n, 1e-12);
    EXPECT_NEAR(r.direction[1], 1 / n, 1e-12);
    EXPECT_NEAR(r.direction[2], -1.5 / n, 1e-12);
}

TEST(LoadDataset, EmptyManifestIsAnError) {
    const fs::path dir = fresh_dir("empty");
    write_manifest(dir, nlohmann::json::array());
    try {
        load_dataset(dir, 4);
        FAIL() << "expected DatasetError";
    } catch (const DatasetError& e) {
        EXPECT_NE(std::string(e.what()).find("empty dataset"), std::string::npos);
    }
}

TEST(LoadDataset, IndivisibleSizeNamesTheFrame) {
    const fs::path dir = fresh_dir("indivisible");
    write_png(dir / "a.png", Image(128, 128, 0.5f));
    write_png(dir / "b.png", Image(127, 128, 0.5f));
    write_manifest(dir, {identity_frame("a.png"), identity_frame("b.png")});
    try {
        load_dataset(dir, 4);
        FAIL() << "expected DatasetError";
    } catch (const DatasetError& e) {
        EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos) << e.what();
    }
    write_manifest(dir, {identity_frame("b.png")});
    EXPECT_THROW(load_dataset(dir, 4), DatasetError);
}

TEST(LoadDataset, MissingAndCorruptFiles) {
    const fs::path dir = fresh_dir("missing");
    write_manifest(dir, {identity_frame("nope.png")});
    EXPECT_THROW(load_dataset(dir, 1), DatasetError);
    std::ofstream(dir / "bad.png") << "not a png";
    write_manifest(dir, {identity_frame("bad.png")});
    EXPECT_THROW(load_dataset(dir, 1), DatasetError);
    std::ofstream(dir / "transforms.json") << "{ broken";
    EXPECT_THROW(load_dataset(dir, 1), DatasetError);
    EXPECT_THROW(load_dataset(fresh_dir("nothing"), 1), DatasetError);
}

TEST(LoadDataset, RgbaIsCompositedOverWhite) {
    const fs::path dir = fresh_dir("rgba");
    const unsigned char px[8] = {0, 0, 0, 0, 255, 0, 0, 255};  // transparent black, opaque red
    png_image desc{};
    desc.version = PNG_IMAGE_VERSION;
    desc.width = 2;
    desc.height = 1;
    desc.format = PNG_FORMAT_RGBA;
    ASSERT_TRUE(png_image_write_to_file(&desc, (dir / "a.png").c_str(), 0, px, 0, nullptr));
    const Image img = read_png(dir / "a.png");
    EXPECT_FLOAT_EQ(img.at(0, 0, 0), 1.0f);
    EXPECT_FLOAT_EQ(img.at(0, 0, 2), 1.0f);
    EXPECT_FLOAT_EQ(img.at(1, 0, 0), 1.0f);
    EXPECT_FLOAT_EQ(img.at(1, 0, 1), 0.0f);
}

TEST(Image, PngRoundTrip) {
    const fs::path dir = fresh_dir("roundtrip");
    Image img(4, 2);
    for (size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(i * 9) / 255.f;
    write_png(dir / "x.png", img);
    const Image back = read_png(dir / "x.png");
    ASSERT_EQ(back.width, 4);
    ASSERT_EQ(back.height, 2);
    for (size_t i = 0; i < img.pixels.size(); ++i) EXPECT_FLOAT_EQ(back.pixels[i], img.pixels[i]);
}

TEST(LoadDataset, ToySceneTwentyViews) {
    const fs::path dir = fresh_dir("toy20");
    generate_toy_scene(dir, 20, 128, 7, AnalyticField::standard(), quick_options());
    const auto views = load_dataset(dir, 4);
    ASSERT_EQ(views.size(), 20u);
    for (const auto& v : views) {
        EXPECT_EQ(v.full.width, 128);
        EXPECT_EQ(v.low.width, 32);
        EXPECT_EQ(v.low.height, 32);
        EXPECT_NEAR(v.camera.near, 1.4, 1e-12);
        const Image box = box_downscale(v.full, 4);
        for (size_t i = 0; i < box.pixels.size(); ++i) ASSERT_NEAR(v.low.pixels[i], box.pixels[i], 1e-6);
    }
    EXPECT_EQ(load_dataset(dir, 4, "test").size(), 2u);
}

TEST(ToyScene, EmptyFieldRendersBackground) {
    const fs::path dir = fresh_dir("emptyfield");
    AnalyticField empty;
    generate_toy_scene(dir, 2, 16, 1, empty, quick_options());
    for (const auto& v : load_dataset(dir, 1))
        for (float p : v.full.pixels) EXPECT_EQ(p, 1.0f);
}

TEST(ToyScene, OpaqueSphereDepthMatchesIntersection) {
    AnalyticField field;
    field.spheres = {{{0.0, 0.0, 0.0}, 0.5, 1e-3, 1e4, {1, 0, 0}}};
    const Camera cam = Camera::look_at({0, 0, 3}, {0, 0, 0}, {0, 1, 0}, 33, 33, 40, 1.0, 5.0);
    const int n = 512;
    const auto s = render_ground_truth(field, cam.ray_at(16.5, 16.5), cam.near, cam.far, n);
    const double step = (cam.far - cam.near) / (n - 1);
    EXPECT_NEAR(s.depth, 2.5, 2 * step);
    EXPECT_LT(s.transmittance, 1e-6);
}

TEST(ToyScene, FieldQueriesAndJsonRoundTrip) {
    const AnalyticField f = AnalyticField::standard();
    EXPECT_DOUBLE_EQ(f.density({0.0, 0.0, 5.0}), 0.0);
    EXPECT_DOUBLE_EQ(f.density(f.spheres[0].center), f.spheres[0].peak);
    const AnalyticField g = AnalyticField::from_json(f.to_json());
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const Vec3 x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        EXPECT_DOUBLE_EQ(f.density(x), g.density(x));
        EXPECT_EQ(f.color(x), g.color(x));
    }
}

TEST(ToyScene, SameSeedIsBitIdentical) {
    const fs::path a = fresh_dir("seed_a"), b = fresh_dir("seed_b");
    generate_toy_scene(a, 3, 32, 11, AnalyticField::standard(), quick_options());
    generate_toy_scene(b, 3, 32, 11, AnalyticField::standard(), quick_options());
    for (const char* f : {"train/r_000.png", "train/r_002.png", "test/r_001.png",
                          "transforms_train.json"}) {
        std::ifstream fa(a / f, std::ios::binary), fb(b / f, std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(fa)), {});
        const std::string sb((std::istreambuf_iterator<char>(fb)), {});
        EXPECT_FALSE(sa.empty());
        EXPECT_EQ(sa, sb) << f;
    }
}

TEST(ToyScene, RejectsSingleView) {
    EXPECT_THROW(generate_toy_scene(fresh_dir("one"), 1, 16, 0), std::invalid_argument);
}

TEST(PatchSet, ExactTiling) {
    const auto p = build_patch_set(1, 128, 128, 64, 4);
    std::set<std::pair<int, int>> origins;
    for (const auto& s : p) origins.insert({s.full_x, s.full_y});
    EXPECT_EQ(origins, (std::set<std::pair<int, int>>{{0, 0}, {0, 64}, {64, 0}, {64, 64}}));
}

TEST(PatchSet, ShiftToEdge) {
    const auto p = build_patch_set(1, 100, 64, 64, 4);
    std::set<int> xs;
    for (const auto& s : p) xs.insert(s.full_x);
    EXPECT_EQ(xs, (std::set<int>{0, 36}));
}

TEST(PatchSet, LowSideIsSixteen) {
    for (const auto& s : build_patch_set(3, 128, 192, 64, 4)) EXPECT_EQ(s.low_side, 16);
}

TEST(PatchSet, Errors) {
    EXPECT_THROW(build_patch_set(1, 48, 48, 64, 4), DatasetError);
    EXPECT_THROW(build_patch_set(1, 128, 128, 62, 4), DatasetError);
    EXPECT_THROW(build_patch_set(1, 128, 128, 8, 4), DatasetError);
    EXPECT_THROW(build_patch_set(std::vector<ViewImage>{}, 64, 4), DatasetError);
}

TEST(PatchSet, CoverageAndAlignmentProperty) {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const int s = 1 << rng.below(3);
        const int np = s * static_cast<int>(4 + rng.below(8));
        const int w = s * static_cast<int>(np / s + rng.below(40));
        const int h = s * static_cast<int>(np / s + rng.below(40));
        const auto patches = build_patch_set(2, w, h, np, s);
        std::vector<int> hits(static_cast<size_t>(2) * w * h, 0);
        for (const auto& p : patches) {
            ASSERT_GE(p.full_x, 0);
            ASSERT_LE(p.full_x + p.full_side, w);
            ASSERT_LE(p.full_y + p.full_side, h);
            ASSERT_LE((p.low_x + p.low_side) * s, w);
            ASSERT_EQ(p.low_x * s, p.full_x);
            ASSERT_EQ(p.low_y * s, p.full_y);
            ASSERT_EQ(p.low_side * s, p.full_side);
            for (int y = p.full_y; y < p.full_y + np; ++y)
                for (int x = p.full_x; x < p.full_x + np; ++x) ++hits[(p.view * h + y) * w + x];
        }
        for (int c : hits) ASSERT_GE(c, 1);
    }
}

TEST(Image, BoxDownscaleOfConstantIsConstant) {
    const Image img(24, 12, 0.37f);
    for (int s : {1, 2, 3, 4, 6}) {
        const Image low = box_downscale(img, s);
        for (float v : low.pixels) EXPECT_FLOAT_EQ(v, 0.37f);
    }
    EXPECT_THROW(box_downscale(img, 5), ImageError);
}

TEST(Image, QuantizeRoundsHalfToEven) {
    EXPECT_EQ(quantize_u8(-0.5f), 0);
    EXPECT_EQ(quantize_u8(2.0f), 255);
    EXPECT_EQ(quantize_u8(0.5f), 128);  // 127.5 -> 128 (even)
    EXPECT_EQ(quantize_u8(126.5f / 255.f), 126);
}

TEST(Image, CropBounds) {
    Image img(8, 8);
    img.at(5, 6, 1) = 0.25f;
    const Image c = crop(img, 4, 4, 4, 4);
    EXPECT_FLOAT_EQ(c.at(1, 2, 1), 0.25f);
    EXPECT_THROW(crop(img, 6, 0, 4, 4), ImageError);
}
