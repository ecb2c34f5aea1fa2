// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vxray/scene_io.hpp"

namespace vxray {

/// Sphere with a solid core of radius `radius` and a Gaussian density
/// falloff of width `falloff` outside it.
struct SoftSphere {
    Vec3 center{};
    double radius = 0.3;
    double falloff = 0.03;
    double peak = 60.0;
    Vec3 color{1.0, 1.0, 1.0};
};

/// Analytic emission-absorption field inside the box [-1,1]^3. Colors are the
/// density-weighted mix of the sphere colors, modulated by a planar stripe
/// texture so the images carry detail above the low-resolution Nyquist limit.
class AnalyticField {
  public:
    std::vector<SoftSphere> spheres;
    Vec3 stripe_freq{3.0, 4.0, 0.0};  // cycles per world unit
    double stripe_amplitude = 0.3;

    double density(const Vec3& x) const;
    Vec3 color(const Vec3& x) const;

    std::string to_json() const;
    static AnalyticField from_json(const std::string& text);
    /// The three-sphere scene used by gen-scene.
    static AnalyticField standard();
};

struct GroundTruthSample {
    Vec3 rgb{};
    double depth = 0.0;
    double transmittance = 1.0;
};

/// Numerically integrates the field along a ray with n_samples uniform
/// samples over [near, far] (n_samples - 1 intervals) and a white background.
GroundTruthSample render_ground_truth(const AnalyticField& field, const Ray& ray, double near,
                                      double far, int n_samples);

Image render_ground_truth_image(const AnalyticField& field, const Camera& camera, int n_samples);

struct ToySceneOptions {
    int test_views = 5;
    int gt_samples = 512;
    double camera_radius = 3.2;
    double camera_angle_x = 0.69;
    double near = 1.4;
    double far = 5.0;
    double min_elevation_deg = 15.0;
    double max_elevation_deg = 60.0;
};

/// Orbit cameras looking at the origin with +z up, drawn from `seed`.
std::vector<Camera> toy_cameras(int n, int resolution, uint64_t seed, const ToySceneOptions& opt);

/// `count` cameras evenly spaced in azimuth at a fixed elevation, for pose sweeps.
std::vector<Camera> turntable_cameras(int count, int resolution, double elevation_deg,
                                      const ToySceneOptions& opt = {});

/// Writes transforms_train.json, transforms_test.json, train/ and test/ PNGs
/// and scene.json under `out`.
void generate_toy_scene(const std::filesystem::path& out, int n_views, int resolution,
                        uint64_t seed, const AnalyticField& field = AnalyticField::standard(),
                        const ToySceneOptions& opt = {});

}  // namespace vxray
