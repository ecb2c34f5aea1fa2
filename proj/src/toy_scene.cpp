// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/toy_scene.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "vxray/rng.hpp"

namespace vxray {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool inside_box(const Vec3& x) {
    return std::abs(x[0]) <= 1.0 && std::abs(x[1]) <= 1.0 && std::abs(x[2]) <= 1.0;
}

double sphere_density(const SoftSphere& s, const Vec3& x) {
    const double dx = x[0] - s.center[0], dy = x[1] - s.center[1], dz = x[2] - s.center[2];
    const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (d <= s.radius) return s.peak;
    const double u = (d - s.radius) / s.falloff;
    return s.peak * std::exp(-0.5 * u * u);
}

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }
Vec3 json_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

double AnalyticField::density(const Vec3& x) const {
    if (!inside_box(x)) return 0.0;
    double total = 0.0;
    for (const auto& s : spheres) total += sphere_density(s, x);
    return total;
}

Vec3 AnalyticField::color(const Vec3& x) const {
    Vec3 mixed{0.0, 0.0, 0.0};
    double total = 0.0;
    for (const auto& s : spheres) {
        const double w = sphere_density(s, x);
        for (int c = 0; c < 3; ++c) mixed[c] += w * s.color[c];
        total += w;
    }
    if (total <= 0.0) return mixed;
    const double phase = stripe_freq[0] * x[0] + stripe_freq[1] * x[1] + stripe_freq[2] * x[2];
    const double tex = 1.0 - stripe_amplitude * 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * phase));
    for (auto& c : mixed) c = c / total * tex;
    return mixed;
}

std::string AnalyticField::to_json() const {
    json doc;
    doc["box_min"] = vec_json({-1.0, -1.0, -1.0});
    doc["box_max"] = vec_json({1.0, 1.0, 1.0});
    doc["stripe_freq"] = vec_json(stripe_freq);
    doc["stripe_amplitude"] = stripe_amplitude;
    doc["spheres"] = json::array();
    for (const auto& s : spheres) {
        doc["spheres"].push_back({{"center", vec_json(s.center)},
                                  {"radius", s.radius},
                                  {"falloff", s.falloff},
                                  {"peak", s.peak},
                                  {"color", vec_json(s.color)}});
    }
    return doc.dump(2);
}

AnalyticField AnalyticField::from_json(const std::string& text) {
    const json doc = json::parse(text);
    AnalyticField f;
    f.stripe_freq = json_vec(doc.at("stripe_freq"));
    f.stripe_amplitude = doc.at("stripe_amplitude").get<double>();
    for (const auto& js : doc.at("spheres")) {
        SoftSphere s;
        s.center = json_vec(js.at("center"));
        s.radius = js.at("radius").get<double>();
        s.falloff = js.at("falloff").get<double>();
        s.peak = js.at("peak").get<double>();
        s.color = json_vec(js.at("color"));
        f.spheres.push_back(s);
    }
    return f;
}

AnalyticField AnalyticField::standard() {
    AnalyticField f;
    f.spheres = {
        {{-0.35, -0.25, -0.05}, 0.32, 0.03, 60.0, {0.85, 0.20, 0.15}},
        {{0.38, 0.05, -0.10}, 0.28, 0.03, 60.0, {0.15, 0.70, 0.25}},
        {{-0.02, 0.38, 0.30}, 0.24, 0.03, 60.0, {0.20, 0.30, 0.90}},
    };
    return f;
}

GroundTruthSample render_ground_truth(const AnalyticField& field, const Ray& ray, double near,
                                      double far, int n_samples) {
    if (n_samples < 2) throw std::invalid_argument("ground truth needs at least 2 samples");
    const double delta = (far - near) / (n_samples - 1);
    GroundTruthSample out;
    double trans = 1.0;
    for (int i = 0; i + 1 < n_samples; ++i) {
        const double t = near + delta * i;
        const Vec3 x{ray.origin[0] + t * ray.direction[0], ray.origin[1] + t * ray.direction[1],
                     ray.origin[2] + t * ray.direction[2]};
        const double sigma = field.density(x);
        if (sigma <= 0.0) continue;
        const double alpha = 1.0 - std::exp(-sigma * delta);
        const double w = trans * alpha;
        const Vec3 c = field.color(x);
        for (int k = 0; k < 3; ++k) out.rgb[k] += w * c[k];
        out.depth += w * t;
        trans *= 1.0 - alpha;
    }
    for (auto& c : out.rgb) c += trans;
    out.transmittance = trans;
    return out;
}

Image render_ground_truth_image(const AnalyticField& field, const Camera& camera, int n_samples) {
    Image img(camera.width, camera.height);
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const auto s = render_ground_truth(field, camera.ray_at(x + 0.5, y + 0.5), camera.near,
                                               camera.far, n_samples);
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(s.rgb[c]);
        }
    }
    return img;
}

std::vector<Camera> toy_cameras(int n, int resolution, uint64_t seed, const ToySceneOptions& opt) {
    Rng rng(seed);
    const double focal = 0.5 * resolution / std::tan(0.5 * opt.camera_angle_x);
    const double deg = std::numbers::pi / 180.0;
    std::vector<Camera> cams;
    for (int i = 0; i < n; ++i) {
        const double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double elev = rng.uniform(opt.min_elevation_deg, opt.max_elevation_deg) * deg;
        const Vec3 eye{opt.camera_radius * std::cos(elev) * std::cos(azimuth),
                       opt.camera_radius * std::cos(elev) * std::sin(azimuth),
                       opt.camera_radius * std::sin(elev)};
        cams.push_back(Camera::look_at(eye, {0.0, 0.0, 0.0}, {0.0, 0.0, 1.0}, resolution,
                                       resolution, focal, opt.near, opt.far));
    }
    return cams;
}

std::vector<Camera> turntable_cameras(int count, int resolution, double elevation_deg,
                                      const ToySceneOptions& opt) {
    if (count < 1 || resolution < 1) throw std::invalid_argument("turntable needs a positive count and resolution");
    const double focal = 0.5 * resolution / std::tan(0.5 * opt.camera_angle_x);
    const double elev = elevation_deg * std::numbers::pi / 180.0;
    std::vector<Camera> cams;
    for (int i = 0; i < count; ++i) {
        const double azimuth = 2.0 * std::numbers::pi * i / count;
        const Vec3 eye{opt.camera_radius * std::cos(elev) * std::cos(azimuth),
                       opt.camera_radius * std::cos(elev) * std::sin(azimuth),
                       opt.camera_radius * std::sin(elev)};
        cams.push_back(Camera::look_at(eye, {0.0, 0.0, 0.0}, {0.0, 0.0, 1.0}, resolution,
                                       resolution, focal, opt.near, opt.far));
    }
    return cams;
}

namespace {

void write_split(const fs::path& out, const std::string& split, const std::vector<Camera>& cams,
                 const AnalyticField& field, const ToySceneOptions& opt) {
    fs::create_directories(out / split);
    json doc;
    doc["camera_angle_x"] = opt.camera_angle_x;
    doc["near"] = opt.near;
    doc["far"] = opt.far;
    doc["frames"] = json::array();
    for (size_t i = 0; i < cams.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "r_%03zu", i);
        write_png(out / split / (std::string(name) + ".png"),
                  render_ground_truth_image(field, cams[i], opt.gt_samples));
        json mat = json::array();
        for (int r = 0; r < 4; ++r) {
            mat.push_back(json::array({cams[i].pose[r * 4], cams[i].pose[r * 4 + 1],
                                       cams[i].pose[r * 4 + 2], cams[i].pose[r * 4 + 3]}));
        }
        doc["frames"].push_back({{"file_path", "./" + split + "/" + name}, {"transform_matrix", mat}});
    }
    std::ofstream(out / ("transforms_" + split + ".json")) << doc.dump(2) << '\n';
}

}  // namespace

void generate_toy_scene(const fs::path& out, int n_views, int resolution, uint64_t seed,
                        const AnalyticField& field, const ToySceneOptions& opt) {
    if (n_views < 2) throw std::invalid_argument("toy scene needs at least 2 views");
    if (resolution < 8) throw std::invalid_argument("toy scene resolution must be >= 8");
    fs::create_directories(out);
    const auto train = toy_cameras(n_views, resolution, seed, opt);
    const auto test = toy_cameras(opt.test_views, resolution, seed ^ 0x9e3779b97f4a7c15ULL, opt);
    write_split(out, "train", train, field, opt);
    if (!test.empty()) write_split(out, "test", test, field, opt);
    std::ofstream(out / "scene.json") << field.to_json() << '\n';
}

}  // namespace vxray
