// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/scene_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace vxray {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Vec3 normalized(const Vec3& v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

struct Manifest {
    fs::path file;
    json doc;
};

Manifest open_manifest(const fs::path& path, const std::string& split) {
    Manifest m;
    if (fs::is_directory(path)) {
        m.file = path / ("transforms_" + split + ".json");
        if (!fs::exists(m.file)) m.file = path / "transforms.json";
    } else {
        m.file = path;
    }
    std::ifstream in(m.file);
    if (!in) throw DatasetError("cannot open camera manifest " + m.file.string());
    try {
        m.doc = json::parse(in);
    } catch (const json::exception& e) {
        throw DatasetError("corrupt camera manifest " + m.file.string() + ": " + e.what());
    }
    if (!m.doc.contains("frames") || !m.doc["frames"].is_array() || !m.doc.contains("camera_angle_x")) {
        throw DatasetError("manifest " + m.file.string() + " needs camera_angle_x and frames");
    }
    if (m.doc["frames"].empty()) throw DatasetError("empty dataset: " + m.file.string());
    return m;
}

fs::path frame_image_path(const Manifest& m, const json& frame) {
    fs::path rel = frame.at("file_path").get<std::string>();
    if (!rel.has_extension()) rel += ".png";
    return m.file.parent_path() / rel;
}

Camera frame_camera(const Manifest& m, const json& frame, int width, int height) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    const double angle = m.doc.at("camera_angle_x").get<double>();
    cam.focal = 0.5 * width / std::tan(0.5 * angle);
    cam.near = m.doc.value("near", 0.5);
    cam.far = m.doc.value("far", 6.0);
    const json& mat = frame.at("transform_matrix");
    if (!mat.is_array() || mat.size() != 4) throw DatasetError("transform_matrix must be 4x4");
    for (int r = 0; r < 4; ++r) {
        if (!mat[r].is_array() || mat[r].size() != 4) throw DatasetError("transform_matrix must be 4x4");
        for (int c = 0; c < 4; ++c) cam.pose[r * 4 + c] = mat[r][c].get<double>();
    }
    return cam;
}

}  // namespace

void Camera::validate() const {
    if (width <= 0 || height <= 0 || !(focal > 0.0)) {
        throw std::invalid_argument("camera needs positive size and focal length");
    }
    if (!(near > 0.0) || !(far > near)) throw std::invalid_argument("camera needs 0 < near < far");
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += pose[k * 4 + i] * pose[k * 4 + j];
            if (std::abs(dot - (i == j ? 1.0 : 0.0)) > 1e-4) {
                throw std::invalid_argument("camera rotation is not orthonormal");
            }
        }
    }
}

Ray Camera::ray_at(double x, double y) const {
    const Vec3 local{(x - 0.5 * width) / focal, -(y - 0.5 * height) / focal, -1.0};
    Vec3 dir{};
    for (int r = 0; r < 3; ++r)
        dir[r] = pose[r * 4 + 0] * local[0] + pose[r * 4 + 1] * local[1] + pose[r * 4 + 2] * local[2];
    return {position(), normalized(dir)};
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                       double focal, double near, double far) {
    const Vec3 back = normalized({eye[0] - target[0], eye[1] - target[1], eye[2] - target[2]});
    const Vec3 right = normalized(cross(up, back));
    const Vec3 true_up = cross(back, right);
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.focal = focal;
    cam.near = near;
    cam.far = far;
    for (int r = 0; r < 3; ++r) {
        cam.pose[r * 4 + 0] = right[r];
        cam.pose[r * 4 + 1] = true_up[r];
        cam.pose[r * 4 + 2] = back[r];
        cam.pose[r * 4 + 3] = eye[r];
    }
    cam.pose[15] = 1.0;
    return cam;
}

std::vector<ViewImage> load_dataset(const fs::path& path, int scale, const std::string& split) {
    if (scale < 1) throw DatasetError("upscale factor must be >= 1");
    const Manifest m = open_manifest(path, split);
    std::vector<ViewImage> views;
    int ref_w = -1, ref_h = -1;
    const auto& frames = m.doc["frames"];
    for (size_t i = 0; i < frames.size(); ++i) {
        const fs::path img_path = frame_image_path(m, frames[i]);
        const std::string tag = "frame " + std::to_string(i) + " (" + img_path.string() + ")";
        ViewImage view;
        try {
            view.full = read_png(img_path);
        } catch (const ImageError& e) {
            throw DatasetError(tag + ": " + e.what());
        }
        if (ref_w < 0) {
            ref_w = view.full.width;
            ref_h = view.full.height;
        } else if (view.full.width != ref_w || view.full.height != ref_h) {
            throw DatasetError(tag + ": size " + std::to_string(view.full.width) + "x" +
                               std::to_string(view.full.height) + " differs from " +
                               std::to_string(ref_w) + "x" + std::to_string(ref_h));
        }
        if (view.full.width % scale != 0 || view.full.height % scale != 0) {
            throw DatasetError(tag + ": size " + std::to_string(view.full.width) + "x" +
                               std::to_string(view.full.height) + " not divisible by scale " +
                               std::to_string(scale));
        }
        try {
            view.camera = frame_camera(m, frames[i], view.full.width, view.full.height);
            view.camera.validate();
        } catch (const std::exception& e) {
            throw DatasetError(tag + ": " + e.what());
        }
        view.low = box_downscale(view.full, scale);
        views.push_back(std::move(view));
    }
    return views;
}

std::vector<Camera> load_cameras(const fs::path& manifest) {
    const Manifest m = open_manifest(manifest, "train");
    std::vector<Camera> cams;
    for (const auto& frame : m.doc["frames"]) {
        int w = m.doc.value("w", 0), h = m.doc.value("h", 0);
        if (w <= 0 || h <= 0) {
            const Image img = read_png(frame_image_path(m, frame));
            w = img.width;
            h = img.height;
        }
        Camera cam = frame_camera(m, frame, w, h);
        cam.validate();
        cams.push_back(cam);
    }
    return cams;
}

namespace {

std::vector<int> tile_origins(int extent, int side) {
    std::vector<int> origins;
    for (int o = 0; o < extent; o += side) origins.push_back(std::min(o, extent - side));
    return origins;
}

}  // namespace

std::vector<PatchSpec> build_patch_set(int n_views, int width, int height, int patch_size,
                                       int scale) {
    if (scale < 1 || patch_size % scale != 0) {
        throw DatasetError("patch size " + std::to_string(patch_size) +
                           " must be divisible by scale " + std::to_string(scale));
    }
    if (patch_size / scale < 4) throw DatasetError("low-resolution patch side must be >= 4");
    if (patch_size > width || patch_size > height) {
        throw DatasetError("patch size " + std::to_string(patch_size) + " exceeds image " +
                           std::to_string(width) + "x" + std::to_string(height));
    }
    if (width % scale != 0 || height % scale != 0) {
        throw DatasetError("image size not divisible by scale");
    }
    const auto xs = tile_origins(width, patch_size);
    const auto ys = tile_origins(height, patch_size);
    std::vector<PatchSpec> patches;
    for (int v = 0; v < n_views; ++v) {
        for (int y : ys) {
            for (int x : xs) {
                PatchSpec p;
                p.view = v;
                p.full_x = x;
                p.full_y = y;
                p.full_side = patch_size;
                p.low_x = x / scale;
                p.low_y = y / scale;
                p.low_side = patch_size / scale;
                patches.push_back(p);
            }
        }
    }
    return patches;
}

std::vector<PatchSpec> build_patch_set(const std::vector<ViewImage>& views, int patch_size,
                                       int scale) {
    if (views.empty()) throw DatasetError("empty dataset");
    return build_patch_set(static_cast<int>(views.size()), views.front().full.width,
                           views.front().full.height, patch_size, scale);
}

Image crop(const Image& image, int x, int y, int w, int h) {
    if (x < 0 || y < 0 || x + w > image.width || y + h > image.height) {
        throw ImageError("crop rectangle outside image");
    }
    Image out(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < 3; ++k) out.at(c, r, k) = image.at(x + c, y + r, k);
    return out;
}

}  // namespace vxray
