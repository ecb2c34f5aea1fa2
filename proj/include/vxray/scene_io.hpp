// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "vxray/image.hpp"

namespace vxray {

using Vec3 = std::array<double, 3>;

struct Ray {
    Vec3 origin{};
    Vec3 direction{};  // unit length
};

/// Pinhole camera in the Synthetic-NeRF convention: right-handed,
/// camera looks down its local -z axis, +y is up in the image.
struct Camera {
    int width = 0;   // full resolution
    int height = 0;
    double focal = 0.0;                  // pixels
    std::array<double, 16> pose{};       // camera-to-world, row-major 4x4
    double near = 0.5;
    double far = 6.0;

    /// Throws std::invalid_argument on a non-orthonormal rotation or near/far.
    void validate() const;
    Vec3 position() const { return {pose[3], pose[7], pose[11]}; }
    /// Ray through continuous full-resolution image coordinates (x right, y down).
    Ray ray_at(double x, double y) const;

    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width,
                          int height, double focal, double near, double far);
};

struct ViewImage {
    Camera camera;
    Image full;
    Image low;
};

/// Rectangle of one training view addressed at both resolutions.
struct PatchSpec {
    int view = 0;
    int low_x = 0;
    int low_y = 0;
    int low_side = 0;
    int full_x = 0;
    int full_y = 0;
    int full_side = 0;
};

class DatasetError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// `path` is either a manifest JSON file or a directory holding
/// transforms_<split>.json (falling back to transforms.json).
std::vector<ViewImage> load_dataset(const std::filesystem::path& path, int scale,
                                    const std::string& split = "train");

/// Reads only the cameras of a manifest; image sizes come from the
/// manifest's `w`/`h` fields or from the referenced image files.
std::vector<Camera> load_cameras(const std::filesystem::path& manifest);

/// Tiles every view with stride N_p; the last tile along an axis is shifted
/// back so it ends at the border. N_p is the full-resolution side.
std::vector<PatchSpec> build_patch_set(const std::vector<ViewImage>& views, int patch_size,
                                       int scale);
std::vector<PatchSpec> build_patch_set(int n_views, int width, int height, int patch_size,
                                       int scale);

Image crop(const Image& image, int x, int y, int w, int h);

}  // namespace vxray
