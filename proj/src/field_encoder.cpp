// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/field_encoder.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vxray/ops.hpp"

namespace vxray {

RaySamples sample_ray(const Camera& camera, int px, int py, int scale, int n_samples, Rng* jitter) {
    if (n_samples < 2) throw std::invalid_argument("sample_ray needs n_samples >= 2");
    if (scale < 1 || px < 0 || py < 0 || (px + 1) * scale > camera.width ||
        (py + 1) * scale > camera.height) {
        throw std::out_of_range("low-resolution pixel outside the image");
    }
    const Ray ray = camera.ray_at((px + 0.5) * scale, (py + 0.5) * scale);
    RaySamples rs;
    rs.origin = ray.origin;
    rs.direction = ray.direction;
    rs.t.resize(n_samples);
    const double step = (camera.far - camera.near) / (n_samples - 1);
    for (int i = 0; i < n_samples; ++i) {
        rs.t[i] = camera.near + step * i;
        if (jitter && i + 1 < n_samples) rs.t[i] += jitter->uniform() * step;
    }
    rs.t.back() = camera.far;
    rs.delta.resize(n_samples - 1);
    for (int i = 0; i + 1 < n_samples; ++i) rs.delta[i] = rs.t[i + 1] - rs.t[i];
    return rs;
}

namespace {

template <typename T>
Tensor<T> uniform_init(Rng& rng, Shape shape, double bound) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
    return t;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<int64_t>& rows) {
    const int64_t c = x.dim(1);
    Tensor<T> out({static_cast<int64_t>(rows.size()), c});
    auto dst = out.data();
    const auto src = x.data();
    for (size_t r = 0; r < rows.size(); ++r)
        for (int64_t k = 0; k < c; ++k) dst[r * c + k] = src[rows[r] * c + k];
    return out;
}

// Density and color-feature evaluation on points already known to be in the box.
template <typename T>
Tensor<T> density_inside(const FieldEncoder<T>& enc, const Tensor<T>& grid_coords) {
    return softplus(trilinear_sample(enc.density_grid, grid_coords));
}

template <typename T>
Tensor<T> features_inside(const FieldEncoder<T>& enc, const Tensor<T>& grid_coords,
                          const Tensor<T>& points, const Tensor<T>& dirs) {
    const auto& cfg = enc.config;
    Tensor<T> x = concat<T>({trilinear_sample(enc.color_grid, grid_coords),
                             positional_encoding(points, cfg.pos_freqs),
                             positional_encoding(dirs, cfg.dir_freqs)},
                            1);
    x = leaky_relu(linear(x, enc.w0, enc.b0));
    x = leaky_relu(linear(x, enc.w1, enc.b1));
    return linear(x, enc.w2, enc.b2);
}

template <typename T>
Tensor<T> ones_row(int64_t n) {
    return Tensor<T>({1, n}, T(1));
}

}  // namespace

template <typename T>
FieldEncoder<T> FieldEncoder<T>::create(const EncoderConfig& config, Rng& rng) {
    for (int d : config.grid_dims) {
        if (d < 2) throw std::invalid_argument("grid dimensions must be >= 2");
    }
    for (int a = 0; a < 3; ++a) {
        if (!(config.box_max[a] > config.box_min[a])) {
            throw std::invalid_argument("bounding box needs positive extent on every axis");
        }
    }
    FieldEncoder enc;
    enc.config = config;
    const auto [nx, ny, nz] = config.grid_dims;
    enc.density_grid = Tensor<T>({nx, ny, nz, 1}, static_cast<T>(config.density_init));
    enc.color_grid = Tensor<T>({nx, ny, nz, config.grid_channels}, T(0));
    const int in = config.mlp_input_dim(), h = config.hidden, c = config.feature_dim;
    const double leaky_gain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
    enc.w0 = uniform_init<T>(rng, {h, in}, leaky_gain * std::sqrt(3.0 / in));
    enc.b0 = Tensor<T>({h});
    enc.w1 = uniform_init<T>(rng, {h, h}, leaky_gain * std::sqrt(3.0 / h));
    enc.b1 = Tensor<T>({h});
    enc.w2 = uniform_init<T>(rng, {c, h}, std::sqrt(3.0 / h));
    enc.b2 = Tensor<T>({c});
    enc.head_w = uniform_init<T>(rng, {3, c}, std::sqrt(3.0 / c));
    enc.head_b = Tensor<T>({3});
    for (auto& [name, p] : enc.named_parameters()) p->set_requires_grad(true);
    return enc;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> FieldEncoder<T>::named_parameters() {
    return {{"density_grid", &density_grid}, {"color_grid", &color_grid}, {"mlp.w0", &w0},
            {"mlp.b0", &b0},                 {"mlp.w1", &w1},             {"mlp.b1", &b1},
            {"mlp.w2", &w2},                 {"mlp.b2", &b2},             {"rgb_head.w", &head_w},
            {"rgb_head.b", &head_b}};
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> FieldEncoder<T>::named_parameters() const {
    std::vector<std::pair<std::string, const Tensor<T>*>> out;
    for (auto& [name, p] : const_cast<FieldEncoder*>(this)->named_parameters()) out.emplace_back(name, p);
    return out;
}

template <typename T>
Tensor<T> FieldEncoder<T>::to_grid_coords(const Tensor<T>& points) const {
    Tensor<T> out(points.shape());
    const auto src = points.data();
    auto dst = out.data();
    for (int64_t p = 0; p < points.dim(0); ++p)
        for (int a = 0; a < 3; ++a) {
            const double u = (src[p * 3 + a] - config.box_min[a]) / (config.box_max[a] - config.box_min[a]);
            dst[p * 3 + a] = static_cast<T>(u * (config.grid_dims[a] - 1));
        }
    return out;
}

template <typename T>
std::vector<int64_t> FieldEncoder<T>::inside_rows(const Tensor<T>& points) const {
    std::vector<int64_t> rows;
    const auto src = points.data();
    for (int64_t p = 0; p < points.dim(0); ++p) {
        bool in = true;
        for (int a = 0; a < 3; ++a) {
            const double v = src[p * 3 + a];
            in = in && v >= config.box_min[a] && v <= config.box_max[a];
        }
        if (in) rows.push_back(p);
    }
    return rows;
}

template <typename T, typename U>
FieldEncoder<U> cast_encoder(const FieldEncoder<T>& enc) {
    FieldEncoder<U> out;
    out.config = enc.config;
    auto convert = [](const Tensor<T>& t) {
        Tensor<U> u(t.shape());
        std::copy(t.data().begin(), t.data().end(), u.data().begin());
        u.set_requires_grad(t.requires_grad());
        return u;
    };
    const auto from = enc.named_parameters();
    auto to = out.named_parameters();
    for (size_t i = 0; i < from.size(); ++i) *to[i].second = convert(*from[i].second);
    return out;
}

template <typename T>
Tensor<T> positional_encoding(const Tensor<T>& x, int n_freqs) {
    const int64_t p = x.dim(0);
    const int64_t width = 3 * (1 + 2 * n_freqs);
    Tensor<T> out({p, width});
    const auto src = x.data();
    auto dst = out.data();
    for (int64_t r = 0; r < p; ++r) {
        T* row = dst.data() + r * width;
        for (int a = 0; a < 3; ++a) {
            row[a] = src[r * 3 + a];
            // Double-angle recurrence from the base frequency.
            double s = std::sin(std::numbers::pi * src[r * 3 + a]);
            double c = std::cos(std::numbers::pi * src[r * 3 + a]);
            for (int k = 0; k < n_freqs; ++k) {
                row[3 + 6 * k + a] = static_cast<T>(s);
                row[6 + 6 * k + a] = static_cast<T>(c);
                const double s2 = 2.0 * s * c;
                c = c * c - s * s;
                s = s2;
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> query_density(const FieldEncoder<T>& enc, const Tensor<T>& points) {
    const int64_t p = points.dim(0);
    const auto rows = enc.inside_rows(points);
    if (rows.empty()) return Tensor<T>({p});
    const Tensor<T> inside = gather_rows(points, rows);
    return reshape(scatter_rows(density_inside(enc, enc.to_grid_coords(inside)), rows, p), {p});
}

template <typename T>
Tensor<T> query_color_features(const FieldEncoder<T>& enc, const Tensor<T>& points,
                               const Tensor<T>& dirs) {
    const int64_t p = points.dim(0);
    const auto rows = enc.inside_rows(points);
    if (rows.empty()) return Tensor<T>({p, enc.config.feature_dim});
    const Tensor<T> inside = gather_rows(points, rows);
    return scatter_rows(
        features_inside(enc, enc.to_grid_coords(inside), inside, gather_rows(dirs, rows)), rows, p);
}

template <typename T>
Tensor<T> rgb_head_logits(const FieldEncoder<T>& enc, const Tensor<T>& features,
                          const Tensor<T>& opacity) {
    const int64_t r = features.dim(0);
    return add(linear(features, enc.head_w, Tensor<T>({3})),
               matmul(reshape(opacity, {r, 1}), reshape(enc.head_b, {1, 3})));
}

template <typename T>
RayBatchOutput<T> render_rays(const FieldEncoder<T>& enc, const std::vector<RaySamples>& rays) {
    if (rays.empty()) throw std::invalid_argument("render_rays needs at least one ray");
    const int64_t r = static_cast<int64_t>(rays.size());
    const int64_t m = static_cast<int64_t>(rays.front().delta.size());
    const int64_t c = enc.config.feature_dim;
    const int64_t total = r * m;

    Tensor<T> points({total, 3}), dirs({total, 3}), tvals({total, 1}), delta({r, m});
    {
        auto pp = points.data(), dd = dirs.data(), tt = tvals.data(), de = delta.data();
        for (int64_t i = 0; i < r; ++i) {
            const auto& ray = rays[i];
            if (static_cast<int64_t>(ray.delta.size()) != m) {
                throw std::invalid_argument("rays in a batch must share the sample count");
            }
            for (int64_t k = 0; k < m; ++k) {
                const int64_t row = i * m + k;
                for (int a = 0; a < 3; ++a) {
                    pp[row * 3 + a] = static_cast<T>(ray.origin[a] + ray.t[k] * ray.direction[a]);
                    dd[row * 3 + a] = static_cast<T>(ray.direction[a]);
                }
                tt[row] = static_cast<T>(ray.t[k]);
                de[row] = static_cast<T>(ray.delta[k]);
            }
        }
    }

    const auto rows = enc.inside_rows(points);
    Tensor<T> sigma, g;
    if (rows.empty()) {
        sigma = Tensor<T>({r, m});
        g = Tensor<T>({total, c});
    } else {
        const Tensor<T> inside = gather_rows(points, rows);
        const Tensor<T> coords = enc.to_grid_coords(inside);
        sigma = reshape(scatter_rows(density_inside(enc, coords), rows, total), {r, m});
        g = scatter_rows(features_inside(enc, coords, inside, gather_rows(dirs, rows)), rows, total);
    }

    const Tensor<T> values = reshape(concat<T>({g, tvals}, 1), {r, m, c + 1});
    auto [acc, residual] = composite(sigma, values, delta);

    RayBatchOutput<T> out;
    out.features = narrow(acc, 1, 0, c);
    out.depth = reshape(narrow(acc, 1, c, 1), {r});
    out.transmittance = residual;
    const Tensor<T> opacity = reshape(add_scalar(neg(residual), T(1)), {r, 1});
    const Tensor<T> opacity3 = matmul(opacity, ones_row<T>(3));
    const Tensor<T> shade = sigmoid(rgb_head_logits(enc, out.features, opacity));
    out.rgb = add_scalar(mul(opacity3, add_scalar(shade, T(-1))), T(1));
    return out;
}

template <typename T>
Tensor<T> rows_to_map(const Tensor<T>& rows, int64_t h, int64_t w) {
    return reshape(transpose2d(rows), {rows.dim(1), h, w});
}

template <typename T>
EncoderOutput<T> render_region_lowres(const FieldEncoder<T>& enc, const Camera& camera, int x0,
                                      int y0, int w, int h, int scale, Rng* jitter) {
    std::vector<RaySamples> rays;
    rays.reserve(static_cast<size_t>(w) * h);
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x)
            rays.push_back(sample_ray(camera, x, y, scale, enc.config.n_samples, jitter));
    const auto out = render_rays(enc, rays);
    EncoderOutput<T> res;
    res.feature_map = rows_to_map(out.features, h, w);
    res.depth_map = reshape(out.depth, {h, w});
    res.rgb_low = rows_to_map(out.rgb, h, w);
    return res;
}

template <typename T>
EncoderOutput<T> render_patch_lowres(const FieldEncoder<T>& enc, const Camera& camera,
                                     const PatchSpec& patch, int scale, Rng* jitter) {
    return render_region_lowres(enc, camera, patch.low_x, patch.low_y, patch.low_side,
                                patch.low_side, scale, jitter);
}

#define VXRAY_INSTANTIATE(T)                                                                     \
    template struct FieldEncoder<T>;                                                             \
    template Tensor<T> query_density(const FieldEncoder<T>&, const Tensor<T>&);                  \
    template Tensor<T> positional_encoding(const Tensor<T>&, int);                               \
    template Tensor<T> query_color_features(const FieldEncoder<T>&, const Tensor<T>&,            \
                                            const Tensor<T>&);                                   \
    template Tensor<T> rgb_head_logits(const FieldEncoder<T>&, const Tensor<T>&,                 \
                                       const Tensor<T>&);                                        \
    template RayBatchOutput<T> render_rays(const FieldEncoder<T>&, const std::vector<RaySamples>&); \
    template Tensor<T> rows_to_map(const Tensor<T>&, int64_t, int64_t);                          \
    template EncoderOutput<T> render_region_lowres(const FieldEncoder<T>&, const Camera&, int, int, \
                                                   int, int, int, Rng*);                         \
    template EncoderOutput<T> render_patch_lowres(const FieldEncoder<T>&, const Camera&,         \
                                                  const PatchSpec&, int, Rng*);

VXRAY_INSTANTIATE(float)
VXRAY_INSTANTIATE(double)
#undef VXRAY_INSTANTIATE

template FieldEncoder<double> cast_encoder<float, double>(const FieldEncoder<float>&);
template FieldEncoder<float> cast_encoder<double, float>(const FieldEncoder<double>&);
template FieldEncoder<float> cast_encoder<float, float>(const FieldEncoder<float>&);
template FieldEncoder<double> cast_encoder<double, double>(const FieldEncoder<double>&);

}  // namespace vxray
