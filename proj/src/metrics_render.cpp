// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/metrics_render.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "vxray/ops.hpp"

namespace vxray {

namespace {

void require_same_size(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height) {
        throw std::invalid_argument("image sizes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                                    " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
    }
}

std::vector<double> luma(const Image& im) {
    std::vector<double> y(static_cast<size_t>(im.width) * im.height);
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] = 0.299 * im.pixels[3 * i] + 0.587 * im.pixels[3 * i + 1] + 0.114 * im.pixels[3 * i + 2];
    }
    return y;
}

// Valid-mode separable filtering with a symmetric 1D kernel.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size()), ow = w - n + 1, oh = h - n + 1;
    std::vector<double> tmp(static_cast<size_t>(h) * ow), out(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += k[i] * src[static_cast<size_t>(y) * w + x + i];
            tmp[static_cast<size_t>(y) * ow + x] = acc;
        }
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += k[i] * tmp[static_cast<size_t>(y + i) * ow + x];
            out[static_cast<size_t>(y) * ow + x] = acc;
        }
    return out;
}

double cubic_weight(double x) {
    constexpr double a = -0.75;
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

}  // namespace

Image tensor_to_image(const Tensor<float>& t) {
    if (t.rank() != 3 || t.dim(0) != 3) throw std::invalid_argument("expected a [3,H,W] tensor, got " + shape_str(t.shape()));
    const int h = static_cast<int>(t.dim(1)), w = static_cast<int>(t.dim(2));
    Image im(w, h);
    const auto d = t.data();
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) im.at(x, y, c) = d[(static_cast<size_t>(c) * h + y) * w + x];
    return im;
}

Tensor<float> image_to_tensor(const Image& image) { return image_region(image, 0, 0, image.width, image.height); }

RenderResult render_view(const FieldEncoder<float>& encoder, const DetailDecoder<float>& decoder,
                         const Camera& camera, const RenderOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const int s = decoder.config.scale;
    if (camera.width % s != 0 || camera.height % s != 0) {
        throw std::invalid_argument("image size " + std::to_string(camera.width) + "x" + std::to_string(camera.height) +
                                    " is not divisible by the scale " + std::to_string(s));
    }
    if (options.chunk < 1) throw std::invalid_argument("chunk size must be positive");
    const int w = camera.width / s, h = camera.height / s;
    const int64_t n_rays = static_cast<int64_t>(w) * h;
    const int64_t cdim = encoder.config.feature_dim;
    Tensor<float> features({cdim, h, w}), depth({h, w});
    RenderResult result;
    result.rgb_low = Image(w, h);
    const int64_t n_chunks = (n_rays + options.chunk - 1) / options.chunk;
    std::atomic<int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        NoGradScope<float> no_grad;
        try {
            for (int64_t c = next++; c < n_chunks; c = next++) {
                const int64_t begin = c * options.chunk, end = std::min(n_rays, begin + options.chunk);
                std::vector<RaySamples> rays;
                rays.reserve(end - begin);
                for (int64_t r = begin; r < end; ++r) {
                    rays.push_back(sample_ray(camera, static_cast<int>(r % w), static_cast<int>(r / w), s,
                                              encoder.config.n_samples));
                }
                const auto out = render_rays(encoder, rays);
                const auto f = out.features.data();
                const auto m = out.depth.data();
                const auto rgb = out.rgb.data();
                for (int64_t r = begin; r < end; ++r) {
                    const int64_t i = r - begin;
                    for (int64_t k = 0; k < cdim; ++k) features.data()[k * n_rays + r] = f[i * cdim + k];
                    depth.data()[r] = m[i];
                    for (int k = 0; k < 3; ++k) result.rgb_low.pixels[3 * r + k] = rgb[i * 3 + k];
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n_chunks;
        }
    };
    int threads = options.threads > 0 ? options.threads : static_cast<int>(std::thread::hardware_concurrency());
    threads = static_cast<int>(std::clamp<int64_t>(threads, 1, n_chunks));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    result.depth.assign(depth.data().begin(), depth.data().end());
    {
        NoGradScope<float> no_grad;
        const Tensor<float> out =
            decode(decoder, features, normalize_depth(depth, camera.near, camera.far), options.use_depth);
        result.image = tensor_to_image(out);
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

RenderResult render_view(const Model& model, const Camera& camera, RenderOptions options) {
    options.use_depth = model.config.use_depth;
    return render_view(model.encoder, model.decoder, camera, options);
}

double psnr_from_mse(double mse) {
    if (!(mse >= 0.0)) throw std::invalid_argument("mse must be non-negative");
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double psnr(const Image& a, const Image& b) {
    require_same_size(a, b);
    if (a.pixels.empty()) throw std::invalid_argument("psnr of empty images");
    double sq = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
        sq += d * d;
    }
    return psnr_from_mse(sq / static_cast<double>(a.pixels.size()));
}

double ssim(const Image& a, const Image& b) {
    constexpr int kWindow = 11;
    constexpr double kSigma = 1.5, kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
    require_same_size(a, b);
    if (a.width < kWindow || a.height < kWindow) {
        throw std::invalid_argument("ssim needs images of at least 11x11 pixels");
    }
    std::vector<double> g(kWindow);
    double total = 0.0;
    for (int i = 0; i < kWindow; ++i) total += g[i] = std::exp(-0.5 * (i - 5) * (i - 5) / (kSigma * kSigma));
    for (double& v : g) v /= total;
    const auto x = luma(a), y = luma(b);
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const int w = a.width, h = a.height;
    const auto mx = filter_valid(x, w, h, g), my = filter_valid(y, w, h, g);
    const auto sxx = filter_valid(xx, w, h, g), syy = filter_valid(yy, w, h, g), sxy = filter_valid(xy, w, h, g);
    double sum = 0.0;
    for (size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
        sum += ((2 * mx[i] * my[i] + kC1) * (2 * cxy + kC2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
    }
    return sum / static_cast<double>(mx.size());
}

Image bicubic_upsample(const Image& image, int factor) {
    if (factor < 1) throw std::invalid_argument("upsampling factor must be positive");
    if (image.width < 1 || image.height < 1) throw std::invalid_argument("cannot upsample an empty image");
    const int w = image.width * factor, h = image.height * factor;
    // Taps and weights along one axis of length n.
    auto taps = [factor](int n_out, int n_in) {
        std::vector<std::array<int, 4>> idx(n_out);
        std::vector<std::array<double, 4>> wt(n_out);
        for (int o = 0; o < n_out; ++o) {
            const double src = (o + 0.5) / factor - 0.5;
            const int base = static_cast<int>(std::floor(src));
            const double t = src - base;
            for (int k = 0; k < 4; ++k) {
                idx[o][k] = std::clamp(base - 1 + k, 0, n_in - 1);
                wt[o][k] = cubic_weight(t - (k - 1));
            }
        }
        return std::make_pair(idx, wt);
    };
    const auto [ix, wx] = taps(w, image.width);
    const auto [iy, wy] = taps(h, image.height);
    Image out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int j = 0; j < 4; ++j) {
                    double row = 0.0;
                    for (int i = 0; i < 4; ++i) row += wx[x][i] * image.at(ix[x][i], iy[y][j], c);
                    acc += wy[y][j] * row;
                }
                out.at(x, y, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
            }
    return out;
}

Image consistency_strip(const std::vector<Image>& frames, int column, int y0, int height) {
    if (frames.size() < 2) throw std::invalid_argument("a consistency strip needs at least two frames");
    const Image& first = frames.front();
    for (const auto& f : frames) require_same_size(first, f);
    if (column < 0 || column >= first.width) throw std::out_of_range("strip column outside the frame");
    if (height < 0) height = first.height - y0;
    if (y0 < 0 || height < 1 || y0 + height > first.height) throw std::out_of_range("strip rows outside the frame");
    Image out(static_cast<int>(frames.size()), height);
    for (int i = 0; i < out.width; ++i)
        for (int y = 0; y < height; ++y)
            for (int c = 0; c < 3; ++c) out.at(i, y, c) = frames[i].at(column, y0 + y, c);
    return out;
}

std::string MetricReport::to_json() const {
    nlohmann::ordered_json j;
    j["views"] = nlohmann::ordered_json::array();
    for (const auto& v : views) {
        j["views"].push_back({{"name", v.name},
                              {"psnr", v.psnr},
                              {"ssim", v.ssim},
                              {"psnr_bicubic", v.psnr_bicubic},
                              {"psnr_low", v.psnr_low}});
    }
    j["mean_psnr"] = mean_psnr;
    j["mean_ssim"] = mean_ssim;
    j["mean_psnr_bicubic"] = mean_psnr_bicubic;
    j["mean_psnr_low"] = mean_psnr_low;
    return j.dump(2);
}

MetricReport evaluate(const Model& model, const std::vector<ViewImage>& views, RenderOptions options) {
    if (views.empty()) throw std::invalid_argument("nothing to evaluate");
    MetricReport report;
    const int s = model.config.scale;
    for (size_t i = 0; i < views.size(); ++i) {
        const auto& v = views[i];
        const RenderResult r = render_view(model, v.camera, options);
        ViewMetrics m;
        m.name = "view_" + std::to_string(i);
        m.psnr = psnr(r.image, v.full);
        m.ssim = ssim(r.image, v.full);
        m.psnr_bicubic = psnr(bicubic_upsample(r.rgb_low, s), v.full);
        m.psnr_low = psnr(r.rgb_low, v.low);
        report.views.push_back(m);
        report.mean_psnr += m.psnr;
        report.mean_ssim += m.ssim;
        report.mean_psnr_bicubic += m.psnr_bicubic;
        report.mean_psnr_low += m.psnr_low;
    }
    const double n = static_cast<double>(views.size());
    report.mean_psnr /= n;
    report.mean_ssim /= n;
    report.mean_psnr_bicubic /= n;
    report.mean_psnr_low /= n;
    return report;
}

}  // namespace vxray
