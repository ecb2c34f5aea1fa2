// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/grad_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "vxray/detail_decoder.hpp"
#include "vxray/field_encoder.hpp"
#include "vxray/grad_check.hpp"
#include "vxray/losses.hpp"
#include "vxray/ops.hpp"

namespace vxray {

namespace {

using T = Tensor<double>;
using Inputs = std::vector<T>;

T rand_t(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    T t(std::move(shape));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

// Uniform in [lo, hi] at least `margin` away from zero, keeping clear of kinks.
T rand_nz(Rng& rng, Shape shape, double lo, double hi, double margin) {
    T t(std::move(shape));
    for (auto& v : t.data()) {
        do {
            v = rng.uniform(lo, hi);
        } while (std::abs(v) < margin);
    }
    return t;
}

// Random linear functional of y, so every output coordinate contributes.
T probe(const T& y, uint64_t seed) {
    Rng rng(seed);
    return sum(mul(y, rand_t(rng, y.shape())));
}

struct Case {
    const char* module;
    const char* name;
    std::function<double(Rng&, uint64_t)> run;
};

double check(const ScalarFn& f, Inputs in, int64_t max_coords = -1, uint64_t seed = 0) {
    GradCheckOptions opt;
    opt.step = 1e-6;
    opt.max_coords_per_input = max_coords;
    opt.seed = seed;
    return grad_check(f, std::move(in), opt);
}

template <typename Op>
Case unary(const char* name, Op op, std::function<T(Rng&)> make) {
    return {"tensor_autodiff", name, [op, make](Rng& rng, uint64_t s) {
                return check([&](const Inputs& in) { return probe(op(in[0]), s); }, {make(rng)});
            }};
}

template <typename Op>
Case binary(const char* name, Op op, std::function<T(Rng&)> ma, std::function<T(Rng&)> mb) {
    return {"tensor_autodiff", name, [op, ma, mb](Rng& rng, uint64_t s) {
                T a = ma(rng);
                T b = mb(rng);
                return check([&](const Inputs& in) { return probe(op(in[0], in[1]), s); }, {a, b});
            }};
}

EncoderConfig small_encoder_config() {
    EncoderConfig cfg;
    cfg.grid_dims = {5, 4, 6};
    cfg.grid_channels = 3;
    cfg.hidden = 8;
    cfg.n_samples = 8;
    return cfg;
}

FieldEncoder<double> random_encoder(Rng& rng) {
    auto enc = FieldEncoder<double>::create(small_encoder_config(), rng);
    for (auto& v : enc.density_grid.data()) v = rng.uniform(-1.0, 2.0);
    for (auto& v : enc.color_grid.data()) v = rng.uniform(-1.0, 1.0);
    for (auto* p : {&enc.b0, &enc.b1, &enc.b2, &enc.head_b})
        for (auto& v : p->data()) v = rng.uniform(-0.5, 0.5);
    return enc;
}

DetailDecoder<double> random_decoder(Rng& rng, int channels = 4) {
    DecoderConfig cfg;
    cfg.n_blocks = 1;
    cfg.channels = channels;
    cfg.scale = 2;
    auto dec = DetailDecoder<double>::create(cfg, rng);
    for (auto& [name, p] : dec.modulator_parameters())
        for (auto& v : p->data()) v += rng.uniform(-0.5, 0.5);
    return dec;
}

template <typename Model>
void assign(Model& m, const Inputs& in, size_t offset) {
    auto params = m.named_parameters();
    for (size_t i = 0; i < params.size(); ++i) *params[i].second = in[offset + i];
}

template <typename Model>
void append(Inputs& in, Model& m) {
    for (auto& [name, p] : m.named_parameters()) in.push_back(*p);
}

Camera random_camera(Rng& rng, int size) {
    const double az = rng.uniform(0, 2 * std::numbers::pi), el = rng.uniform(0.2, 0.9);
    const Vec3 eye{2.5 * std::cos(el) * std::cos(az), 2.5 * std::cos(el) * std::sin(az), 2.5 * std::sin(el)};
    return Camera::look_at(eye, {0, 0, 0}, {0, 0, 1}, size, size, 1.1 * size, 1.0, 4.0);
}

std::vector<Case> build_cases() {
    std::vector<Case> c;
    auto x = [](Rng& r) { return rand_t(r, {3, 4}, -2, 2); };
    auto nz = [](Rng& r) { return rand_nz(r, {3, 4}, -2, 2, 1e-2); };
    auto pos = [](Rng& r) { return rand_t(r, {3, 4}, 0.2, 3); };

    c.push_back(binary("add", [](T a, T b) { return add(a, b); }, x, x));
    c.push_back(binary("sub", [](T a, T b) { return sub(a, b); }, x, x));
    c.push_back(binary("mul", [](T a, T b) { return mul(a, b); }, x, x));
    c.push_back(binary("div", [](T a, T b) { return div(a, b); }, x,
                       [](Rng& r) { return rand_nz(r, {3, 4}, -2, 2, 0.5); }));
    c.push_back(unary("add_scalar", [](T a) { return add_scalar(a, 0.3); }, x));
    c.push_back(unary("mul_scalar", [](T a) { return mul_scalar(a, -1.7); }, x));
    c.push_back(unary("neg", [](T a) { return neg(a); }, x));
    c.push_back(unary("exp", [](T a) { return exp(a); }, x));
    c.push_back(unary("log", [](T a) { return log(a); }, pos));
    c.push_back(unary("abs", [](T a) { return abs(a); }, nz));
    c.push_back(unary("square", [](T a) { return square(a); }, x));
    c.push_back(unary("sigmoid", [](T a) { return sigmoid(a); }, x));
    c.push_back(unary("softplus", [](T a) { return softplus(a); }, x));
    c.push_back(unary("leaky_relu", [](T a) { return leaky_relu(a); }, nz));
    c.push_back(unary("clamp", [](T a) { return clamp(a, -1.0, 1.0); },
                      [](Rng& r) {
                          T t({3, 4});
                          for (auto& v : t.data()) {
                              do {
                                  v = r.uniform(-2, 2);
                              } while (std::abs(std::abs(v) - 1.0) < 1e-2);
                          }
                          return t;
                      }));
    c.push_back(unary("sum", [](T a) { return sum(a); }, x));
    c.push_back(unary("mean", [](T a) { return mean(a); }, x));
    c.push_back(binary("matmul", [](T a, T b) { return matmul(a, b); }, x,
                       [](Rng& r) { return rand_t(r, {4, 2}); }));
    c.push_back({"tensor_autodiff", "linear", [](Rng& rng, uint64_t s) {
                     return check([&](const Inputs& in) { return probe(linear(in[0], in[1], in[2]), s); },
                                  {rand_t(rng, {3, 4}), rand_t(rng, {5, 4}), rand_t(rng, {5})});
                 }});
    c.push_back(unary("reshape", [](T a) { return reshape(a, {2, 6}); }, x));
    c.push_back(unary("transpose2d", [](T a) { return transpose2d(a); }, x));
    c.push_back(binary("concat", [](T a, T b) { return concat<double>({a, b}, 1); }, x,
                       [](Rng& r) { return rand_t(r, {3, 2}); }));
    c.push_back(unary("narrow", [](T a) { return narrow(a, 1, 1, 2); }, x));
    c.push_back(unary("scatter_rows", [](T a) { return scatter_rows(a, {4, 0, 2}, 5); }, x));
    for (int stride : {1, 2}) {
        c.push_back({"tensor_autodiff", stride == 1 ? "conv2d" : "conv2d_stride2", [stride](Rng& rng, uint64_t s) {
                         return check(
                             [&](const Inputs& in) { return probe(conv2d(in[0], in[1], in[2], stride), s); },
                             {rand_t(rng, {2, 5, 4}), rand_t(rng, {3, 2, 3, 3}), rand_t(rng, {3})});
                     }});
    }
    c.push_back(unary("upsample_bilinear2x", [](T a) { return upsample_bilinear2x(a); },
                      [](Rng& r) { return rand_t(r, {2, 3, 2}); }));
    c.push_back({"tensor_autodiff", "trilinear_sample", [](Rng& rng, uint64_t s) {
                     const T pts = rand_t(rng, {6, 3}, 0.05, 2.95);
                     return check([&](const Inputs& in) { return probe(trilinear_sample(in[0], pts), s); },
                                  {rand_t(rng, {4, 4, 4, 2})});
                 }});
    c.push_back({"tensor_autodiff", "composite", [](Rng& rng, uint64_t s) {
                     const T delta = rand_t(rng, {2, 6}, 0.05, 0.5);
                     return check(
                         [&](const Inputs& in) {
                             auto [acc, trans] = composite(in[0], in[1], delta);
                             return add(probe(acc, s), probe(trans, s + 1));
                         },
                         {rand_t(rng, {2, 6}, 0.1, 4.0), rand_t(rng, {2, 6, 3})});
                 }});

    c.push_back({"field_encoder", "query_density", [](Rng& rng, uint64_t s) {
                     const auto enc0 = random_encoder(rng);
                     const T pts = rand_t(rng, {5, 3}, -0.95, 0.95);
                     return check(
                         [&](const Inputs& in) {
                             auto enc = enc0;
                             enc.density_grid = in[0];
                             return probe(query_density(enc, pts), s);
                         },
                         {enc0.density_grid});
                 }});
    c.push_back({"field_encoder", "query_color_features", [](Rng& rng, uint64_t s) {
                     const auto enc0 = random_encoder(rng);
                     const T pts = rand_t(rng, {3, 3}, -0.9, 0.9);
                     T dirs = rand_t(rng, {3, 3});
                     for (int r = 0; r < 3; ++r) {
                         double n = 0;
                         for (int a = 0; a < 3; ++a) n += dirs[r * 3 + a] * dirs[r * 3 + a];
                         for (int a = 0; a < 3; ++a) dirs.data()[r * 3 + a] /= std::sqrt(n);
                     }
                     Inputs in0;
                     auto enc_copy = enc0;
                     append(in0, enc_copy);
                     return check(
                         [&](const Inputs& in) {
                             auto enc = enc0;
                             assign(enc, in, 0);
                             return probe(query_color_features(enc, pts, dirs), s);
                         },
                         in0, 30, s);
                 }});
    c.push_back({"field_encoder", "rgb_head_logits", [](Rng& rng, uint64_t s) {
                     const auto enc0 = random_encoder(rng);
                     return check(
                         [&](const Inputs& in) {
                             auto enc = enc0;
                             enc.head_w = in[2];
                             enc.head_b = in[3];
                             return probe(rgb_head_logits(enc, in[0], in[1]), s);
                         },
                         {rand_t(rng, {4, 6}), rand_t(rng, {4}, 0, 1), enc0.head_w, enc0.head_b});
                 }});
    c.push_back({"field_encoder", "render_mse", [](Rng& rng, uint64_t s) {
                     const auto enc0 = random_encoder(rng);
                     const Camera cam = random_camera(rng, 8);
                     PatchSpec patch;
                     patch.low_side = 2;
                     patch.low_x = static_cast<int>(rng.below(3));
                     patch.low_y = static_cast<int>(rng.below(3));
                     const T target = rand_t(rng, {3, 2, 2}, 0, 1);
                     Inputs in0;
                     auto enc_copy = enc0;
                     append(in0, enc_copy);
                     return check(
                         [&](const Inputs& in) {
                             auto enc = enc0;
                             assign(enc, in, 0);
                             return mse_loss(render_patch_lowres(enc, cam, patch, 2).rgb_low, target);
                         },
                         in0, 40, s);
                 }});

    c.push_back({"detail_decoder", "normalize_depth", [](Rng& rng, uint64_t s) {
                     return check([&](const Inputs& in) { return probe(normalize_depth(in[0], 1.0, 4.0), s); },
                                  {rand_t(rng, {4, 4}, 1.1, 3.9)});
                 }});
    c.push_back({"detail_decoder", "modulate", [](Rng& rng, uint64_t s) {
                     return check([&](const Inputs& in) { return probe(modulate(in[0], in[1], in[2], in[3]), s); },
                                  {rand_t(rng, {3, 4, 5}), rand_t(rng, {4, 5}, 0, 1), rand_t(rng, {6, 1, 1, 1}),
                                   rand_t(rng, {6})});
                 }});
    c.push_back({"detail_decoder", "decode", [](Rng& rng, uint64_t s) {
                     const auto dec0 = random_decoder(rng);
                     const T target = rand_t(rng, {3, 12, 12}, 0, 1);
                     Inputs in0{rand_t(rng, {6, 6, 6}), rand_t(rng, {6, 6}, 0.1, 0.9)};
                     auto dec_copy = dec0;
                     append(in0, dec_copy);
                     return check(
                         [&](const Inputs& in) {
                             auto dec = dec0;
                             assign(dec, in, 2);
                             return mean(abs(sub(decode(dec, in[0], in[1]), target)));
                         },
                         in0, 20, s);
                 }});

    c.push_back({"losses", "l1_loss", [](Rng& rng, uint64_t) {
                     const T gt = rand_t(rng, {3, 4, 4}, 0, 1);
                     T pred = rand_t(rng, {3, 4, 4}, 0, 1);
                     for (size_t i = 0; i < pred.data().size(); ++i)
                         if (std::abs(pred.data()[i] - gt.data()[i]) < 1e-2) pred.data()[i] += 0.05;
                     return check([&](const Inputs& in) { return l1_loss(in[0], gt); }, {pred});
                 }});
    c.push_back({"losses", "mse_loss", [](Rng& rng, uint64_t) {
                     const T gt = rand_t(rng, {3, 4, 4}, 0, 1);
                     return check([&](const Inputs& in) { return mse_loss(in[0], gt); }, {rand_t(rng, {3, 4, 4})});
                 }});
    c.push_back({"losses", "perceptual_loss", [](Rng& rng, uint64_t s) {
                     static const FilterBankExtractor<double> phi;
                     const T gt = rand_t(rng, {3, 8, 8}, 0, 1);
                     return check([&](const Inputs& in) { return perceptual_loss(phi, in[0], gt); },
                                  {rand_t(rng, {3, 8, 8}, 0, 1)}, 40, s);
                 }});
    c.push_back({"losses", "generator_loss", [](Rng& rng, uint64_t s) {
                     const auto d0 = Discriminator<double>::create(16, rng);
                     Inputs in0{rand_t(rng, {3, 16, 16}, 0, 1)};
                     auto d_copy = d0;
                     append(in0, d_copy);
                     return check(
                         [&](const Inputs& in) {
                             auto d = d0;
                             assign(d, in, 1);
                             return generator_loss(d, in[0]);
                         },
                         in0, 16, s);
                 }});
    c.push_back({"losses", "discriminator_loss", [](Rng& rng, uint64_t s) {
                     const auto d0 = Discriminator<double>::create(16, rng);
                     const T real = rand_t(rng, {3, 16, 16}, 0, 1), fake = rand_t(rng, {3, 16, 16}, 0, 1);
                     Inputs in0;
                     auto d_copy = d0;
                     append(in0, d_copy);
                     return check(
                         [&](const Inputs& in) {
                             auto d = d0;
                             assign(d, in, 0);
                             return discriminator_loss(d, real, fake);
                         },
                         in0, 16, s);
                 }});
    c.push_back({"losses", "total_loss", [](Rng& rng, uint64_t) {
                     LossWeights w{rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2)};
                     return check(
                         [&](const Inputs& in) {
                             LossComponents<double> parts{square(in[0]), exp(in[1]), in[2], sigmoid(in[3])};
                             return total_loss(w, parts);
                         },
                         {rand_t(rng, {1}), rand_t(rng, {1}), rand_t(rng, {1}), rand_t(rng, {1})});
                 }});

    c.push_back({"end_to_end", "encoder_decoder_all_losses", [](Rng& rng, uint64_t s) {
                     const auto enc0 = random_encoder(rng);
                     const auto dec0 = random_decoder(rng, 3);
                     const auto d = Discriminator<double>::create(16, rng);
                     static const FilterBankExtractor<double> phi;
                     const Camera cam = random_camera(rng, 16);
                     PatchSpec patch;
                     patch.low_side = 8;
                     const T gt = rand_t(rng, {3, 16, 16}, 0, 1);
                     const T gt_low = rand_t(rng, {3, 8, 8}, 0, 1);
                     const LossWeights w{1.0, 0.02, 0.5, 1.0};
                     Inputs in0;
                     auto enc_copy = enc0;
                     auto dec_copy = dec0;
                     append(in0, enc_copy);
                     const size_t n_enc = in0.size();
                     append(in0, dec_copy);
                     return check(
                         [&](const Inputs& in) {
                             auto enc = enc0;
                             auto dec = dec0;
                             assign(enc, in, 0);
                             assign(dec, in, n_enc);
                             const auto out = render_patch_lowres(enc, cam, patch, 2);
                             const T pred = decode(dec, out.feature_map,
                                                   normalize_depth(out.depth_map, cam.near, cam.far));
                             LossComponents<double> parts{l1_loss(pred, gt), generator_loss(d, pred),
                                                          perceptual_loss(phi, pred, gt),
                                                          mse_loss(out.rgb_low, gt_low)};
                             return total_loss(w, parts);
                         },
                         in0, 6, s);
                 }});
    return c;
}

}  // namespace

std::vector<std::string> grad_suite_modules() {
    return {"tensor_autodiff", "field_encoder", "detail_decoder", "losses", "end_to_end"};
}

std::vector<GradSuiteResult> run_grad_suite(const std::string& module, int instances, uint64_t seed) {
    const auto modules = grad_suite_modules();
    if (module != "all" && std::find(modules.begin(), modules.end(), module) == modules.end()) {
        throw std::invalid_argument("unknown gradcheck module '" + module + "'");
    }
    if (instances < 1) throw std::invalid_argument("instances must be positive");
    std::vector<GradSuiteResult> out;
    uint64_t case_index = 0;
    for (const Case& c : build_cases()) {
        ++case_index;
        if (module != "all" && module != c.module) continue;
        GradSuiteResult r{c.module, c.name, instances, 0.0};
        for (int i = 0; i < instances; ++i) {
            const uint64_t s = seed * 1000003 + case_index * 1009 + static_cast<uint64_t>(i);
            Rng rng(s);
            r.max_error = std::max(r.max_error, c.run(rng, s));
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace vxray
