// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include "vxray/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "vxray/ops.hpp"

namespace vxray {

using json = nlohmann::json;

template <typename T>
void Adam<T>::add(const std::string& name, Tensor<T>* param) {
    Slot s;
    s.name = name;
    s.param = param;
    s.m.assign(param->numel(), T(0));
    s.v.assign(param->numel(), T(0));
    slots_.push_back(std::move(s));
}

template <typename T>
void Adam<T>::step(double lr) {
    ++t_;
    const T b1 = static_cast<T>(kBeta1), b2 = static_cast<T>(kBeta2);
    const T bc1 = static_cast<T>(1.0 - std::pow(kBeta1, static_cast<double>(t_)));
    const T bc2 = static_cast<T>(1.0 - std::pow(kBeta2, static_cast<double>(t_)));
    const T step = static_cast<T>(lr), eps = static_cast<T>(kEps);
    for (auto& s : slots_) {
        auto p = s.param->data();
        const bool has = s.param->has_grad();
        std::span<const T> g = has ? std::span<const T>(s.param->grad()) : std::span<const T>();
        T* m = s.m.data();
        T* v = s.v.data();
        const size_t n = p.size();
        for (size_t i = 0; i < n; ++i) {
            const T gi = has ? g[i] : T(0);
            m[i] = b1 * m[i] + (T(1) - b1) * gi;
            v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
            p[i] -= step * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
}

template <typename T>
void Adam<T>::save(Container& c) const {
    for (const auto& s : slots_) {
        Tensor<float> m({static_cast<int64_t>(s.m.size())}), v({static_cast<int64_t>(s.v.size())});
        std::copy(s.m.begin(), s.m.end(), m.data().begin());
        std::copy(s.v.begin(), s.v.end(), v.data().begin());
        c.put(name_ + "." + s.name + ".m", m);
        c.put(name_ + "." + s.name + ".v", v);
    }
    c.put_u64(name_ + ".step", {static_cast<uint64_t>(t_)});
}

template <typename T>
void Adam<T>::load(const Container& c) {
    for (auto& s : slots_) {
        const Shape shape{static_cast<int64_t>(s.m.size())};
        const Tensor<float> m = c.tensor(name_ + "." + s.name + ".m", &shape);
        const Tensor<float> v = c.tensor(name_ + "." + s.name + ".v", &shape);
        std::copy(m.data().begin(), m.data().end(), s.m.begin());
        std::copy(v.data().begin(), v.data().end(), s.v.begin());
    }
    const auto& step = c.u64(name_ + ".step");
    if (step.size() != 1) throw CheckpointError("section '" + name_ + ".step' must hold one value");
    t_ = static_cast<int64_t>(step[0]);
}

template class Adam<float>;
template class Adam<double>;

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
    TrainConfig c;
    c.profile = "paper";
    c.scale = 4;
    c.patch_size = 64;
    c.batch_size = 1;
    c.pretrain_iters = 30000;
    c.joint_iters = 200000;
    c.lr_encoder = 1e-4;
    c.lr_decoder = 2e-4;
    c.checkpoint_interval = 5000;
    return c;
}

TrainConfig TrainConfig::from_profile(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "paper") return paper();
    throw std::invalid_argument("unknown config profile '" + name + "' (expected desk or paper)");
}

std::string TrainConfig::to_json() const {
    json j;
    j["profile"] = profile;
    j["seed"] = seed;
    j["scale"] = scale;
    j["patch_size"] = patch_size;
    j["pretrain_patch"] = pretrain_patch;
    j["n_samples"] = n_samples;
    j["batch_size"] = batch_size;
    j["pretrain_iters"] = pretrain_iters;
    j["joint_iters"] = joint_iters;
    j["lr_encoder"] = lr_encoder;
    j["lr_decoder"] = lr_decoder;
    j["lr_grid_pretrain"] = lr_grid_pretrain;
    j["lr_mlp_pretrain"] = lr_mlp_pretrain;
    j["weights"] = {{"l1", weights.l1},
                    {"adversarial", weights.adversarial},
                    {"perceptual", weights.perceptual},
                    {"mse_low", weights.mse_low}};
    j["checkpoint_interval"] = checkpoint_interval;
    j["log_interval"] = log_interval;
    j["grid_dims"] = grid_dims;
    j["decoder_blocks"] = decoder_blocks;
    j["decoder_channels"] = decoder_channels;
    j["joint_flow"] = joint_flow;
    j["use_depth"] = use_depth;
    j["grad_clip"] = grad_clip;
    j["feature_weights"] = feature_weights;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    TrainConfig c = from_profile(j.value("profile", std::string("desk")));
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "profile") continue;
            else if (key == "seed") c.seed = v.get<uint64_t>();
            else if (key == "scale") c.scale = v.get<int>();
            else if (key == "patch_size") c.patch_size = v.get<int>();
            else if (key == "pretrain_patch") c.pretrain_patch = v.get<int>();
            else if (key == "n_samples") c.n_samples = v.get<int>();
            else if (key == "batch_size") c.batch_size = v.get<int>();
            else if (key == "pretrain_iters") c.pretrain_iters = v.get<int64_t>();
            else if (key == "joint_iters") c.joint_iters = v.get<int64_t>();
            else if (key == "lr_encoder") c.lr_encoder = v.get<double>();
            else if (key == "lr_decoder") c.lr_decoder = v.get<double>();
            else if (key == "lr_grid_pretrain") c.lr_grid_pretrain = v.get<double>();
            else if (key == "lr_mlp_pretrain") c.lr_mlp_pretrain = v.get<double>();
            else if (key == "weights") {
                for (const auto& [wk, wv] : v.items()) {
                    if (wk == "l1") c.weights.l1 = wv.get<double>();
                    else if (wk == "adversarial") c.weights.adversarial = wv.get<double>();
                    else if (wk == "perceptual") c.weights.perceptual = wv.get<double>();
                    else if (wk == "mse_low") c.weights.mse_low = wv.get<double>();
                    else throw std::invalid_argument("unknown loss weight '" + wk + "'");
                }
            } else if (key == "checkpoint_interval") c.checkpoint_interval = v.get<int64_t>();
            else if (key == "log_interval") c.log_interval = v.get<int64_t>();
            else if (key == "grid_dims") c.grid_dims = v.get<std::array<int, 3>>();
            else if (key == "decoder_blocks") c.decoder_blocks = v.get<int>();
            else if (key == "decoder_channels") c.decoder_channels = v.get<int>();
            else if (key == "joint_flow") c.joint_flow = v.get<bool>();
            else if (key == "use_depth") c.use_depth = v.get<bool>();
            else if (key == "grad_clip") c.grad_clip = v.get<double>();
            else if (key == "feature_weights") c.feature_weights = v.get<std::string>();
            else throw std::invalid_argument("unknown config field '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

void TrainConfig::validate() const {
    weights.validate();
    decoder_config().validate();
    if (patch_size % scale != 0) throw std::invalid_argument("patch_size must be divisible by scale");
    if (weights.adversarial > 0 && patch_size < 16) {
        throw std::invalid_argument("adversarial training needs patch_size >= 16");
    }
    if (pretrain_patch < 1) throw std::invalid_argument("pretrain_patch must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    if (n_samples < 2) throw std::invalid_argument("n_samples must be at least 2");
    if (pretrain_iters < 0 || joint_iters < 0) throw std::invalid_argument("iteration counts must be non-negative");
    for (int d : grid_dims)
        if (d < 2) throw std::invalid_argument("grid dims must be at least 2");
    for (double lr : {lr_encoder, lr_decoder, lr_grid_pretrain, lr_mlp_pretrain}) {
        if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rates must be finite and non-negative");
    }
    if (!(grad_clip >= 0.0)) throw std::invalid_argument("grad_clip must be non-negative");
    if (checkpoint_interval < 0 || log_interval < 0) throw std::invalid_argument("intervals must be non-negative");
}

EncoderConfig TrainConfig::encoder_config() const {
    EncoderConfig e;
    e.grid_dims = grid_dims;
    e.n_samples = n_samples;
    return e;
}

DecoderConfig TrainConfig::decoder_config() const {
    DecoderConfig d;
    d.n_blocks = decoder_blocks;
    d.channels = decoder_channels;
    d.scale = scale;
    d.feature_dim = encoder_config().feature_dim;
    return d;
}

size_t sample_patch_index(Rng& rng, size_t n) {
    if (n == 0) throw TrainingError("empty patch set");
    return static_cast<size_t>(rng.below(n));
}

Tensor<float> image_region(const Image& image, int x, int y, int w, int h) {
    if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > image.width || y + h > image.height) {
        throw std::out_of_range("image region out of bounds");
    }
    Tensor<float> out({3, h, w});
    auto d = out.data();
    for (int c = 0; c < 3; ++c)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) d[(static_cast<size_t>(c) * h + yy) * w + xx] = image.at(x + xx, y + yy, c);
    return out;
}

namespace {

constexpr int64_t kDivergenceWindow = 500;
constexpr double kDivergenceFactor = 10.0;

template <typename Params>
void load_params(const Container& c, Params params) {
    for (auto& [name, p] : params) {
        const Shape shape = p->shape();
        const Tensor<float> t = c.tensor(name, &shape);
        std::copy(t.data().begin(), t.data().end(), p->data().begin());
    }
}

std::vector<double> to_doubles(const std::vector<uint64_t>& bits) {
    std::vector<double> out(bits.size());
    std::memcpy(out.data(), bits.data(), bits.size() * sizeof(double));
    return out;
}

std::vector<uint64_t> to_bits(const std::vector<double>& values) {
    std::vector<uint64_t> out(values.size());
    std::memcpy(out.data(), values.data(), values.size() * sizeof(double));
    return out;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, std::vector<ViewImage> views)
    : config_(config), views_(std::move(views)), rng_(config.seed) {
    config_.validate();
    init_components();
}

Trainer::Trainer(const Container& checkpoint, std::vector<ViewImage> views) : views_(std::move(views)) {
    config_ = TrainConfig::from_json(checkpoint.bytes("config"));
    rng_ = Rng(config_.seed);
    init_components();
    load_params(checkpoint, encoder_.named_parameters());
    load_params(checkpoint, decoder_.named_parameters());
    if (disc_) load_params(checkpoint, disc_->named_parameters());
    for (Adam<float>* opt : {&opt_grid_, &opt_mlp_, &opt_head_, &opt_decoder_}) opt->load(checkpoint);
    if (disc_) opt_disc_.load(checkpoint);
    const auto& state = checkpoint.u64("prng_state");
    if (state.size() != 4) throw CheckpointError("section 'prng_state' must hold four words");
    rng_.set_state({state[0], state[1], state[2], state[3]});
    const auto& progress = checkpoint.u64("progress");
    if (progress.size() != 5) throw CheckpointError("section 'progress' must hold five words");
    pretrain_done_ = static_cast<int64_t>(progress[0]);
    joint_done_ = static_cast<int64_t>(progress[1]);
    diverged_for_ = static_cast<int64_t>(progress[2]);
    divergence_warned_ = progress[3] != 0;
    std::memcpy(&phase_initial_loss_, &progress[4], sizeof(double));
    trace_ = to_doubles(checkpoint.u64("loss_trace"));
    d_trace_ = to_doubles(checkpoint.u64("discriminator_trace"));
}

void Trainer::init_components() {
    if (views_.empty()) throw TrainingError("training needs at least one view");
    for (const auto& v : views_) {
        if (v.low.width * config_.scale != v.full.width || v.low.height * config_.scale != v.full.height) {
            throw TrainingError("dataset was loaded with a different scale than the config's " +
                                std::to_string(config_.scale));
        }
    }
    if (config_.joint_iters > 0) patches_ = build_patch_set(views_, config_.patch_size, config_.scale);
    encoder_ = FieldEncoder<float>::create(config_.encoder_config(), rng_);
    decoder_ = DetailDecoder<float>::create(config_.decoder_config(), rng_);
    if (config_.weights.adversarial > 0) disc_ = Discriminator<float>::create(config_.patch_size, rng_);
    if (config_.weights.perceptual > 0) {
        if (config_.feature_weights.empty()) {
            phi_ = std::make_unique<FilterBankExtractor<float>>();
        } else {
            phi_ = std::make_unique<ConvStackExtractor<float>>(ConvStackExtractor<float>::load(config_.feature_weights));
        }
    }
    register_optimizers();
}

void Trainer::register_optimizers() {
    for (auto& [name, p] : encoder_.named_parameters()) {
        if (name == "density_grid" || name == "color_grid") opt_grid_.add(name, p);
        else if (name.rfind("mlp.", 0) == 0) opt_mlp_.add(name, p);
        else opt_head_.add(name, p);
    }
    for (auto& [name, p] : decoder_.named_parameters()) opt_decoder_.add(name, p);
    if (disc_)
        for (auto& [name, p] : disc_->named_parameters()) opt_disc_.add(name, p);
}

void Trainer::zero_all_grads() {
    for (Adam<float>* opt : {&opt_grid_, &opt_mlp_, &opt_head_, &opt_decoder_, &opt_disc_})
        for (auto& s : opt->slots())
            if (s.param->has_grad()) s.param->zero_grad();
}

double Trainer::clip_gradients(const std::vector<Adam<float>*>& groups) {
    double sq = 0.0;
    for (Adam<float>* opt : groups)
        for (auto& s : opt->slots())
            if (s.param->has_grad())
                for (float g : std::as_const(*s.param).grad()) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    last_grad_norm_ = norm;
    if (!std::isfinite(norm)) throw TensorError("non-finite gradient norm");
    if (config_.grad_clip > 0 && norm > config_.grad_clip) {
        const float f = static_cast<float>(config_.grad_clip / norm);
        for (Adam<float>* opt : groups)
            for (auto& s : opt->slots())
                if (s.param->has_grad())
                    for (float& g : s.param->grad()) g *= f;
    }
    return norm;
}

void Trainer::record(double loss, const char* phase, int64_t iter, double lr) {
    if (!std::isfinite(loss)) {
        throw TrainingError(std::string(phase) + " iteration " + std::to_string(iter) + ": loss is not finite (lr " +
                            fmt("%g", lr) + ", grad norm " + fmt("%g", last_grad_norm_) + ")");
    }
    trace_.push_back(loss);
    if (iter == 0) {
        phase_initial_loss_ = loss;
        diverged_for_ = 0;
        divergence_warned_ = false;
    } else if (loss > kDivergenceFactor * phase_initial_loss_) {
        if (++diverged_for_ >= kDivergenceWindow && !divergence_warned_) {
            divergence_warned_ = true;
            log(std::string("warning: ") + phase + " loss has exceeded 10x its initial value for " +
                std::to_string(kDivergenceWindow) + " iterations");
        }
    } else {
        diverged_for_ = 0;
    }
    if (config_.log_interval > 0 && (iter + 1) % config_.log_interval == 0) {
        log(std::string(phase) + " iter " + std::to_string(iter + 1) + " loss " + fmt("%.6f", loss) + " grad_norm " +
            fmt("%.4g", last_grad_norm_));
    }
}

void Trainer::log(const std::string& line) const {
    if (log_) log_(line);
    else std::cerr << line << '\n';
}

void Trainer::pretrain_step() {
    const int64_t iter = pretrain_done_;
    try {
        const ViewImage& view = views_[sample_patch_index(rng_, views_.size())];
        const int w = std::min(config_.pretrain_patch, view.low.width);
        const int h = std::min(config_.pretrain_patch, view.low.height);
        const int x0 = static_cast<int>(rng_.below(view.low.width - w + 1));
        const int y0 = static_cast<int>(rng_.below(view.low.height - h + 1));
        zero_all_grads();
        Tape<float> tape;
        double loss_value;
        {
            TapeScope<float> scope(tape);
            const auto out = render_region_lowres(encoder_, view.camera, x0, y0, w, h, config_.scale, &rng_);
            const Tensor<float> loss = mse_loss(out.rgb_low, image_region(view.low, x0, y0, w, h));
            loss_value = loss.item();
            tape.backward(loss);
        }
        clip_gradients({&opt_grid_, &opt_mlp_, &opt_head_});
        opt_grid_.step(config_.lr_grid_pretrain);
        opt_mlp_.step(config_.lr_mlp_pretrain);
        opt_head_.step(config_.lr_mlp_pretrain);
        record(loss_value, "pretrain", iter, config_.lr_mlp_pretrain);
    } catch (const TensorError& e) {
        throw TrainingError("pretrain iteration " + std::to_string(iter) + ": " + e.what() + " (lr " +
                            fmt("%g", config_.lr_mlp_pretrain) + ", grad norm " + fmt("%g", last_grad_norm_) + ")");
    }
    ++pretrain_done_;
}

void Trainer::joint_step() {
    const int64_t iter = joint_done_;
    const LossWeights& lw = config_.weights;
    const bool decoder_active = lw.l1 > 0 || lw.adversarial > 0 || lw.perceptual > 0;
    const bool encoder_active = lw.mse_low > 0 || (decoder_active && config_.joint_flow);
    try {
        zero_all_grads();
        Tape<float> tape;
        double loss_value;
        std::vector<Tensor<float>> reals, fakes;
        {
            TapeScope<float> scope(tape);
            Tensor<float> loss;
            for (int b = 0; b < config_.batch_size; ++b) {
                const PatchSpec& patch = patches_[sample_patch_index(rng_, patches_.size())];
                const ViewImage& view = views_[patch.view];
                const Tensor<float> gt =
                    image_region(view.full, patch.full_x, patch.full_y, patch.full_side, patch.full_side);
                const auto out = render_patch_lowres(encoder_, view.camera, patch, config_.scale, &rng_);
                LossComponents<float> parts;
                if (lw.mse_low > 0) {
                    parts.mse_low = mse_loss(out.rgb_low, image_region(view.low, patch.low_x, patch.low_y,
                                                                       patch.low_side, patch.low_side));
                }
                if (decoder_active) {
                    Tensor<float> f = out.feature_map, m = out.depth_map;
                    if (!config_.joint_flow) {
                        f = f.detach();
                        m = m.detach();
                    }
                    const Tensor<float> depth = normalize_depth(m, view.camera.near, view.camera.far);
                    const Tensor<float> pred = decode(decoder_, f, depth, config_.use_depth);
                    if (lw.l1 > 0) parts.l1 = l1_loss(pred, gt);
                    if (lw.perceptual > 0) parts.perceptual = perceptual_loss(*phi_, pred, gt);
                    if (lw.adversarial > 0) {
                        parts.adversarial = generator_loss(*disc_, pred);
                        reals.push_back(gt);
                        fakes.push_back(pred.detach());
                    }
                }
                const Tensor<float> total = total_loss(lw, parts);
                loss = b == 0 ? total : add(loss, total);
            }
            if (config_.batch_size > 1) loss = mul_scalar(loss, 1.0f / static_cast<float>(config_.batch_size));
            loss_value = loss.item();
            if (encoder_active || decoder_active) tape.backward(loss);
        }
        std::vector<Adam<float>*> groups;
        if (encoder_active) groups.insert(groups.end(), {&opt_grid_, &opt_mlp_, &opt_head_});
        if (decoder_active) groups.push_back(&opt_decoder_);
        clip_gradients(groups);
        for (Adam<float>* opt : groups) opt->step(opt == &opt_decoder_ ? config_.lr_decoder : config_.lr_encoder);
        if (disc_) {
            for (auto& s : opt_disc_.slots())
                if (s.param->has_grad()) s.param->zero_grad();
            Tape<float> dtape;
            TapeScope<float> scope(dtape);
            Tensor<float> loss_d = discriminator_loss(*disc_, reals[0], fakes[0]);
            for (size_t b = 1; b < reals.size(); ++b) loss_d = add(loss_d, discriminator_loss(*disc_, reals[b], fakes[b]));
            if (reals.size() > 1) loss_d = mul_scalar(loss_d, 1.0f / static_cast<float>(reals.size()));
            d_trace_.push_back(loss_d.item());
            dtape.backward(loss_d);
            opt_disc_.step(config_.lr_decoder);
        }
        record(loss_value, "joint", iter, config_.lr_encoder);
    } catch (const TensorError& e) {
        throw TrainingError("joint iteration " + std::to_string(iter) + ": " + e.what() + " (lr " +
                            fmt("%g", config_.lr_encoder) + "/" + fmt("%g", config_.lr_decoder) + ", grad norm " +
                            fmt("%g", last_grad_norm_) + ")");
    }
    ++joint_done_;
}

void Trainer::run(int64_t max_iters, const std::function<void(const Trainer&)>& on_checkpoint) {
    int64_t ran = 0;
    bool saved_last = false;
    while (!finished() && (max_iters < 0 || ran < max_iters)) {
        if (!pretraining_done()) pretrain_step();
        else joint_step();
        ++ran;
        saved_last = false;
        const int64_t total = pretrain_done_ + joint_done_;
        if (on_checkpoint && config_.checkpoint_interval > 0 && total % config_.checkpoint_interval == 0) {
            on_checkpoint(*this);
            saved_last = true;
        }
    }
    if (on_checkpoint && !saved_last) on_checkpoint(*this);
}

Container Trainer::to_container() const {
    Container c;
    c.put_bytes("config", config_.to_json());
    for (const auto& [name, p] : encoder_.named_parameters()) c.put(name, *p);
    for (const auto& [name, p] : decoder_.named_parameters()) c.put(name, *p);
    if (disc_)
        for (auto& [name, p] : const_cast<Discriminator<float>&>(*disc_).named_parameters()) c.put(name, *p);
    for (const Adam<float>* opt : {&opt_grid_, &opt_mlp_, &opt_head_, &opt_decoder_}) opt->save(c);
    if (disc_) opt_disc_.save(c);
    const auto& s = rng_.state();
    c.put_u64("prng_state", {s[0], s[1], s[2], s[3]});
    uint64_t initial_bits;
    std::memcpy(&initial_bits, &phase_initial_loss_, sizeof(double));
    c.put_u64("progress", {static_cast<uint64_t>(pretrain_done_), static_cast<uint64_t>(joint_done_),
                           static_cast<uint64_t>(diverged_for_), divergence_warned_ ? 1u : 0u, initial_bits});
    c.put_u64("loss_trace", to_bits(trace_));
    c.put_u64("discriminator_trace", to_bits(d_trace_));
    return c;
}

Model Model::from_container(const Container& c) {
    Model m;
    m.config = TrainConfig::from_json(c.bytes("config"));
    Rng rng(m.config.seed);
    m.encoder = FieldEncoder<float>::create(m.config.encoder_config(), rng);
    m.decoder = DetailDecoder<float>::create(m.config.decoder_config(), rng);
    load_params(c, m.encoder.named_parameters());
    load_params(c, m.decoder.named_parameters());
    for (auto& [name, p] : m.encoder.named_parameters()) p->set_requires_grad(false);
    for (auto& [name, p] : m.decoder.named_parameters()) p->set_requires_grad(false);
    return m;
}

Model Model::load(const std::filesystem::path& path) { return from_container(Container::load(path)); }

}  // namespace vxray
