// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vxray/container.hpp"
#include "vxray/detail_decoder.hpp"
#include "vxray/field_encoder.hpp"
#include "vxray/losses.hpp"
#include "vxray/rng.hpp"
#include "vxray/scene_io.hpp"

namespace vxray {

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
template <typename T>
class Adam {
  public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    struct Slot {
        std::string name;
        Tensor<T>* param = nullptr;
        std::vector<T> m, v;
    };

    explicit Adam(std::string name = "adam") : name_(std::move(name)) {}
    void add(const std::string& name, Tensor<T>* param);
    /// One update of every registered parameter from its current gradient.
    void step(double lr);
    int64_t steps() const { return t_; }
    std::vector<Slot>& slots() { return slots_; }
    const std::string& name() const { return name_; }

    /// Moments as <prefix>.<param>.m / .v and the counter as <prefix>.step.
    void save(Container& c) const;
    void load(const Container& c);

  private:
    std::string name_;
    std::vector<Slot> slots_;
    int64_t t_ = 0;
};

struct TrainConfig {
    std::string profile = "desk";
    uint64_t seed = 0;
    int scale = 2;              // s
    int patch_size = 32;        // N_p at full resolution
    int pretrain_patch = 16;    // low-resolution side of pretraining patches
    int n_samples = 128;
    int batch_size = 2;         // patches per joint iteration
    int64_t pretrain_iters = 2000;
    int64_t joint_iters = 5000;
    double lr_encoder = 1e-4;
    double lr_decoder = 2e-4;
    double lr_grid_pretrain = 0.1;
    double lr_mlp_pretrain = 1e-3;
    LossWeights weights;
    int64_t checkpoint_interval = 1000;
    int64_t log_interval = 100;
    std::array<int, 3> grid_dims{96, 96, 96};
    int decoder_blocks = 5;
    int decoder_channels = 64;
    bool joint_flow = true;     // false: gradients stop at F_en and M
    bool use_depth = true;      // false: modulators bypassed
    double grad_clip = 10.0;    // global-norm clip; 0 disables
    std::string feature_weights;  // optional conv-stack weights for the perceptual loss

    static TrainConfig desk();
    static TrainConfig paper();
    static TrainConfig from_profile(const std::string& name);

    std::string to_json() const;
    /// Fields not present keep the values of `profile` (default desk);
    /// unknown fields are rejected.
    static TrainConfig from_json(const std::string& text);
    static TrainConfig load(const std::filesystem::path& path);
    void validate() const;

    EncoderConfig encoder_config() const;
    DecoderConfig decoder_config() const;
};

class TrainingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Index drawn uniformly from [0, n).
size_t sample_patch_index(Rng& rng, size_t n);

/// Image rectangle as a [3,h,w] tensor.
Tensor<float> image_region(const Image& image, int x, int y, int w, int h);

/// Encoder pretraining followed by joint training, with checkpointable
/// state (weights, optimizer moments, PRNG, progress).
class Trainer {
  public:
    using Logger = std::function<void(const std::string&)>;

    Trainer(const TrainConfig& config, std::vector<ViewImage> views);
    /// Restores everything but the dataset from a checkpoint.
    Trainer(const Container& checkpoint, std::vector<ViewImage> views);
    // Optimizers hold pointers to the trainer's own parameters.
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    /// Runs until both phases are done or `max_iters` more iterations ran.
    /// `on_checkpoint` is called every checkpoint_interval iterations and at the end.
    void run(int64_t max_iters = -1, const std::function<void(const Trainer&)>& on_checkpoint = {});

    void pretrain_step();
    void joint_step();

    bool pretraining_done() const { return pretrain_done_ >= config_.pretrain_iters; }
    bool finished() const { return pretraining_done() && joint_done_ >= config_.joint_iters; }
    int64_t pretrain_done() const { return pretrain_done_; }
    int64_t joint_done() const { return joint_done_; }

    Container to_container() const;
    void save(const std::filesystem::path& path) const { to_container().save(path); }

    const TrainConfig& config() const { return config_; }
    const std::vector<double>& loss_trace() const { return trace_; }
    const std::vector<double>& discriminator_trace() const { return d_trace_; }
    const std::vector<PatchSpec>& patches() const { return patches_; }
    FieldEncoder<float>& encoder() { return encoder_; }
    const FieldEncoder<float>& encoder() const { return encoder_; }
    DetailDecoder<float>& decoder() { return decoder_; }
    const DetailDecoder<float>& decoder() const { return decoder_; }
    const std::optional<Discriminator<float>>& discriminator() const { return disc_; }
    bool perceptual_constructed() const { return static_cast<bool>(phi_); }
    Rng& rng() { return rng_; }
    void set_logger(Logger logger) { log_ = std::move(logger); }

  private:
    void init_components();
    void register_optimizers();
    void zero_all_grads();
    double clip_gradients(const std::vector<Adam<float>*>& groups);
    void record(double loss, const char* phase, int64_t iter, double lr);
    void log(const std::string& line) const;

    TrainConfig config_;
    std::vector<ViewImage> views_;
    std::vector<PatchSpec> patches_;
    Rng rng_;
    FieldEncoder<float> encoder_;
    DetailDecoder<float> decoder_;
    std::optional<Discriminator<float>> disc_;
    std::unique_ptr<FeatureExtractor<float>> phi_;
    Adam<float> opt_grid_{"adam.grid"}, opt_mlp_{"adam.mlp"}, opt_head_{"adam.rgb_head"};
    Adam<float> opt_decoder_{"adam.decoder"}, opt_disc_{"adam.discriminator"};
    int64_t pretrain_done_ = 0;
    int64_t joint_done_ = 0;
    std::vector<double> trace_, d_trace_;
    double last_grad_norm_ = 0.0;
    double phase_initial_loss_ = 0.0;
    int64_t diverged_for_ = 0;
    bool divergence_warned_ = false;
    Logger log_;
};

/// Encoder, decoder and config restored from a checkpoint for inference.
struct Model {
    TrainConfig config;
    FieldEncoder<float> encoder;
    DetailDecoder<float> decoder;

    static Model from_container(const Container& c);
    static Model load(const std::filesystem::path& path);
};

}  // namespace vxray
