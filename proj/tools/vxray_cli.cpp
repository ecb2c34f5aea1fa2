// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "vxray/grad_suite.hpp"
#include "vxray/metrics_render.hpp"
#include "vxray/toy_scene.hpp"
#include "vxray/trainer.hpp"

namespace fs = std::filesystem;
using namespace vxray;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr double kGradTolerance = 1e-4;

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::string frame_name(size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "r_%03zu.png", i);
    return buf;
}

struct GenSceneArgs {
    std::string out;
    int views = 20;
    int res = 128;
    uint64_t seed = 0;
    int test_views = 5;
};

int gen_scene(const GenSceneArgs& a) {
    ToySceneOptions opt;
    opt.test_views = a.test_views;
    generate_toy_scene(a.out, a.views, a.res, a.seed, AnalyticField::standard(), opt);
    std::cerr << "wrote " << a.views << " training and " << a.test_views << " test views at " << a.res << "x" << a.res
              << " to " << a.out << '\n';
    return 0;
}

struct TrainArgs {
    std::string config, profile, data, out, resume;
    int64_t max_iters = -1;
};

int train(const TrainArgs& a) {
    if (!a.resume.empty() && (!a.config.empty() || !a.profile.empty())) {
        throw UsageError("--resume restores the checkpoint's config; do not combine it with --config or --profile");
    }
    if (!a.config.empty() && !a.profile.empty()) throw UsageError("--config and --profile are mutually exclusive");
    std::optional<Container> resume;
    TrainConfig config;
    if (!a.resume.empty()) {
        resume = Container::load(a.resume);
        config = TrainConfig::from_json(resume->bytes("config"));
    } else if (!a.config.empty()) {
        config = TrainConfig::load(a.config);
    } else {
        config = TrainConfig::from_profile(a.profile.empty() ? "desk" : a.profile);
    }
    auto views = load_dataset(a.data, config.scale, "train");
    std::cerr << "loaded " << views.size() << " views from " << a.data << " (profile " << config.profile << ")\n";
    Trainer trainer = resume ? Trainer(*resume, std::move(views)) : Trainer(config, std::move(views));
    trainer.run(a.max_iters, [&](const Trainer& t) {
        t.save(a.out);
        std::cerr << "checkpoint " << a.out << " at iteration " << t.pretrain_done() + t.joint_done() << '\n';
    });
    return 0;
}

struct RenderArgs {
    std::string ckpt, manifest, out;
    int pose = -1;
    int sweep = 36;
    int res = 128;
    double elevation = 30.0;
    int chunk = 4096;
};

int render(const RenderArgs& a, int threads) {
    if (a.pose < 0 && a.manifest.empty()) throw UsageError("render needs --pose INDEX or --manifest FILE");
    const Model model = Model::load(a.ckpt);
    std::vector<Camera> cams = a.manifest.empty() ? turntable_cameras(a.sweep, a.res, a.elevation)
                                                  : load_cameras(a.manifest);
    std::vector<size_t> indices;
    if (a.pose >= 0) {
        if (static_cast<size_t>(a.pose) >= cams.size()) {
            throw UsageError("--pose " + std::to_string(a.pose) + " is out of range (" + std::to_string(cams.size()) +
                             " poses)");
        }
        indices.push_back(static_cast<size_t>(a.pose));
    } else {
        for (size_t i = 0; i < cams.size(); ++i) indices.push_back(i);
    }
    fs::create_directories(a.out);
    RenderOptions opt;
    opt.chunk = a.chunk;
    opt.threads = threads;
    for (size_t i : indices) {
        const RenderResult r = render_view(model, cams[i], opt);
        const fs::path path = fs::path(a.out) / frame_name(i);
        write_png(path, r.image);
        std::cout << "{\"frame\": " << i << ", \"path\": \"" << path.string() << "\", \"seconds\": " << r.seconds
                  << "}\n";
    }
    return 0;
}

struct EvalArgs {
    std::string ckpt, data, report, split = "test";
    int chunk = 4096;
};

int eval(const EvalArgs& a, int threads) {
    const Model model = Model::load(a.ckpt);
    const auto views = load_dataset(a.data, model.config.scale, a.split);
    RenderOptions opt;
    opt.chunk = a.chunk;
    opt.threads = threads;
    const MetricReport report = evaluate(model, views, opt);
    const std::string json = report.to_json();
    if (a.report.empty()) {
        std::cout << json << '\n';
    } else {
        std::ofstream out(a.report);
        if (!out) throw std::runtime_error("cannot write " + a.report);
        out << json << '\n';
    }
    std::cerr << "mean PSNR " << report.mean_psnr << " dB, SSIM " << report.mean_ssim << ", bicubic PSNR "
              << report.mean_psnr_bicubic << " dB over " << views.size() << " views\n";
    return 0;
}

int gradcheck(const std::string& module, int instances) {
    bool ok = true;
    for (const auto& r : run_grad_suite(module, instances)) {
        const bool pass = r.max_error < kGradTolerance;
        ok = ok && pass;
        std::printf("%-16s %-28s instances %3d  max_rel_error %.3e  %s\n", r.module.c_str(), r.name.c_str(),
                    r.instances, r.max_error, pass ? "ok" : "FAIL");
    }
    return ok ? 0 : kExitRuntime;
}

struct StripArgs {
    std::string frames, out;
    int column = 0;
    int row0 = 0;
    int height = -1;
};

int strip(const StripArgs& a) {
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(a.frames))
        if (e.is_regular_file() && e.path().extension() == ".png") paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());
    if (paths.size() < 2) throw std::runtime_error("need at least two PNG frames in " + a.frames);
    std::vector<Image> frames;
    for (const auto& p : paths) frames.push_back(read_png(p));
    write_png(a.out, consistency_strip(frames, a.column, a.row0, a.height));
    std::cerr << "stacked column " << a.column << " of " << frames.size() << " frames into " << a.out << '\n';
    return 0;
}

// Help text of the subcommand being parsed, or of the whole program.
std::string synopsis(const CLI::App& app) {
    const auto subs = app.get_subcommands();
    return subs.empty() ? app.help() : subs.front()->help(app.get_name());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vxray: voxel-grid encoder with a detail decoder for novel-view super-resolution"};
    app.name("vxray");
    app.require_subcommand(1);
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    app.add_option("--threads", threads, "Worker threads for rendering")->check(CLI::PositiveNumber);

    GenSceneArgs gs;
    auto* gen_cmd = app.add_subcommand("gen-scene", "Generate the analytic toy scene dataset");
    gen_cmd->add_option("--out", gs.out, "Output directory")->required();
    gen_cmd->add_option("--views", gs.views, "Training views")->check(CLI::Range(2, 100000));
    gen_cmd->add_option("--res", gs.res, "Image resolution")->check(CLI::Range(8, 16384));
    gen_cmd->add_option("--seed", gs.seed, "Camera seed");
    gen_cmd->add_option("--test-views", gs.test_views, "Held-out views")->check(CLI::Range(0, 100000));

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Pretrain the encoder, then train encoder and decoder jointly");
    train_cmd->add_option("--config", tr.config, "JSON config file")->check(CLI::ExistingFile);
    train_cmd->add_option("--profile", tr.profile, "Built-in profile: desk or paper");
    train_cmd->add_option("--data", tr.data, "Dataset directory or manifest")->required();
    train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
    train_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
    train_cmd->add_option("--max-iters", tr.max_iters, "Stop after this many iterations in this run");

    RenderArgs rd;
    auto* render_cmd = app.add_subcommand("render", "Render full-resolution views from a checkpoint");
    render_cmd->add_option("--ckpt", rd.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--pose", rd.pose, "Pose index (turntable sweep, or manifest frame)")
        ->check(CLI::NonNegativeNumber);
    render_cmd->add_option("--manifest", rd.manifest, "transforms JSON with the cameras")->check(CLI::ExistingFile);
    render_cmd->add_option("--out", rd.out, "Output directory")->required();
    render_cmd->add_option("--sweep", rd.sweep, "Turntable poses")->check(CLI::PositiveNumber);
    render_cmd->add_option("--res", rd.res, "Turntable resolution")->check(CLI::PositiveNumber);
    render_cmd->add_option("--elevation", rd.elevation, "Turntable elevation in degrees");
    render_cmd->add_option("--chunk", rd.chunk, "Rays per work item")->check(CLI::PositiveNumber);

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Compute PSNR and SSIM on held-out views");
    eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", ev.data, "Dataset directory or manifest")->required();
    eval_cmd->add_option("--report", ev.report, "JSON report path (default stdout)");
    eval_cmd->add_option("--split", ev.split, "Dataset split");
    eval_cmd->add_option("--chunk", ev.chunk, "Rays per work item")->check(CLI::PositiveNumber);

    std::string module = "all";
    int instances = 20;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Run the 64-bit finite-difference gradient suite");
    std::vector<std::string> module_names = grad_suite_modules();
    module_names.insert(module_names.begin(), "all");
    grad_cmd->add_option("--module", module, "all, or one of the suite modules")->check(CLI::IsMember(module_names));
    grad_cmd->add_option("--instances", instances, "Random instances per operation")->check(CLI::PositiveNumber);

    StripArgs st;
    auto* strip_cmd = app.add_subcommand("strip", "Stack one pixel column of every frame side by side");
    strip_cmd->add_option("--frames", st.frames, "Directory of rendered PNG frames")->required()
        ->check(CLI::ExistingDirectory);
    strip_cmd->add_option("--column", st.column, "Pixel column")->required();
    strip_cmd->add_option("--out", st.out, "Output PNG")->required();
    strip_cmd->add_option("--row0", st.row0, "First row of the segment");
    strip_cmd->add_option("--height", st.height, "Segment height (default: to the bottom)");

    if (argc < 2) {
        std::cerr << app.help();
        return kExitUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n\n" << synopsis(app);
        return kExitUsage;
    }

    try {
        if (*gen_cmd) return gen_scene(gs);
        if (*train_cmd) return train(tr);
        if (*render_cmd) return render(rd, threads);
        if (*eval_cmd) return eval(ev, threads);
        if (*grad_cmd) return gradcheck(module, instances);
        if (*strip_cmd) return strip(st);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n\n" << synopsis(app);
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
