// Copyright Contributors to the vxray Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string output;
};

fs::path work_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "vxray_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Result run(const std::string& args) {
    const fs::path log = work_dir() / "last.log";
    const std::string cmd = std::string(VXRAY_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

// Toy scene shared by the tests below, plus a small training config.
class CliTest : public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
        const auto r = run("gen-scene --out " + (work_dir() / "scene").string() + " --views 3 --res 32 --seed 4 --test-views 2");
        ASSERT_EQ(r.code, 0) << r.output;
        std::ofstream(work_dir() / "small.json") << R"({
  "seed": 1, "grid_dims": [12, 12, 12], "n_samples": 12, "pretrain_patch": 4, "patch_size": 16,
  "pretrain_iters": 3, "joint_iters": 3, "decoder_blocks": 1, "decoder_channels": 8,
  "checkpoint_interval": 2, "log_interval": 0
})";
    }
    static std::string scene() { return (work_dir() / "scene").string(); }
    static std::string path(const std::string& name) { return (work_dir() / name).string(); }
};

}  // namespace

TEST(Cli, NoArgumentsPrintsUsage) {
    const auto r = run("");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("Subcommands"), std::string::npos) << r.output;
}

TEST(Cli, UnknownFlagsAndCommandsAreRejected) {
    const auto r = run("gen-scene --out x --bogus 1");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("--bogus"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("--views"), std::string::npos) << r.output;
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("gradcheck --module nope").code, 1);
    EXPECT_EQ(run("render --ckpt /nonexistent --pose 0 --out x").code, 1);
}

TEST(Cli, GradcheckPassesOnOneModule) {
    const auto r = run("gradcheck --module detail_decoder --instances 2");
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("decode"), std::string::npos);
    EXPECT_EQ(r.output.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, GenSceneIsReproducible) {
    ASSERT_EQ(run("gen-scene --out " + path("scene_b") + " --views 3 --res 32 --seed 4 --test-views 2").code, 0);
    for (const char* f : {"train/r_000.png", "train/r_002.png", "test/r_001.png", "transforms_train.json"}) {
        EXPECT_EQ(slurp(work_dir() / "scene" / f), slurp(work_dir() / "scene_b" / f)) << f;
    }
}

TEST_F(CliTest, TrainRenderEvalStrip) {
    auto r = run("train --config " + path("small.json") + " --data " + scene() + " --out " + path("a.vxr"));
    ASSERT_EQ(r.code, 0) << r.output;
    for (const char* it : {"at iteration 2", "at iteration 4", "at iteration 6"})
        EXPECT_NE(r.output.find(it), std::string::npos) << r.output;
    ASSERT_TRUE(fs::exists(path("a.vxr")));

    r = run("render --ckpt " + path("a.vxr") + " --pose 1 --sweep 4 --res 32 --out " + path("one"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(work_dir() / "one" / "r_001.png"));
    EXPECT_NE(r.output.find("\"seconds\""), std::string::npos);

    r = run("render --ckpt " + path("a.vxr") + " --sweep 5 --res 32 --out " + path("sweep") + " --pose 9");
    EXPECT_EQ(r.code, 1) << r.output;
    r = run("--threads 1 render --ckpt " + path("a.vxr") + " --manifest " + scene() + "/transforms_test.json --out " +
            path("sweep"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(work_dir() / "sweep" / "r_001.png"));

    r = run("strip --frames " + path("sweep") + " --column 16 --out " + path("strip.png"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(path("strip.png")));
    EXPECT_EQ(run("strip --frames " + path("sweep") + " --column 99 --out " + path("bad.png")).code, 2);

    ASSERT_EQ(run("eval --ckpt " + path("a.vxr") + " --data " + scene() + " --report " + path("r1.json")).code, 0);
    ASSERT_EQ(run("eval --ckpt " + path("a.vxr") + " --data " + scene() + " --report " + path("r2.json")).code, 0);
    const std::string report = slurp(path("r1.json"));
    EXPECT_EQ(report, slurp(path("r2.json")));
    EXPECT_NE(report.find("mean_psnr"), std::string::npos) << report;
    EXPECT_NE(report.find("view_1"), std::string::npos) << report;
}

TEST_F(CliTest, ResumeMatchesUninterrupted) {
    ASSERT_EQ(run("train --config " + path("small.json") + " --data " + scene() + " --out " + path("full.vxr")).code, 0);
    ASSERT_EQ(run("train --config " + path("small.json") + " --data " + scene() + " --out " + path("half.vxr") +
                  " --max-iters 4").code,
              0);
    ASSERT_EQ(run("train --resume " + path("half.vxr") + " --data " + scene() + " --out " + path("rest.vxr")).code, 0);
    EXPECT_EQ(slurp(path("full.vxr")), slurp(path("rest.vxr")));
    EXPECT_EQ(run("train --resume " + path("half.vxr") + " --config " + path("small.json") + " --data " + scene() +
                  " --out " + path("x.vxr")).code,
              1);
}

TEST_F(CliTest, RuntimeFailuresExitTwo) {
    EXPECT_EQ(run("train --data " + path("missing") + " --out " + path("m.vxr")).code, 2);
    std::ofstream(path("junk.vxr")) << "not a checkpoint";
    const auto r = run("eval --ckpt " + path("junk.vxr") + " --data " + scene());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("not a checkpoint"), std::string::npos) << r.output;
}

TEST_F(CliTest, PaperProfileRunsAndCheckpoints) {
    const auto big = path("scene64");
    ASSERT_EQ(run("gen-scene --out " + big + " --views 2 --res 64 --seed 2 --test-views 0").code, 0);
    std::ofstream(path("paper.json")) << R"({"profile": "paper", "checkpoint_interval": 1})";
    const auto r = run("train --config " + path("paper.json") + " --data " + big + " --out " + path("paper.vxr") +
                       " --max-iters 2");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("profile paper"), std::string::npos);
    EXPECT_NE(r.output.find("at iteration 1"), std::string::npos);
    EXPECT_NE(r.output.find("at iteration 2"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("paper.vxr")));
}
