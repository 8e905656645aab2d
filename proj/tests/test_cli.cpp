#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctxnet/ctxnet.hpp"

namespace fs = std::filesystem;
using namespace ctxnet;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& text, bool skip_comments) {
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line))
        if (!line.empty() && !(skip_comments && line[0] == '#')) ++n;
    return n;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("ctxnet_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }

    void TearDown() override {
        if (!HasFailure()) fs::remove_all(dir_);
    }

    std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

    RunResult run(const std::string& args) const {
        const auto log = dir_ / "last_run.log";
        const std::string cmd = std::string(CTXNET_CLI_PATH) + " " + args + " > \"" + log.string() + "\" 2>&1";
        const int status = std::system(cmd.c_str());
        RunResult r;
        r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.output = read_file(log);
        return r;
    }

    RunResult run_ok(const std::string& args) const {
        auto r = run(args);
        EXPECT_EQ(r.exit_code, 0) << args << "\n" << r.output;
        return r;
    }

    fs::path dir_;
};

TEST_F(Cli, PrepareWritesSamplesAndIsReproducible) {
    run_ok("prepare --synthetic classify4 --n 64 --points 128 --seed 9 --out " + path("a"));
    run_ok("prepare --synthetic classify4 --n 64 --points 128 --seed 9 --out " + path("b"));
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(path("a/samples"))) {
        ++files;
        EXPECT_EQ(read_file(e.path()), read_file(fs::path(path("b/samples")) / e.path().filename()));
    }
    EXPECT_EQ(files, 64u);
    EXPECT_EQ(read_file(path("a/index.txt")), read_file(path("b/index.txt")));
    EXPECT_EQ(count_lines(read_file(path("a/index.txt")), true), 64u);

    const auto ds = read_dataset(path("a"));
    EXPECT_EQ(ds.task, Task::Classify);
    EXPECT_EQ(ds.class_count, 4u);
    EXPECT_EQ(ds.samples.size(), 64u);
}

TEST_F(Cli, PrepareSplitsRoomIntoBlocks) {
    // 2 m x 1 m room, two classes split at x = 1
    PointCloud room(400, 3);
    room.class_count = 2;
    Rng rng(4);
    for (std::size_t i = 0; i < room.n; ++i) {
        room.at(i, 0) = rng.uniform(0, 2);
        room.at(i, 1) = rng.uniform(0, 1);
        room.at(i, 2) = rng.uniform(0, 3);
        room.labels.push_back(room.at(i, 0) < 1 ? 0 : 1);
    }
    save_points(room, path("room.xyz"));
    run_ok("prepare --blocks " + path("room.xyz") + " --block-size 1 --points 64 --out " + path("blocks"));
    const auto ds = read_dataset(path("blocks"));
    EXPECT_EQ(ds.task, Task::Segment);
    ASSERT_EQ(ds.samples.size(), 2u);
    for (const auto& s : ds.samples) {
        EXPECT_EQ(s.cloud.n, 64u);
        EXPECT_EQ(s.cloud.f, 9u);
    }
}

TEST_F(Cli, ZeroLearningRateKeepsInitialParameters) {
    run_ok("prepare --synthetic classify4 --n 8 --points 256 --out " + path("d"));
    run_ok("train --data " + path("d") + " --out " + path("r") +
           " --epochs 2 --lr 0 --seed 5 --width-divisor 16 --quiet");
    const auto ck = load_checkpoint(path("r/last.ckpt"));
    EXPECT_TRUE(ck.params.values_equal(init_params(ck.config, 5)));
}

TEST_F(Cli, ResumeContinuesEpochNumbering) {
    run_ok("prepare --synthetic classify4 --n 8 --points 256 --out " + path("d"));
    run_ok("train --data " + path("d") + " --out " + path("r") + " --epochs 2 --width-divisor 16 --quiet");
    run_ok("train --data " + path("d") + " --out " + path("r") + " --resume " + path("r/last.ckpt") +
           " --epochs 2 --quiet");
    std::ifstream in(path("r/history.tsv"));
    const auto history = read_history(in);
    ASSERT_EQ(history.size(), 4u);
    for (std::size_t i = 0; i < history.size(); ++i) EXPECT_EQ(history[i].epoch, i + 1);
    EXPECT_EQ(load_checkpoint(path("r/last.ckpt")).meta.get("meta.epoch"), "4");
}

TEST_F(Cli, EvalWithPerfectPredictionsScoresOne) {
    run_ok("prepare --synthetic segment2 --n 3 --points 64 --out " + path("s"));
    const auto ds = read_dataset(path("s"));
    std::ofstream pred(path("pred.txt"));
    for (const auto& s : ds.samples)
        for (auto l : s.cloud.labels) pred << l << '\n';
    pred.close();
    const auto r = run_ok("eval --predictions " + path("pred.txt") + " --data " + path("s") + " --out " + path("m"));
    EXPECT_NE(r.output.find("mean IoU            1.0000"), std::string::npos) << r.output;
    EXPECT_TRUE(fs::exists(path("m/metrics.txt")));
}

TEST_F(Cli, PredictWritesOneLabelPerInputPoint) {
    run_ok("prepare --synthetic classify4 --n 8 --points 256 --out " + path("d"));
    run_ok("train --data " + path("d") + " --out " + path("r") + " --epochs 1 --width-divisor 16 --quiet");
    PointCloud pc(300, 3);
    Rng rng(8);
    for (auto& v : pc.data) v = rng.uniform(-1, 1);
    save_points(pc, path("cloud.xyz"));
    run_ok("predict --checkpoint " + path("r/best.ckpt") + " --input " + path("cloud.xyz") + " --out " +
           path("out.xyz"));
    const auto labeled = load_points(path("out.xyz"));
    EXPECT_EQ(labeled.n, 300u);
    EXPECT_EQ(labeled.labels.size(), 300u);
    EXPECT_EQ(count_lines(read_file(path("out.xyz")), true), 300u);
}

TEST_F(Cli, InspectRegionsHaveRequestedSize) {
    PointCloud pc(512, 3);
    Rng rng(2);
    for (auto& v : pc.data) v = rng.uniform(-1, 1);
    save_points(pc, path("cloud.bin"));
    run_ok("kdtree-inspect --input " + path("cloud.bin") + " --regions 32,64 --out " + path("k"));
    std::ifstream in(path("k/regions.xyz"));
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "#cols x y z region32 region64");
    std::map<int, int> size32, size64;
    double x, y, z;
    int r32, r64;
    while (in >> x >> y >> z >> r32 >> r64) {
        ++size32[r32];
        ++size64[r64];
    }
    EXPECT_EQ(size32.size(), 16u);
    EXPECT_EQ(size64.size(), 8u);
    for (auto [id, n] : size32) EXPECT_EQ(n, 32) << "region " << id;
    for (auto [id, n] : size64) EXPECT_EQ(n, 64) << "region " << id;
    EXPECT_EQ(count_lines(read_file(path("k/nodes.txt")), true), 1023u);
}

TEST_F(Cli, UsageErrorsExitTwo) {
    auto r = run("train --epochs 3");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_EQ(r.output.rfind("error:usage:", 0), 0u) << r.output;
    r = run("frobnicate");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_EQ(r.output.rfind("error:usage:", 0), 0u) << r.output;
    r = run("prepare --synthetic classify4 --mesh x.txt --out " + path("d"));
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_EQ(r.output.rfind("error:usage:", 0), 0u) << r.output;
}

TEST_F(Cli, MissingConfigKeyIsNamed) {
    run_ok("prepare --synthetic classify4 --n 4 --points 256 --out " + path("d"));
    std::ofstream(path("bad.cfg")) << "net.task = classify\nnet.depth = 8\n";
    const auto r = run("train --data " + path("d") + " --out " + path("r") + " --config " + path("bad.cfg"));
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_EQ(r.output.rfind("error:config:", 0), 0u) << r.output;
    EXPECT_NE(r.output.find("net.class_count"), std::string::npos) << r.output;
}

TEST_F(Cli, ResumeWithDifferentConfigNamesField) {
    run_ok("prepare --synthetic classify4 --n 4 --points 256 --out " + path("d"));
    run_ok("train --data " + path("d") + " --out " + path("r") + " --epochs 1 --width-divisor 16 --quiet");
    const auto r = run("train --data " + path("d") + " --out " + path("r2") + " --resume " + path("r/last.ckpt") +
                       " --width-divisor 16 --depth 7 --epochs 1");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_EQ(r.output.rfind("error:compatibility:", 0), 0u) << r.output;
    EXPECT_NE(r.output.find("'net.depth'"), std::string::npos) << r.output;
}

TEST_F(Cli, EvalChecksConfigCompatibility) {
    run_ok("prepare --synthetic classify4 --n 4 --points 256 --out " + path("d"));
    run_ok("train --data " + path("d") + " --out " + path("r") + " --epochs 1 --width-divisor 16 --quiet");
    auto other = load_checkpoint(path("r/last.ckpt")).config;
    other.class_count = 5;
    std::ofstream(path("other.cfg")) << other.to_kv().to_text();
    const auto r = run("eval --checkpoint " + path("r/last.ckpt") + " --config " + path("other.cfg") + " --data " +
                       path("d"));
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("net.class_count"), std::string::npos) << r.output;
}

TEST_F(Cli, CrossvalRunsOneFoldPerGroup) {
    run_ok("prepare --synthetic segment2 --n 6 --points 512 --out " + path("s"));
    std::ofstream(path("areas.txt")) << "area1\narea2\narea1\narea3\narea2\narea3\n";
    const auto r = run_ok("crossval --data " + path("s") + " --groups " + path("areas.txt") + " --out " + path("cv") +
                          " --width-divisor 16 --epochs 1");
    for (int f = 0; f < 3; ++f) {
        EXPECT_TRUE(fs::exists(path("cv/fold" + std::to_string(f) + "/metrics.txt")));
        EXPECT_NE(r.output.find("fold " + std::to_string(f) + ": 4 train, 2 test"), std::string::npos) << r.output;
    }
    EXPECT_TRUE(fs::exists(path("cv/metrics.txt")));
    EXPECT_EQ(run("crossval --data " + path("s") + " --folds 9 --out " + path("cv2")).exit_code, 2);
}

TEST_F(Cli, ParamsReportsDefaultSize) {
    const auto r = run_ok("params");
    EXPECT_NE(r.output.find("4521448"), std::string::npos) << r.output;
}

}  // namespace
