#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "delin/commands.hpp"
#include "delin/io.hpp"

using namespace delin;
namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "delin_test_cli";

std::string path_of(const std::string& name) {
    fs::create_directories(kDir);
    return (kDir / name).string();
}

// Runs the CLI and returns its exit status; stdout and stderr go to files.
int run(const std::string& args) {
    const std::string cmd = std::string(DELIN_CLI_PATH) + " " + args + " >" + path_of("stdout.txt") + " 2>" +
                            path_of("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string stderr_text() { return io::read_file(path_of("stderr.txt")); }
std::string stdout_text() { return io::read_file(path_of("stdout.txt")); }

std::string write_config(const std::string& name, const io::json& body) {
    io::json doc = body;
    doc["version"] = "1.0";
    doc["kind"] = "config";
    const auto p = path_of(name);
    io::write_file(p, io::dump(doc));
    return p;
}

// Models that reproduce the analytic markings of every frame.
io::ModelsFile perfect_models(const io::Dataset& dataset) {
    io::ModelsFile out;
    const BezierChain dummy({CubicBezier{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}}});
    for (const auto& f : dataset.frames) {
        const auto scene = cli::scene_for(dataset.course, f);
        io::ModelRecord rec;
        rec.frame_id = f.frame_id;
        rec.model = LaneModel{dummy, dummy, scene.gt_markings, dataset.course.lane_count, 500.0, false, false};
        out.frames.push_back(std::move(rec));
    }
    return out;
}

}  // namespace

TEST(CliGenerate, DeterministicForFixedSeed) {
    const auto a = path_of("gen_a.json");
    const auto b = path_of("gen_b.json");
    ASSERT_EQ(run("generate --frames 10 --seed 7 --out " + a), 0);
    ASSERT_EQ(run("generate --frames 10 --seed 7 --out " + b), 0);
    EXPECT_EQ(io::read_file(a), io::read_file(b));
    EXPECT_NE(stdout_text().find("10 frames"), std::string::npos);
    ASSERT_EQ(run("generate --frames 10 --seed 8 --course s-curve --out " + b), 0);
    EXPECT_NE(io::read_file(a), io::read_file(b));
}

TEST(CliGenerate, ZeroFramesIsValid) {
    const auto p = path_of("gen_empty.json");
    ASSERT_EQ(run("generate --frames 0 --out " + p), 0);
    const auto d = io::dataset_from(io::load_json(p));
    EXPECT_TRUE(d.frames.empty());
}

TEST(CliGenerate, TightArcIsConfigError) {
    const auto cfg = write_config(
        "tight.json", {{"course", {{"segments", {{{"type", "arc"}, {"radius_m", 40.0}, {"sweep_rad", 1.0}}}}}}});
    EXPECT_EQ(run("generate --frames 1 --config " + cfg + " --out " + path_of("x.json")), 1);
    EXPECT_NE(stderr_text().find("radius"), std::string::npos) << stderr_text();
}

TEST(CliGenerate, UnwritablePathIsIoError) {
    EXPECT_EQ(run("generate --frames 1 --out /nonexistent/dir/out.json"), 2);
    EXPECT_EQ(run("generate --frames 1 --config /nonexistent/cfg.json --out " + path_of("x.json")), 2);
}

TEST(CliUsage, BadArguments) {
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("fit --dataset missing.json"), 1);
    EXPECT_EQ(run("bench --iterations 10"), 1);
}

TEST(CliFit, EmptyFrameIsTaggedNotFatal) {
    auto dataset = cli::make_dataset(io::PipelineConfig{}, 3);
    dataset.frames[1].detections.clear();
    const auto ds = path_of("fit_ds.json");
    const auto models = path_of("fit_models.json");
    io::write_file(ds, io::dump(io::to_json(dataset)));
    ASSERT_EQ(run("fit --dataset " + ds + " --out " + models), 0);
    const auto m = io::models_from(io::load_json(models));
    ASSERT_EQ(m.frames.size(), 3u);
    EXPECT_TRUE(m.frames[0].model.has_value());
    EXPECT_FALSE(m.frames[1].model.has_value());
    EXPECT_EQ(m.frames[1].error_kind, "insufficient_input");
    EXPECT_TRUE(m.frames[2].model.has_value());
}

TEST(CliFit, RuntimeBlockMatchesPerFrameLog) {
    const auto ds = path_of("fit1000_ds.json");
    const auto models = path_of("fit1000_models.json");
    ASSERT_EQ(run("generate --frames 1000 --seed 3 --out " + ds), 0);
    ASSERT_EQ(run("fit --dataset " + ds + " --out " + models), 0);
    const auto m = io::models_from(io::load_json(models));
    ASSERT_EQ(m.frames.size(), 1000u);
    ASSERT_TRUE(m.runtime.has_value());
    std::vector<double> samples;
    for (const auto& f : m.frames) {
        EXPECT_TRUE(f.model.has_value());
        samples.push_back(f.runtime_ms);
    }
    // Independent recomputation: mean, population sigma, nearest rank.
    double mean = 0.0;
    for (double s : samples) {
        mean += s;
    }
    mean /= 1000.0;
    double var = 0.0;
    for (double s : samples) {
        var += (s - mean) * (s - mean);
    }
    std::sort(samples.begin(), samples.end());
    EXPECT_NEAR(m.runtime->mean_ms, mean, 1e-9);
    EXPECT_NEAR(m.runtime->sigma_ms, std::sqrt(var / 1000.0), 1e-9);
    EXPECT_EQ(m.runtime->q95_ms, samples[949]);
}

TEST(CliEval, PerfectModelsScoreOne) {
    const auto ds = path_of("eval_ds.json");
    const auto models = path_of("eval_models.json");
    const auto report = path_of("eval_report.json");
    ASSERT_EQ(run("generate --frames 5 --seed 1 --out " + ds), 0);
    io::write_file(models, io::dump(io::to_json(perfect_models(io::dataset_from(io::load_json(ds))))));
    ASSERT_EQ(run("eval --models " + models + " --dataset " + ds + " --out " + report), 0);
    const auto r = io::report_from(io::load_json(report));
    ASSERT_TRUE(r.acc2d.has_value());
    EXPECT_EQ(*r.acc2d, 1.0);
    EXPECT_EQ(r.acc3d, 1.0);
    EXPECT_EQ(r.safety, 1.0);
}

TEST(CliEval, MissingFramesIsJoinError) {
    const auto ds = path_of("join_ds.json");
    const auto models = path_of("join_models.json");
    ASSERT_EQ(run("generate --frames 6 --out " + ds), 0);
    auto m = perfect_models(io::dataset_from(io::load_json(ds)));
    m.frames.erase(m.frames.begin() + 3, m.frames.end());
    io::write_file(models, io::dump(io::to_json(m)));
    EXPECT_EQ(run("eval --models " + models + " --dataset " + ds + " --out " + path_of("join_report.json")), 3);
    EXPECT_NE(stderr_text().find("missing from models: 3 4 5"), std::string::npos) << stderr_text();
}

TEST(CliEval, CorruptModelsIsDataError) {
    const auto ds = path_of("corrupt_ds.json");
    const auto models = path_of("corrupt_models.json");
    ASSERT_EQ(run("generate --frames 2 --out " + ds), 0);
    io::write_file(models, "{\"version\": \"1.0\", \"kind\": \"models\", \"frames\": [");
    EXPECT_EQ(run("eval --models " + models + " --dataset " + ds + " --out " + path_of("r.json")), 3);
    io::write_file(models, "{\"version\": \"3.0\", \"kind\": \"models\", \"frames\": []}");
    EXPECT_EQ(run("eval --models " + models + " --dataset " + ds + " --out " + path_of("r.json")), 3);
}

TEST(CliEval, LidarNoiseOnStraightsKeepsAccuracy) {
    const auto cfg = write_config("lidar.json", {{"course", "straight"}, {"noise", {{"position_sigma_m", 0.05}}}});
    const auto ds = path_of("lidar_ds.json");
    const auto models = path_of("lidar_models.json");
    const auto report = path_of("lidar_report.json");
    ASSERT_EQ(run("generate --frames 100 --seed 11 --config " + cfg + " --out " + ds), 0);
    ASSERT_EQ(run("fit --config " + cfg + " --dataset " + ds + " --out " + models), 0);
    ASSERT_EQ(run("eval --config " + cfg + " --models " + models + " --dataset " + ds + " --out " + report), 0);
    const auto r = io::report_from(io::load_json(report));
    EXPECT_GE(r.acc3d, 0.9);
    EXPECT_EQ(r.frames_failed, 0u);
}

TEST(CliBench, ReportsAllStatistics) {
    const auto out = path_of("bench.json");
    ASSERT_EQ(run("bench --frames 20 --iterations 1000 --warmup 100 --out " + out), 0);
    const auto doc = io::load_json(out);
    EXPECT_EQ(doc["kind"], "bench");
    EXPECT_EQ(doc["iterations"], 1000);
    for (const char* key : {"mean_ms", "sigma_ms", "q95_ms"}) {
        ASSERT_TRUE(doc["runtime"].contains(key)) << key;
        EXPECT_GE(doc["runtime"][key].get<double>(), 0.0);
    }
    const auto text = stdout_text();
    EXPECT_NE(text.find("mean"), std::string::npos);
    EXPECT_NE(text.find("q95"), std::string::npos);
}

TEST(CliBench, ExtrapolationCap) {
    EXPECT_EQ(run("bench --frames 2 --extrapolation 12"), 1);
    EXPECT_NE(stderr_text().find("--allow-long-extrapolation"), std::string::npos);
    EXPECT_EQ(run("bench --frames 2 --extrapolation 12 --allow-long-extrapolation"), 0);
    EXPECT_EQ(run("fit --dataset x.json --out y.json --extrapolation 10.5"), 1);
}

TEST(CliExport, WritesKeypoints) {
    const auto ds = path_of("exp_ds.json");
    const auto models = path_of("exp_models.json");
    const auto out = path_of("exp_tusimple.json");
    ASSERT_EQ(run("generate --frames 2 --out " + ds), 0);
    ASSERT_EQ(run("fit --dataset " + ds + " --out " + models), 0);
    ASSERT_EQ(run("export --models " + models + " --out " + out), 0);
    const auto doc = io::load_json(out);
    EXPECT_EQ(doc["kind"], "tusimple");
    EXPECT_EQ(doc["frames"].size(), 2u);
    EXPECT_EQ(doc["frames"][0]["lanes"].size(), 3u);
    EXPECT_EQ(doc["frames"][0]["lanes"][0].size(), doc["h_samples"].size());
}
