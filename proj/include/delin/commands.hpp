#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "lane_builder.hpp"
#include "metrics.hpp"
#include "scene.hpp"

// The CLI subcommands as library functions. They throw delin::Error; the
// executable maps error kinds to exit codes with exit_code().
namespace delin::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kData = 3 };

inline int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config:
        case ErrorKind::domain:
        case ErrorKind::range_policy:
            return kUsage;
        case ErrorKind::io:
            return kIo;
        default:
            return kData;
    }
}

// Ego stations for generated frames sit on the post grid so posts cover the
// road from the ego onward, and leave the evaluation range inside the course.
inline double pick_ego_station(const io::PipelineConfig& config, std::uint64_t frame_seed) {
    const double total = config.course.total_length();
    const double spacing = config.course.layout.delineator_spacing_m;
    const double usable = std::max(0.0, total - config.eval_range_m);
    const auto slots = static_cast<std::uint64_t>(std::floor(usable / spacing + 1e-9));
    std::mt19937_64 rng(frame_seed);
    const std::uint64_t k = std::uniform_int_distribution<std::uint64_t>(0, slots)(rng);
    return static_cast<double>(k) * spacing;
}

inline RoadScene scene_for(const RoadCourse& course, const io::FrameRecord& frame) {
    return generate_scene(course, frame.ego_arclength, frame.scene_seed, frame.ego_speed_mps);
}

inline io::FrameRecord synthesize_frame(const io::PipelineConfig& config, long long frame_id) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(frame_id);
    io::FrameRecord f;
    f.frame_id = frame_id;
    f.ego_arclength = pick_ego_station(config, seed);
    f.scene_seed = seed;
    f.ego_speed_mps = config.ego_speed_mps;
    NoiseConfig noise = config.noise;
    noise.seed = seed;
    f.detections = simulate_detections(scene_for(config.course, f), noise, config.sensor_range_m);
    return f;
}

inline io::Dataset make_dataset(const io::PipelineConfig& config, std::size_t frames) {
    config.validate();
    io::Dataset d;
    d.course = config.course;
    for (std::size_t i = 0; i < frames; ++i) {
        d.frames.push_back(synthesize_frame(config, static_cast<long long>(i)));
    }
    return d;
}

inline int cmd_generate(const io::PipelineConfig& config, std::size_t frames, const std::filesystem::path& out,
                        std::ostream& log) {
    const auto dataset = make_dataset(config, frames);
    io::write_file(out, io::dump(io::to_json(dataset)));
    std::size_t detections = 0;
    for (const auto& f : dataset.frames) {
        detections += f.detections.size();
    }
    log << "generated " << dataset.frames.size() << " frames, " << detections << " detections -> " << out.string()
        << "\n";
    return kOk;
}

// Fits every frame, timing only the geometric pipeline. Frame-level errors
// are recorded and do not stop the run.
inline io::ModelsFile fit_dataset(const io::Dataset& dataset, const io::PipelineConfig& config) {
    config.validate();
    io::ModelsFile out;
    std::vector<double> timings;
    const auto options = config.fit_options();
    for (const auto& frame : dataset.frames) {
        io::ModelRecord rec;
        rec.frame_id = frame.frame_id;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            rec.model = fit_lanes(frame.detections, dataset.course.layout, config.extrapolation_m, options);
        } catch (const Error& e) {
            rec.error_kind = std::string(to_string(e.kind()));
            rec.error_message = e.what();
        }
        const auto t1 = std::chrono::steady_clock::now();
        rec.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        timings.push_back(rec.runtime_ms);
        out.frames.push_back(std::move(rec));
    }
    if (!timings.empty()) {
        out.runtime = runtime_stats(timings);
    }
    return out;
}

inline int cmd_fit(const std::filesystem::path& dataset_path, const io::PipelineConfig& config,
                   const std::filesystem::path& out, std::ostream& log) {
    const auto dataset = io::dataset_from(io::load_json(dataset_path));
    const auto models = fit_dataset(dataset, config);
    io::write_file(out, io::dump(io::to_json(models)));
    std::size_t failed = 0;
    for (const auto& f : models.frames) {
        failed += f.model ? 0 : 1;
    }
    log << "fitted " << models.frames.size() - failed << "/" << models.frames.size() << " frames";
    if (models.runtime) {
        log << "; mean " << models.runtime->mean_ms << " ms, sigma " << models.runtime->sigma_ms << " ms, q95 "
            << models.runtime->q95_ms << " ms";
    }
    log << "\n";
    return kOk;
}

inline FrameScore score_frame(const io::ModelRecord& rec, const io::FrameRecord& frame, const RoadCourse& course,
                              const io::PipelineConfig& config) {
    const auto scene = scene_for(course, frame);
    const auto gt = sample_ground_truth(scene, config.gt_step_m, config.eval_range_m);
    const Accuracy3dOptions options{config.threshold_m, config.gt_step_m, config.eval_range_m, false};
    FrameScore s;
    s.frame_id = frame.frame_id;
    if (!rec.model) {
        s.ok = false;
        s.error = rec.error_kind;
        s.acc2d = accuracy_2d_counts({}, gt, config.camera, config.threshold_px).ratio();
        s.per_marking.assign(gt.size(), Counts{});
        return s;
    }
    const auto& model = *rec.model;
    s.acc2d = accuracy_2d(model, gt, config.camera, config.threshold_px);
    const auto acc = accuracy_3d(model, gt, options);
    s.acc3d = acc.accuracy;
    s.per_marking = acc.per_marking;
    s.safety = safety_score(model, gt, frame.ego_speed_mps, config.threshold_m, config.safety, options);
    s.detection_range_m = model.detection_range_m;
    return s;
}

inline EvalReport evaluate(const io::ModelsFile& models, const io::Dataset& dataset,
                           const io::PipelineConfig& config) {
    config.validate();
    std::map<long long, const io::ModelRecord*> by_id;
    for (const auto& m : models.frames) {
        by_id[m.frame_id] = &m;
    }
    std::vector<long long> missing;
    for (const auto& f : dataset.frames) {
        if (!by_id.contains(f.frame_id)) {
            missing.push_back(f.frame_id);
        }
    }
    std::vector<long long> unknown;
    for (const auto& [id, _] : by_id) {
        const bool known = std::any_of(dataset.frames.begin(), dataset.frames.end(),
                                       [id = id](const io::FrameRecord& f) { return f.frame_id == id; });
        if (!known) {
            unknown.push_back(id);
        }
    }
    if (!missing.empty() || !unknown.empty()) {
        std::string msg = "models and dataset disagree on frame ids";
        auto list = [&msg](const char* label, const std::vector<long long>& ids) {
            if (ids.empty()) {
                return;
            }
            msg += std::string("; ") + label + ":";
            for (auto id : ids) {
                msg += " " + std::to_string(id);
            }
        };
        list("missing from models", missing);
        list("not in dataset", unknown);
        throw Error(ErrorKind::join, msg);
    }
    std::vector<FrameScore> scores;
    for (const auto& f : dataset.frames) {
        scores.push_back(score_frame(*by_id.at(f.frame_id), f, dataset.course, config));
    }
    return aggregate(std::move(scores), models.runtime);
}

inline int cmd_eval(const std::filesystem::path& models_path, const std::filesystem::path& dataset_path,
                    const io::PipelineConfig& config, const std::filesystem::path& out, std::ostream& log) {
    const auto models = io::models_from(io::load_json(models_path));
    const auto dataset = io::dataset_from(io::load_json(dataset_path));
    const auto report = evaluate(models, dataset, config);
    io::write_file(out, io::dump(io::to_json(report, config.threshold_px, config.threshold_m)));
    log << "acc2d " << (report.acc2d ? std::to_string(*report.acc2d) : std::string("n/a")) << ", acc3d "
        << report.acc3d << ", safety " << report.safety << " over " << report.frames.size() << " frames\n";
    return kOk;
}

struct BenchResult {
    std::size_t frames = 0;
    std::size_t warmup = 0;
    std::size_t iterations = 0;
    RuntimeStats stats;
};

// Times fit_lanes alone on in-memory frames, single threaded.
inline BenchResult run_bench(const io::PipelineConfig& config, std::size_t frames, std::size_t iterations = 1000,
                             std::size_t warmup = 100) {
    config.validate();
    if (frames == 0 || iterations == 0) {
        throw Error(ErrorKind::config, "bench needs at least one frame and one iteration");
    }
    const auto dataset = make_dataset(config, frames);
    const auto options = config.fit_options();
    std::size_t sink = 0;
    auto once = [&](std::size_t i) {
        const auto& f = dataset.frames[i % dataset.frames.size()];
        try {
            sink += fit_lanes(f.detections, dataset.course.layout, config.extrapolation_m, options).markings.size();
        } catch (const Error&) {
            sink += 1;
        }
    };
    for (std::size_t i = 0; i < warmup; ++i) {
        once(i);
    }
    std::vector<double> samples;
    samples.reserve(iterations);
    for (std::size_t i = 0; i < iterations; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        once(i);
        const auto t1 = std::chrono::steady_clock::now();
        samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    volatile std::size_t keep = sink;
    (void)keep;
    return {frames, warmup, iterations, runtime_stats(samples)};
}

inline io::json to_json(const BenchResult& r) {
    io::json doc = io::header("bench");
    doc["frames"] = r.frames;
    doc["warmup"] = r.warmup;
    doc["iterations"] = r.iterations;
    doc["runtime"] = io::to_json(r.stats);
    return doc;
}

inline int cmd_bench(const io::PipelineConfig& config, std::size_t frames, const std::optional<std::filesystem::path>& out,
                     std::ostream& log, std::size_t iterations = 1000, std::size_t warmup = 100) {
    const auto result = run_bench(config, frames, iterations, warmup);
    log << "fit_lanes over " << result.iterations << " iterations (" << result.warmup << " warmup, " << result.frames
        << " frames): mean " << result.stats.mean_ms << " ms, sigma " << result.stats.sigma_ms << " ms, q95 "
        << result.stats.q95_ms << " ms\n";
    if (out) {
        io::write_file(*out, io::dump(to_json(result)));
    }
    return kOk;
}

inline int cmd_export(const std::filesystem::path& models_path, const io::PipelineConfig& config,
                      const std::filesystem::path& out, std::ostream& log) {
    config.validate();
    const auto models = io::models_from(io::load_json(models_path));
    io::write_file(out, io::dump(io::tusimple_export(models, config.camera, config.tusimple_row_step_px)));
    log << "exported " << models.frames.size() << " frames -> " << out.string() << "\n";
    return kOk;
}

}  // namespace delin::cli
