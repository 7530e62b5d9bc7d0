#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chain.hpp"
#include "error.hpp"
#include "lane_builder.hpp"
#include "metrics.hpp"
#include "scene.hpp"

// JSON file formats. Every document carries "version": "<major>.<minor>" and
// a "kind"; readers reject other majors. Field names are listed in the
// README.
namespace delin::io {

using json = nlohmann::json;

inline constexpr int kFormatMajor = 1;
inline constexpr const char* kFormatVersion = "1.0";

// ---------------------------------------------------------------------------
// Field access with path context for error messages.

namespace detail {

inline const json& field(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) {
        throw Error(ErrorKind::parse, "expected an object at '" + path + "'");
    }
    const auto it = j.find(key);
    if (it == j.end()) {
        throw Error(ErrorKind::parse, "missing field '" + path + "." + key + "'");
    }
    return *it;
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& path) {
    const json& v = field(j, key, path);
    try {
        return v.get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, "bad value for '" + path + "." + key + "': " + e.what());
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& path, T fallback) {
    return j.contains(key) ? get<T>(j, key, path) : fallback;
}

inline const json& array_field(const json& j, const std::string& key, const std::string& path) {
    const json& v = field(j, key, path);
    if (!v.is_array()) {
        throw Error(ErrorKind::parse, "field '" + path + "." + key + "' must be an array");
    }
    return v;
}

}  // namespace detail

inline void check_header(const json& doc, const std::string& kind) {
    if (!doc.is_object()) {
        throw Error(ErrorKind::parse, "document root must be an object");
    }
    const auto version = detail::get<std::string>(doc, "version", "$");
    int major = -1;
    try {
        major = std::stoi(version.substr(0, version.find('.')));
    } catch (const std::exception&) {
        throw Error(ErrorKind::parse, "malformed version '" + version + "'");
    }
    if (major != kFormatMajor) {
        throw Error(ErrorKind::version, "unsupported format version " + version + " (expected " +
                                            std::to_string(kFormatMajor) + ".x)");
    }
    const auto actual = detail::get<std::string>(doc, "kind", "$");
    if (actual != kind) {
        throw Error(ErrorKind::parse, "expected a '" + kind + "' document, found '" + actual + "'");
    }
}

inline json header(const std::string& kind) { return json{{"version", kFormatVersion}, {"kind", kind}}; }

// ---------------------------------------------------------------------------
// Text and file plumbing.

inline json parse_text(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw Error(ErrorKind::parse, source + ":" + std::to_string(line) + ": " + e.what());
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw Error(ErrorKind::io, "write failed for " + path.string());
    }
}

inline std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

inline json load_json(const std::filesystem::path& path) { return parse_text(read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Geometry values.

inline json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec3_from(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number()) {
        throw Error(ErrorKind::parse, "expected [x, y, z] at '" + path + "'");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json to_json(const BezierChain& chain) {
    json out = json::array();
    for (const auto& seg : chain.segments()) {
        out.push_back(json::array({to_json(seg.p0()), to_json(seg.p1()), to_json(seg.p2()), to_json(seg.p3())}));
    }
    return out;
}

inline BezierChain chain_from(const json& j, const std::string& path) {
    if (!j.is_array()) {
        throw Error(ErrorKind::parse, "expected segment array at '" + path + "'");
    }
    std::vector<CubicBezier> segs;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto p = path + "[" + std::to_string(i) + "]";
        if (!j[i].is_array() || j[i].size() != 4) {
            throw Error(ErrorKind::parse, "expected four control points at '" + p + "'");
        }
        segs.emplace_back(vec3_from(j[i][0], p + "[0]"), vec3_from(j[i][1], p + "[1]"), vec3_from(j[i][2], p + "[2]"),
                          vec3_from(j[i][3], p + "[3]"));
    }
    return BezierChain(std::move(segs));
}

inline json to_json(const SampledCurve& curve) {
    json pts = json::array();
    for (const auto& p : curve.points()) {
        pts.push_back(to_json(p));
    }
    return json{{"points", pts}, {"params", curve.params()}};
}

inline SampledCurve curve_from(const json& j, const std::string& path) {
    const json& pts = detail::array_field(j, "points", path);
    std::vector<Vec3> points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        points.push_back(vec3_from(pts[i], path + ".points[" + std::to_string(i) + "]"));
    }
    auto params = detail::get<std::vector<double>>(j, "params", path);
    return SampledCurve(std::move(points), std::move(params));
}

inline json to_json(const LaneModel& m) {
    json markings = json::array();
    for (const auto& c : m.markings) {
        markings.push_back(to_json(c));
    }
    return json{{"lane_count", m.lane_count},
                {"detection_range_m", m.detection_range_m},
                {"lane_count_conflict", m.lane_count_conflict},
                {"single_side", m.single_side},
                {"left_boundary", to_json(m.left_boundary)},
                {"right_boundary", to_json(m.right_boundary)},
                {"markings", markings}};
}

inline LaneModel lane_model_from(const json& j, const std::string& path) {
    const json& mk = detail::array_field(j, "markings", path);
    std::vector<SampledCurve> markings;
    for (std::size_t i = 0; i < mk.size(); ++i) {
        markings.push_back(curve_from(mk[i], path + ".markings[" + std::to_string(i) + "]"));
    }
    LaneModel m{chain_from(detail::field(j, "left_boundary", path), path + ".left_boundary"),
                chain_from(detail::field(j, "right_boundary", path), path + ".right_boundary"),
                std::move(markings),
                detail::get<int>(j, "lane_count", path),
                detail::get<double>(j, "detection_range_m", path),
                detail::get_or<bool>(j, "lane_count_conflict", path, false),
                detail::get_or<bool>(j, "single_side", path, false)};
    if (m.lane_count < 1 || m.markings.size() != static_cast<std::size_t>(m.lane_count) + 1) {
        throw Error(ErrorKind::parse, "'" + path + "': markings must number lane_count + 1");
    }
    return m;
}

// ---------------------------------------------------------------------------
// Configuration pieces.

inline json to_json(const RoadLayoutConfig& c) {
    return json{{"lane_width_m", c.lane_width_m},
                {"delineator_offset_m", c.delineator_offset_m},
                {"delineator_spacing_m", c.delineator_spacing_m},
                {"min_confidence", c.min_confidence}};
}

inline RoadLayoutConfig layout_from(const json& j, const std::string& path) {
    RoadLayoutConfig c;
    c.lane_width_m = detail::get_or(j, "lane_width_m", path, c.lane_width_m);
    c.delineator_offset_m = detail::get_or(j, "delineator_offset_m", path, c.delineator_offset_m);
    c.delineator_spacing_m = detail::get_or(j, "delineator_spacing_m", path, c.delineator_spacing_m);
    c.min_confidence = detail::get_or(j, "min_confidence", path, c.min_confidence);
    return c;
}

inline json to_json(const RoadCourse& c) {
    json segs = json::array();
    for (const auto& p : c.segments) {
        if (p.kind == CoursePrimitive::Kind::straight) {
            segs.push_back(json{{"type", "straight"}, {"length_m", p.length_m}});
        } else {
            segs.push_back(json{{"type", "arc"}, {"radius_m", p.radius_m}, {"sweep_rad", p.sweep_rad}});
        }
    }
    return json{{"segments", segs}, {"lane_count", c.lane_count}, {"layout", to_json(c.layout)}};
}

inline RoadCourse course_from(const json& j, const std::string& path) {
    RoadCourse c;
    const json& segs = detail::array_field(j, "segments", path);
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const auto p = path + ".segments[" + std::to_string(i) + "]";
        const auto type = detail::get<std::string>(segs[i], "type", p);
        if (type == "straight") {
            c.segments.push_back(CoursePrimitive::straight(detail::get<double>(segs[i], "length_m", p)));
        } else if (type == "arc") {
            c.segments.push_back(CoursePrimitive::arc(detail::get<double>(segs[i], "radius_m", p),
                                                      detail::get<double>(segs[i], "sweep_rad", p)));
        } else {
            throw Error(ErrorKind::parse, "unknown segment type '" + type + "' at '" + p + "'");
        }
    }
    c.lane_count = detail::get_or(j, "lane_count", path, c.lane_count);
    if (j.contains("layout")) {
        c.layout = layout_from(j["layout"], path + ".layout");
    }
    return c;
}

// Named course shapes for the CLI.
inline RoadCourse course_preset(const std::string& name) {
    RoadCourse c;
    if (name == "straight") {
        c.segments = {CoursePrimitive::straight(400.0)};
    } else if (name == "arc") {
        c.segments = {CoursePrimitive::arc(100.0, 4.0)};
    } else if (name == "s-curve") {
        c.segments = {CoursePrimitive::straight(60.0), CoursePrimitive::arc(150.0, 0.8),
                      CoursePrimitive::arc(150.0, -0.8), CoursePrimitive::straight(60.0)};
    } else {
        throw Error(ErrorKind::config, "unknown course preset '" + name + "'");
    }
    return c;
}

// Everything a CLI run needs; loaded from --config, defaults otherwise.
struct PipelineConfig {
    RoadCourse course = course_preset("straight");
    NoiseConfig noise{};
    CameraModel camera{};
    double extrapolation_m = 10.0;
    double extrapolation_cap_m = 10.0;
    bool allow_long_extrapolation = false;
    double threshold_px = 5.0;
    double threshold_m = 0.10;
    SafetyParams safety{};
    std::uint64_t seed = 0;
    double sensor_range_m = 90.0;
    double eval_range_m = 100.0;
    double gt_step_m = 1.0;
    double ego_speed_mps = 13.89;
    MarkingMode mode = MarkingMode::shift_from_boundaries;
    double marking_step_m = 0.5;
    double tusimple_row_step_px = 10.0;

    const RoadLayoutConfig& layout() const { return course.layout; }

    ExtrapolationPolicy policy() const { return {extrapolation_cap_m, allow_long_extrapolation, marking_step_m}; }

    FitOptions fit_options() const { return {mode, marking_step_m, policy(), 2}; }

    void validate() const {
        course.validate();
        noise.validate();
        camera.validate();
        if (!(threshold_px > 0.0) || !(threshold_m > 0.0)) {
            throw Error(ErrorKind::config, "metric thresholds must be positive");
        }
        if (!(extrapolation_m >= 0.0) || !(extrapolation_cap_m >= 0.0)) {
            throw Error(ErrorKind::config, "extrapolation must be non-negative");
        }
        if (extrapolation_m > extrapolation_cap_m && !allow_long_extrapolation) {
            throw Error(ErrorKind::config, "extrapolation of " + std::to_string(extrapolation_m) +
                                               " m exceeds the " + std::to_string(extrapolation_cap_m) +
                                               " m cap; pass --allow-long-extrapolation to override");
        }
        if (!(sensor_range_m > 0.0) || !(eval_range_m >= 0.0) || !(gt_step_m > 0.0) || !(marking_step_m > 0.0) ||
            !(tusimple_row_step_px > 0.0)) {
            throw Error(ErrorKind::config, "ranges and steps must be positive");
        }
        if (!(ego_speed_mps >= 0.0) || !(safety.reaction_time_s >= 0.0) || !(safety.brake_decel_mps2 > 0.0)) {
            throw Error(ErrorKind::config, "safety parameters out of range");
        }
    }
};

inline json to_json(const PipelineConfig& c) {
    return json{{"version", kFormatVersion},
                {"kind", "config"},
                {"course", to_json(c.course)},
                {"noise",
                 {{"position_sigma_m", c.noise.position_sigma_m},
                  {"dropout_prob", c.noise.dropout_prob},
                  {"false_positive_rate_per_100m", c.noise.false_positive_rate_per_100m}}},
                {"camera",
                 {{"width_px", c.camera.width_px},
                  {"height_px", c.camera.height_px},
                  {"hfov_deg", c.camera.hfov_deg},
                  {"position", to_json(c.camera.position)},
                  {"yaw", c.camera.yaw},
                  {"pitch", c.camera.pitch},
                  {"roll", c.camera.roll}}},
                {"extrapolation_m", c.extrapolation_m},
                {"extrapolation_cap_m", c.extrapolation_cap_m},
                {"allow_long_extrapolation", c.allow_long_extrapolation},
                {"threshold_px", c.threshold_px},
                {"threshold_m", c.threshold_m},
                {"safety", {{"reaction_time_s", c.safety.reaction_time_s}, {"brake_decel_mps2", c.safety.brake_decel_mps2}}},
                {"seed", c.seed},
                {"sensor_range_m", c.sensor_range_m},
                {"eval_range_m", c.eval_range_m},
                {"gt_step_m", c.gt_step_m},
                {"ego_speed_mps", c.ego_speed_mps},
                {"mode", c.mode == MarkingMode::shift_from_boundaries ? "shift" : "midpoint"},
                {"marking_step_m", c.marking_step_m},
                {"tusimple_row_step_px", c.tusimple_row_step_px}};
}

// Missing keys keep their defaults; validation is left to the caller so
// command-line overrides can be applied first.
inline PipelineConfig config_from(const json& j) {
    check_header(j, "config");
    PipelineConfig c;
    const std::string p = "$";
    if (j.contains("course")) {
        const json& cj = j["course"];
        c.course = cj.is_string() ? course_preset(cj.get<std::string>()) : course_from(cj, p + ".course");
        if (cj.is_string() && j.contains("layout")) {
            c.course.layout = layout_from(j["layout"], p + ".layout");
        }
    }
    if (j.contains("noise")) {
        const json& n = j["noise"];
        c.noise.position_sigma_m = detail::get_or(n, "position_sigma_m", p + ".noise", 0.0);
        c.noise.dropout_prob = detail::get_or(n, "dropout_prob", p + ".noise", 0.0);
        c.noise.false_positive_rate_per_100m = detail::get_or(n, "false_positive_rate_per_100m", p + ".noise", 0.0);
    }
    if (j.contains("camera")) {
        const json& cam = j["camera"];
        const auto cp = p + ".camera";
        c.camera.width_px = detail::get_or(cam, "width_px", cp, c.camera.width_px);
        c.camera.height_px = detail::get_or(cam, "height_px", cp, c.camera.height_px);
        c.camera.hfov_deg = detail::get_or(cam, "hfov_deg", cp, c.camera.hfov_deg);
        if (cam.contains("position")) {
            c.camera.position = vec3_from(cam["position"], cp + ".position");
        }
        c.camera.yaw = detail::get_or(cam, "yaw", cp, 0.0);
        c.camera.pitch = detail::get_or(cam, "pitch", cp, 0.0);
        c.camera.roll = detail::get_or(cam, "roll", cp, 0.0);
    }
    c.extrapolation_m = detail::get_or(j, "extrapolation_m", p, c.extrapolation_m);
    c.extrapolation_cap_m = detail::get_or(j, "extrapolation_cap_m", p, c.extrapolation_cap_m);
    c.allow_long_extrapolation = detail::get_or(j, "allow_long_extrapolation", p, false);
    c.threshold_px = detail::get_or(j, "threshold_px", p, c.threshold_px);
    c.threshold_m = detail::get_or(j, "threshold_m", p, c.threshold_m);
    if (j.contains("safety")) {
        c.safety.reaction_time_s = detail::get_or(j["safety"], "reaction_time_s", p + ".safety", 1.0);
        c.safety.brake_decel_mps2 = detail::get_or(j["safety"], "brake_decel_mps2", p + ".safety", 4.0);
    }
    c.seed = detail::get_or<std::uint64_t>(j, "seed", p, 0);
    c.sensor_range_m = detail::get_or(j, "sensor_range_m", p, c.sensor_range_m);
    c.eval_range_m = detail::get_or(j, "eval_range_m", p, c.eval_range_m);
    c.gt_step_m = detail::get_or(j, "gt_step_m", p, c.gt_step_m);
    c.ego_speed_mps = detail::get_or(j, "ego_speed_mps", p, c.ego_speed_mps);
    const auto mode = detail::get_or<std::string>(j, "mode", p, "shift");
    if (mode == "shift") {
        c.mode = MarkingMode::shift_from_boundaries;
    } else if (mode == "midpoint") {
        c.mode = MarkingMode::midpoint_centerline;
    } else {
        throw Error(ErrorKind::config, "unknown marking mode '" + mode + "'");
    }
    c.marking_step_m = detail::get_or(j, "marking_step_m", p, c.marking_step_m);
    c.tusimple_row_step_px = detail::get_or(j, "tusimple_row_step_px", p, c.tusimple_row_step_px);
    return c;
}

// ---------------------------------------------------------------------------
// Dataset: frame records referencing one analytic course.

struct FrameRecord {
    long long frame_id = 0;
    double ego_arclength = 0.0;
    std::uint64_t scene_seed = 0;
    double ego_speed_mps = 13.89;
    std::vector<DelineatorDetection> detections;

    friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct Dataset {
    RoadCourse course;
    std::vector<FrameRecord> frames;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline std::string side_name(Side s) {
    return s == Side::left ? "left" : (s == Side::right ? "right" : "unknown");
}

inline Side side_from(const std::string& s, const std::string& path) {
    if (s == "left") return Side::left;
    if (s == "right") return Side::right;
    if (s == "unknown") return Side::unknown;
    throw Error(ErrorKind::parse, "bad side_hint '" + s + "' at '" + path + "'");
}

inline json to_json(const Dataset& d) {
    json doc = header("dataset");
    doc["course"] = to_json(d.course);
    json frames = json::array();
    for (const auto& f : d.frames) {
        json dets = json::array();
        for (const auto& det : f.detections) {
            dets.push_back(json{{"position", to_json(det.position)},
                                {"confidence", det.confidence},
                                {"side_hint", side_name(det.side_hint)}});
        }
        frames.push_back(json{{"frame_id", f.frame_id},
                              {"scene", {{"ego_arclength", f.ego_arclength}, {"seed", f.scene_seed}}},
                              {"ego_speed_mps", f.ego_speed_mps},
                              {"detections", dets}});
    }
    doc["frames"] = frames;
    return doc;
}

inline Dataset dataset_from(const json& doc) {
    check_header(doc, "dataset");
    Dataset d;
    d.course = course_from(detail::field(doc, "course", "$"), "$.course");
    const json& frames = detail::array_field(doc, "frames", "$");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto p = "$.frames[" + std::to_string(i) + "]";
        FrameRecord f;
        f.frame_id = detail::get<long long>(frames[i], "frame_id", p);
        const json& scene = detail::field(frames[i], "scene", p);
        f.ego_arclength = detail::get<double>(scene, "ego_arclength", p + ".scene");
        f.scene_seed = detail::get<std::uint64_t>(scene, "seed", p + ".scene");
        f.ego_speed_mps = detail::get<double>(frames[i], "ego_speed_mps", p);
        const json& dets = detail::array_field(frames[i], "detections", p);
        for (std::size_t k = 0; k < dets.size(); ++k) {
            const auto dp = p + ".detections[" + std::to_string(k) + "]";
            DelineatorDetection det;
            det.position = vec3_from(detail::field(dets[k], "position", dp), dp + ".position");
            det.confidence = detail::get<double>(dets[k], "confidence", dp);
            det.side_hint = side_from(detail::get_or<std::string>(dets[k], "side_hint", dp, "unknown"), dp);
            if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
                throw Error(ErrorKind::parse, "confidence outside [0, 1] at '" + dp + "'");
            }
            f.detections.push_back(det);
        }
        for (const auto& prev : d.frames) {
            if (prev.frame_id == f.frame_id) {
                throw Error(ErrorKind::parse, "duplicate frame_id " + std::to_string(f.frame_id));
            }
        }
        d.frames.push_back(std::move(f));
    }
    return d;
}

// ---------------------------------------------------------------------------
// Lane models, one entry per frame; failed fits keep their error tag.

struct ModelRecord {
    long long frame_id = 0;
    std::optional<LaneModel> model;
    std::string error_kind;
    std::string error_message;
    double runtime_ms = 0.0;
};

struct ModelsFile {
    std::vector<ModelRecord> frames;
    std::optional<RuntimeStats> runtime;
};

inline json to_json(const RuntimeStats& r) {
    return json{{"mean_ms", r.mean_ms}, {"sigma_ms", r.sigma_ms}, {"q95_ms", r.q95_ms}};
}

inline RuntimeStats runtime_from(const json& j, const std::string& path) {
    return {detail::get<double>(j, "mean_ms", path), detail::get<double>(j, "sigma_ms", path),
            detail::get<double>(j, "q95_ms", path)};
}

inline json to_json(const ModelsFile& m) {
    json doc = header("models");
    json frames = json::array();
    for (const auto& f : m.frames) {
        json entry{{"frame_id", f.frame_id}, {"runtime_ms", f.runtime_ms}};
        if (f.model) {
            entry["status"] = "ok";
            entry["model"] = to_json(*f.model);
        } else {
            entry["status"] = "error";
            entry["error"] = {{"kind", f.error_kind}, {"message", f.error_message}};
        }
        frames.push_back(std::move(entry));
    }
    doc["frames"] = frames;
    doc["runtime"] = m.runtime ? to_json(*m.runtime) : json(nullptr);
    return doc;
}

inline ModelsFile models_from(const json& doc) {
    check_header(doc, "models");
    ModelsFile m;
    const json& frames = detail::array_field(doc, "frames", "$");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto p = "$.frames[" + std::to_string(i) + "]";
        ModelRecord r;
        r.frame_id = detail::get<long long>(frames[i], "frame_id", p);
        r.runtime_ms = detail::get_or(frames[i], "runtime_ms", p, 0.0);
        const auto status = detail::get<std::string>(frames[i], "status", p);
        if (status == "ok") {
            r.model = lane_model_from(detail::field(frames[i], "model", p), p + ".model");
        } else if (status == "error") {
            const json& e = detail::field(frames[i], "error", p);
            r.error_kind = detail::get<std::string>(e, "kind", p + ".error");
            r.error_message = detail::get_or<std::string>(e, "message", p + ".error", "");
        } else {
            throw Error(ErrorKind::parse, "bad status '" + status + "' at '" + p + "'");
        }
        m.frames.push_back(std::move(r));
    }
    if (doc.contains("runtime") && !doc["runtime"].is_null()) {
        m.runtime = runtime_from(doc["runtime"], "$.runtime");
    }
    return m;
}

// ---------------------------------------------------------------------------
// Evaluation report.

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const EvalReport& r, double threshold_px, double threshold_m) {
    json doc = header("report");
    doc["thresholds"] = {{"px", threshold_px}, {"m", threshold_m}};
    doc["aggregate"] = {{"acc2d", optional_number(r.acc2d)},
                        {"acc3d", r.acc3d},
                        {"safety", r.safety},
                        {"detection_range_m", r.detection_range_m},
                        {"frames_ok", r.frames_ok},
                        {"frames_failed", r.frames_failed}};
    doc["runtime"] = r.runtime ? to_json(*r.runtime) : json(nullptr);
    json frames = json::array();
    for (const auto& f : r.frames) {
        json per = json::array();
        for (const auto& c : f.per_marking) {
            per.push_back({{"hits", c.hits}, {"total", c.total}, {"accuracy", optional_number(c.ratio())}});
        }
        frames.push_back({{"frame_id", f.frame_id},
                          {"status", f.ok ? "ok" : "error"},
                          {"error", f.error},
                          {"acc2d", optional_number(f.acc2d)},
                          {"acc3d", f.acc3d},
                          {"safety", f.safety},
                          {"detection_range_m", f.detection_range_m},
                          {"per_marking", per}});
    }
    doc["frames"] = frames;
    return doc;
}

inline EvalReport report_from(const json& doc) {
    check_header(doc, "report");
    const json& agg = detail::field(doc, "aggregate", "$");
    EvalReport r;
    if (!detail::field(agg, "acc2d", "$.aggregate").is_null()) {
        r.acc2d = detail::get<double>(agg, "acc2d", "$.aggregate");
    }
    r.acc3d = detail::get<double>(agg, "acc3d", "$.aggregate");
    r.safety = detail::get<double>(agg, "safety", "$.aggregate");
    r.detection_range_m = detail::get<double>(agg, "detection_range_m", "$.aggregate");
    r.frames_ok = detail::get<std::size_t>(agg, "frames_ok", "$.aggregate");
    r.frames_failed = detail::get<std::size_t>(agg, "frames_failed", "$.aggregate");
    if (doc.contains("runtime") && !doc["runtime"].is_null()) {
        r.runtime = runtime_from(doc["runtime"], "$.runtime");
    }
    const json& frames = detail::array_field(doc, "frames", "$");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto p = "$.frames[" + std::to_string(i) + "]";
        FrameScore f;
        f.frame_id = detail::get<long long>(frames[i], "frame_id", p);
        f.ok = detail::get<std::string>(frames[i], "status", p) == "ok";
        f.error = detail::get_or<std::string>(frames[i], "error", p, "");
        if (!detail::field(frames[i], "acc2d", p).is_null()) {
            f.acc2d = detail::get<double>(frames[i], "acc2d", p);
        }
        f.acc3d = detail::get<double>(frames[i], "acc3d", p);
        f.safety = detail::get<double>(frames[i], "safety", p);
        f.detection_range_m = detail::get<double>(frames[i], "detection_range_m", p);
        for (const auto& c : detail::array_field(frames[i], "per_marking", p)) {
            f.per_marking.push_back({c.at("hits").get<std::size_t>(), c.at("total").get<std::size_t>()});
        }
        r.frames.push_back(std::move(f));
    }
    return r;
}

// ---------------------------------------------------------------------------
// TuSimple-style keypoint export: per marking, the image column at each of a
// fixed set of rows, -2 where the marking does not reach the row.

inline std::vector<double> tusimple_rows(const CameraModel& camera, double step_px) {
    const double horizon = 0.5 * camera.height_px - camera.focal_px() * std::tan(camera.pitch);
    const double first = (std::floor(std::max(horizon, 0.0) / step_px) + 1.0) * step_px;
    std::vector<double> rows;
    for (double v = first; v < camera.height_px; v += step_px) {
        rows.push_back(v);
    }
    return rows;
}

inline std::vector<std::vector<double>> tusimple_lanes(const LaneModel& model, const CameraModel& camera,
                                                       std::span<const double> rows) {
    std::vector<std::vector<double>> lanes;
    for (const auto& m : model.markings) {
        std::vector<std::optional<Pixel>> line;
        for (const auto& p : m.points()) {
            line.push_back(project(camera, p));
        }
        std::vector<double> cols;
        for (double v : rows) {
            const auto u = column_at_row(line, v, 0.5 * camera.width_px);
            cols.push_back(u && *u >= 0.0 && *u <= camera.width_px ? *u : -2.0);
        }
        lanes.push_back(std::move(cols));
    }
    return lanes;
}

inline json tusimple_export(const ModelsFile& models, const CameraModel& camera, double step_px) {
    json doc = header("tusimple");
    const auto rows = tusimple_rows(camera, step_px);
    doc["h_samples"] = rows;
    json frames = json::array();
    for (const auto& f : models.frames) {
        json lanes = json::array();
        if (f.model) {
            lanes = tusimple_lanes(*f.model, camera, rows);
        }
        frames.push_back({{"frame_id", f.frame_id}, {"lanes", lanes}});
    }
    doc["frames"] = frames;
    return doc;
}

}  // namespace delin::io
