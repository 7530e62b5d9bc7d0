#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "lane_builder.hpp"
#include "polyline.hpp"
#include "vec3.hpp"

namespace delin {

// Thresholds are inclusive; this slack absorbs representation error of
// values that sit exactly on the boundary (e.g. 3.6 - 3.5 vs 0.1).
inline constexpr double kThresholdSlack = 1e-9;

// Ideal pinhole camera. Orientation is yaw (about z), then pitch (about y,
// positive pitches the optical axis down), then roll (about x).
struct CameraModel {
    int width_px = 1920;
    int height_px = 1080;
    double hfov_deg = 110.0;
    Vec3 position{0.0, 0.0, 1.6};
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;

    void validate() const {
        if (width_px <= 0 || height_px <= 0) {
            throw Error(ErrorKind::config, "camera image size must be positive");
        }
        if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) {
            throw Error(ErrorKind::config, "camera hfov must lie in (0, 180) degrees");
        }
    }

    double focal_px() const { return 0.5 * width_px / std::tan(0.5 * hfov_deg * std::numbers::pi / 180.0); }

    friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

struct Pixel {
    double u = 0.0;
    double v = 0.0;
};

// nullopt marks points on or behind the image plane.
inline std::optional<Pixel> project(const CameraModel& camera, const Vec3& p) {
    Vec3 d = p - camera.position;
    // Undo yaw, pitch, roll in turn: body = Rx^T Ry^T Rz^T d.
    const double cy = std::cos(camera.yaw), sy = std::sin(camera.yaw);
    d = {cy * d.x + sy * d.y, -sy * d.x + cy * d.y, d.z};
    const double cp = std::cos(camera.pitch), sp = std::sin(camera.pitch);
    d = {cp * d.x - sp * d.z, d.y, sp * d.x + cp * d.z};
    const double cr = std::cos(camera.roll), sr = std::sin(camera.roll);
    d = {d.x, cr * d.y + sr * d.z, -sr * d.y + cr * d.z};
    if (d.x <= 1e-9) {
        return std::nullopt;
    }
    const double f = camera.focal_px();
    return Pixel{0.5 * camera.width_px - f * d.y / d.x, 0.5 * camera.height_px - f * d.z / d.x};
}

inline bool in_image(const CameraModel& camera, const Pixel& px) {
    return px.u >= 0.0 && px.u <= camera.width_px && px.v >= 0.0 && px.v <= camera.height_px;
}

// Column of a projected polyline at image row v, closest to `near_u` when
// the polyline crosses the row more than once.
inline std::optional<double> column_at_row(std::span<const std::optional<Pixel>> line, double v, double near_u) {
    std::optional<double> best;
    auto consider = [&](double u) {
        if (!best || std::abs(u - near_u) < std::abs(*best - near_u)) {
            best = u;
        }
    };
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        if (!line[i] || !line[i + 1]) {
            continue;
        }
        const Pixel& a = *line[i];
        const Pixel& b = *line[i + 1];
        if (v < std::min(a.v, b.v) || v > std::max(a.v, b.v)) {
            continue;
        }
        if (a.v == b.v) {
            consider(a.u);
            consider(b.u);
        } else {
            consider(a.u + (v - a.v) / (b.v - a.v) * (b.u - a.u));
        }
    }
    return best;
}

namespace detail {

inline double representative_lateral(std::span<const Vec3> pts) {
    double best = std::numeric_limits<double>::infinity();
    double lateral = 0.0;
    for (const auto& p : pts) {
        const double r = std::hypot(p.x, p.y);
        if (r < best) {
            best = r;
            lateral = p.y;
        }
    }
    return lateral;
}

}  // namespace detail

// Maps each ground-truth marking (left to right) to a predicted marking.
// Equal counts pair by order; otherwise an order-preserving assignment with
// least total lateral mismatch leaves the surplus unmatched.
inline std::vector<std::optional<std::size_t>> match_markings(const std::vector<std::vector<Vec3>>& pred,
                                                              const std::vector<std::vector<Vec3>>& gt) {
    const std::size_t n = gt.size();
    const std::size_t m = pred.size();
    std::vector<std::optional<std::size_t>> out(n);
    if (n == m) {
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = i;
        }
        return out;
    }
    if (m == 0) {
        return out;
    }
    std::vector<double> lg(n);
    std::vector<double> lp(m);
    for (std::size_t i = 0; i < n; ++i) {
        lg[i] = detail::representative_lateral(gt[i]);
    }
    for (std::size_t j = 0; j < m; ++j) {
        lp[j] = detail::representative_lateral(pred[j]);
    }
    // cost[i][j]: best over the first i gt and first j pred with min(i, j) pairs.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> cost(n + 1, std::vector<double>(m + 1, inf));
    for (std::size_t i = 0; i <= n; ++i) {
        for (std::size_t j = 0; j <= m; ++j) {
            if (i == 0 || j == 0) {
                cost[i][j] = 0.0;
                continue;
            }
            double c = cost[i - 1][j - 1] + std::abs(lg[i - 1] - lp[j - 1]);
            if (i > j) {
                c = std::min(c, cost[i - 1][j]);
            }
            if (j > i) {
                c = std::min(c, cost[i][j - 1]);
            }
            cost[i][j] = c;
        }
    }
    std::size_t i = n;
    std::size_t j = m;
    while (i > 0 && j > 0) {
        const double pair = cost[i - 1][j - 1] + std::abs(lg[i - 1] - lp[j - 1]);
        if (cost[i][j] == pair) {
            out[i - 1] = j - 1;
            --i;
            --j;
        } else if (i > j) {
            --i;
        } else {
            --j;
        }
    }
    return out;
}

inline std::vector<std::vector<Vec3>> marking_points(const LaneModel& model) {
    std::vector<std::vector<Vec3>> out;
    out.reserve(model.markings.size());
    for (const auto& m : model.markings) {
        out.push_back(m.points());
    }
    return out;
}

struct Counts {
    std::size_t hits = 0;
    std::size_t total = 0;

    std::optional<double> ratio() const {
        return total == 0 ? std::nullopt : std::optional<double>(static_cast<double>(hits) / total);
    }
};

// TuSimple-style per-row hit counting over every visible ground-truth sample.
inline Counts accuracy_2d_counts(const std::vector<std::vector<Vec3>>& pred, const std::vector<std::vector<Vec3>>& gt,
                                 const CameraModel& camera, double threshold_px = 5.0) {
    camera.validate();
    if (!(threshold_px > 0.0)) {
        throw Error(ErrorKind::domain, "accuracy_2d: threshold must be positive");
    }
    const auto match = match_markings(pred, gt);
    Counts counts;
    for (std::size_t g = 0; g < gt.size(); ++g) {
        std::vector<std::optional<Pixel>> line;
        if (match[g]) {
            for (const auto& p : pred[*match[g]]) {
                line.push_back(project(camera, p));
            }
        }
        for (const auto& p : gt[g]) {
            const auto px = project(camera, p);
            if (!px || !in_image(camera, *px)) {
                continue;
            }
            ++counts.total;
            const auto u = column_at_row(line, px->v, px->u);
            if (u && std::abs(*u - px->u) <= threshold_px + kThresholdSlack) {
                ++counts.hits;
            }
        }
    }
    return counts;
}

// Fraction of visible ground-truth samples matched within threshold_px;
// absent when no ground-truth sample is visible.
inline std::optional<double> accuracy_2d(const LaneModel& pred, const std::vector<std::vector<Vec3>>& gt,
                                         const CameraModel& camera, double threshold_px = 5.0) {
    return accuracy_2d_counts(marking_points(pred), gt, camera, threshold_px).ratio();
}

struct Accuracy3dOptions {
    double lateral_threshold_m = 0.10;
    double step_m = 1.0;
    double eval_range_m = 100.0;
    // Count only ground truth inside the predicted extent instead of the
    // full evaluation range.
    bool restrict_to_prediction = false;
};

struct Accuracy3d {
    double accuracy = 0.0;
    Counts counts;
    std::vector<Counts> per_marking;
    bool empty_prediction = false;
};

inline Accuracy3d accuracy_3d_points(const std::vector<std::vector<Vec3>>& pred,
                                     const std::vector<std::vector<Vec3>>& gt, const Accuracy3dOptions& options = {}) {
    if (!(options.lateral_threshold_m > 0.0) || !(options.step_m > 0.0)) {
        throw Error(ErrorKind::domain, "accuracy_3d: threshold and step must be positive");
    }
    Accuracy3d result;
    result.per_marking.resize(gt.size());
    if (pred.empty()) {
        result.empty_prediction = true;
        return result;
    }
    const auto match = match_markings(pred, gt);
    for (std::size_t g = 0; g < gt.size(); ++g) {
        const auto samples = polyline::resample(gt[g], options.step_m, options.eval_range_m);
        Counts& counts = result.per_marking[g];
        const std::vector<Vec3>* line = match[g] ? &pred[*match[g]] : nullptr;
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        if (options.restrict_to_prediction) {
            if (!line || line->size() < 2 || samples.size() < 2) {
                continue;
            }
            lo = polyline::project(samples, line->front(), true).along;
            hi = polyline::project(samples, line->back(), true).along;
            if (lo > hi) {
                std::swap(lo, hi);
            }
        }
        double station = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (i > 0) {
                station += horizontal_distance(samples[i - 1], samples[i]);
            }
            if (station < lo - 1e-9 || station > hi + 1e-9) {
                continue;
            }
            ++counts.total;
            if (!line) {
                continue;
            }
            const Vec3 dir = samples.size() > 1 ? polyline::direction_at(samples, i) : Vec3{1.0, 0.0, 0.0};
            const Vec3 across{-dir.y, dir.x, 0.0};
            const auto lambda = polyline::crossing(*line, samples[i], across);
            if (lambda && std::abs(*lambda) <= options.lateral_threshold_m + kThresholdSlack) {
                ++counts.hits;
            }
        }
        result.counts.hits += counts.hits;
        result.counts.total += counts.total;
    }
    result.accuracy = result.counts.ratio().value_or(0.0);
    return result;
}

// Share of ground-truth samples whose lateral distance to the matched
// predicted marking is within the threshold.
inline Accuracy3d accuracy_3d(const LaneModel& pred, const std::vector<std::vector<Vec3>>& gt,
                              const Accuracy3dOptions& options = {}) {
    return accuracy_3d_points(marking_points(pred), gt, options);
}

struct SafetyParams {
    double reaction_time_s = 1.0;
    double brake_decel_mps2 = 4.0;

    double required_range(double speed_mps) const {
        return speed_mps * reaction_time_s + speed_mps * speed_mps / (2.0 * brake_decel_mps2);
    }

    friend bool operator==(const SafetyParams&, const SafetyParams&) = default;
};

// Lateral accuracy inside the predicted extent times detection-range
// sufficiency against the stopping distance at ego speed.
inline double safety_score(const LaneModel& pred, const std::vector<std::vector<Vec3>>& gt, double ego_speed_mps,
                           double lateral_threshold_m = 0.10, const SafetyParams& params = {},
                           Accuracy3dOptions options = {}) {
    if (!(ego_speed_mps >= 0.0)) {
        throw Error(ErrorKind::domain, "safety_score: speed must be non-negative");
    }
    options.lateral_threshold_m = lateral_threshold_m;
    options.restrict_to_prediction = true;
    const double lateral = accuracy_3d(pred, gt, options).accuracy;
    const double required = params.required_range(ego_speed_mps);
    const double range = required <= 0.0 ? 1.0 : std::min(1.0, pred.detection_range_m / required);
    return lateral * range;
}

struct RuntimeStats {
    double mean_ms = 0.0;
    double sigma_ms = 0.0;
    double q95_ms = 0.0;
};

// Mean, population standard deviation, nearest-rank 95th percentile.
inline RuntimeStats runtime_stats(std::span<const double> samples_ms) {
    if (samples_ms.empty()) {
        throw Error(ErrorKind::insufficient_input, "runtime_stats: no samples");
    }
    const double n = static_cast<double>(samples_ms.size());
    double mean = 0.0;
    for (double s : samples_ms) {
        mean += s;
    }
    mean /= n;
    double var = 0.0;
    for (double s : samples_ms) {
        var += (s - mean) * (s - mean);
    }
    std::vector<double> sorted(samples_ms.begin(), samples_ms.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t rank = (95 * sorted.size() + 99) / 100;
    return {mean, std::sqrt(var / n), sorted[std::max<std::size_t>(rank, 1) - 1]};
}

struct FrameScore {
    long long frame_id = 0;
    bool ok = true;
    std::string error;  // error tag when the fit failed
    std::optional<double> acc2d;
    double acc3d = 0.0;
    double safety = 0.0;
    double detection_range_m = 0.0;
    std::vector<Counts> per_marking;
};

struct EvalReport {
    std::optional<double> acc2d;
    double acc3d = 0.0;
    double safety = 0.0;
    double detection_range_m = 0.0;
    std::size_t frames_ok = 0;
    std::size_t frames_failed = 0;
    std::vector<FrameScore> frames;
    std::optional<RuntimeStats> runtime;
};

// Means over frames; failed frames contribute zero scores, acc2d averages
// only frames where it is defined.
inline EvalReport aggregate(std::vector<FrameScore> frames, std::optional<RuntimeStats> runtime = std::nullopt) {
    EvalReport r;
    double acc2d_sum = 0.0;
    std::size_t acc2d_n = 0;
    for (const auto& f : frames) {
        (f.ok ? r.frames_ok : r.frames_failed) += 1;
        r.acc3d += f.acc3d;
        r.safety += f.safety;
        r.detection_range_m += f.detection_range_m;
        if (f.acc2d) {
            acc2d_sum += *f.acc2d;
            ++acc2d_n;
        }
    }
    if (!frames.empty()) {
        const double n = static_cast<double>(frames.size());
        r.acc3d /= n;
        r.safety /= n;
        r.detection_range_m /= n;
    }
    if (acc2d_n > 0) {
        r.acc2d = acc2d_sum / static_cast<double>(acc2d_n);
    }
    r.frames = std::move(frames);
    r.runtime = runtime;
    return r;
}

}  // namespace delin
