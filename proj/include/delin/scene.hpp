#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "chain.hpp"
#include "error.hpp"
#include "lane_builder.hpp"
#include "vec3.hpp"

namespace delin {

// Smallest arc radius accepted for a rural-road course.
inline constexpr double kMinCourseRadius = 50.0;

struct CoursePrimitive {
    enum class Kind { straight, arc };

    Kind kind = Kind::straight;
    double length_m = 0.0;   // straight only
    double radius_m = 0.0;   // arc only
    double sweep_rad = 0.0;  // arc only; positive turns left

    static CoursePrimitive straight(double length) { return {Kind::straight, length, 0.0, 0.0}; }
    static CoursePrimitive arc(double radius, double sweep) { return {Kind::arc, 0.0, radius, sweep}; }

    double length() const { return kind == Kind::straight ? length_m : radius_m * std::abs(sweep_rad); }
    double curvature() const { return kind == Kind::straight ? 0.0 : std::copysign(1.0 / radius_m, sweep_rad); }

    friend bool operator==(const CoursePrimitive&, const CoursePrimitive&) = default;
};

struct Pose2 {
    Vec3 position;
    double heading = 0.0;
};

// Road centerline built from lines and arcs, starting at the world origin
// heading +x. Lanes are centered on the centerline.
struct RoadCourse {
    std::vector<CoursePrimitive> segments;
    int lane_count = 2;
    RoadLayoutConfig layout{};

    void validate() const {
        layout.validate();
        if (segments.empty()) {
            throw Error(ErrorKind::config, "course has no segments");
        }
        if (lane_count < 1) {
            throw Error(ErrorKind::config, "course lane_count must be positive");
        }
        for (const auto& p : segments) {
            if (p.kind == CoursePrimitive::Kind::straight) {
                if (!(p.length_m > 0.0) || !std::isfinite(p.length_m)) {
                    throw Error(ErrorKind::config, "straight length must be positive");
                }
            } else {
                if (!(p.radius_m >= kMinCourseRadius) || !std::isfinite(p.radius_m)) {
                    throw Error(ErrorKind::config, "arc radius " + std::to_string(p.radius_m) + " m is below " +
                                                       std::to_string(kMinCourseRadius) + " m");
                }
                if (p.sweep_rad == 0.0 || !std::isfinite(p.sweep_rad)) {
                    throw Error(ErrorKind::config, "arc sweep must be nonzero");
                }
            }
        }
    }

    double total_length() const {
        double total = 0.0;
        for (const auto& p : segments) {
            total += p.length();
        }
        return total;
    }

    double half_width() const { return 0.5 * lane_count * layout.lane_width_m; }

    // Lateral offsets of the n + 1 markings, left to right.
    std::vector<double> marking_offsets() const {
        std::vector<double> out;
        for (int k = 0; k <= lane_count; ++k) {
            out.push_back(half_width() - k * layout.lane_width_m);
        }
        return out;
    }

    Pose2 pose_at(double station) const {
        Vec3 pos{};
        double heading = 0.0;
        double remaining = std::clamp(station, 0.0, total_length());
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const auto& p = segments[i];
            const double len = p.length();
            const double u = (i + 1 == segments.size()) ? remaining : std::min(remaining, len);
            if (p.kind == CoursePrimitive::Kind::straight) {
                pos += u * Vec3{std::cos(heading), std::sin(heading), 0.0};
            } else {
                const double k = p.curvature();
                const double h1 = heading + k * u;
                pos += Vec3{(std::sin(h1) - std::sin(heading)) / k, (std::cos(heading) - std::cos(h1)) / k, 0.0};
                heading = h1;
            }
            remaining -= u;
            if (remaining <= 0.0) {
                break;
            }
        }
        return {pos, heading};
    }

    // World point at `station` shifted `lateral` meters to the left.
    Vec3 point_at(double station, double lateral) const {
        const auto pose = pose_at(station);
        return pose.position + lateral * Vec3{-std::sin(pose.heading), std::cos(pose.heading), 0.0};
    }

    // Centerline station where the line at `lateral` has run `along` meters.
    double station_for(double lateral, double along) const {
        double station = 0.0;
        for (const auto& p : segments) {
            const double stretch = 1.0 - p.curvature() * lateral;
            const double len = p.length() * stretch;
            if (along <= len) {
                return station + along / stretch;
            }
            along -= len;
            station += p.length();
        }
        return station;
    }

    double length_at(double lateral) const {
        double total = 0.0;
        for (const auto& p : segments) {
            total += p.length() * (1.0 - p.curvature() * lateral);
        }
        return total;
    }

    friend bool operator==(const RoadCourse&, const RoadCourse&) = default;
};

struct RoadScene {
    RoadCourse course;
    double ego_arclength = 0.0;
    Pose2 ego_pose;  // world frame
    double ego_speed_mps = 13.89;
    std::uint64_t seed = 0;
    std::vector<SampledCurve> gt_markings;  // ego frame, left to right
    std::vector<Vec3> delineators_left;     // ego frame, along the road
    std::vector<Vec3> delineators_right;
    std::vector<double> stations_left;  // centerline station of each post
    std::vector<double> stations_right;

    Vec3 to_ego(const Vec3& world) const {
        const double c = std::cos(ego_pose.heading);
        const double s = std::sin(ego_pose.heading);
        const Vec3 d = world - ego_pose.position;
        return {c * d.x + s * d.y, -s * d.x + c * d.y, d.z};
    }

    Vec3 to_world(const Vec3& ego) const {
        const double c = std::cos(ego_pose.heading);
        const double s = std::sin(ego_pose.heading);
        return ego_pose.position + Vec3{c * ego.x - s * ego.y, s * ego.x + c * ego.y, ego.z};
    }
};

struct NoiseConfig {
    double position_sigma_m = 0.0;  // per-axis Gaussian
    double dropout_prob = 0.0;
    double false_positive_rate_per_100m = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(position_sigma_m >= 0.0) || !(dropout_prob >= 0.0 && dropout_prob < 1.0) ||
            !(false_positive_rate_per_100m >= 0.0)) {
            throw Error(ErrorKind::config, "noise parameters out of range");
        }
    }

    friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

// Position sigma presets, meters: LiDAR-like to camera-like detector error.
inline constexpr double kSigmaLidar = 0.05;
inline constexpr double kSigmaStereo = 0.15;
inline constexpr double kSigmaMono = 0.30;

namespace detail {

inline constexpr double kGroundTruthStep = 1.0;

}  // namespace detail

inline RoadScene generate_scene(const RoadCourse& course, double ego_arclength, std::uint64_t rng_seed,
                                double ego_speed_mps = 13.89) {
    course.validate();
    const double total = course.total_length();
    if (!(ego_arclength >= 0.0 && ego_arclength <= total)) {
        throw Error(ErrorKind::range_policy, "ego station " + std::to_string(ego_arclength) +
                                                 " m lies outside the course [0, " + std::to_string(total) + "]");
    }
    RoadScene scene;
    scene.course = course;
    scene.ego_arclength = ego_arclength;
    scene.ego_pose = course.pose_at(ego_arclength);
    scene.ego_speed_mps = ego_speed_mps;
    scene.seed = rng_seed;

    std::vector<double> stations;
    for (std::size_t k = 0;; ++k) {
        const double s = static_cast<double>(k) * detail::kGroundTruthStep;
        if (s >= total) {
            break;
        }
        stations.push_back(s);
    }
    stations.push_back(total);
    for (double lateral : course.marking_offsets()) {
        std::vector<Vec3> pts;
        pts.reserve(stations.size());
        for (double s : stations) {
            pts.push_back(scene.to_ego(course.point_at(s, lateral)));
        }
        scene.gt_markings.emplace_back(std::move(pts), stations);
    }

    // Posts are spaced along their outer marking and stand outside it.
    const double spacing = course.layout.delineator_spacing_m;
    const double post_lateral = course.half_width() + course.layout.delineator_offset_m;
    auto place = [&](double marking_lateral, double post_offset, std::vector<Vec3>& out,
                     std::vector<double>& stations) {
        const double len = course.length_at(marking_lateral);
        for (std::size_t k = 0;; ++k) {
            const double along = static_cast<double>(k) * spacing;
            if (along > len + 1e-9) {
                break;
            }
            const double s = course.station_for(marking_lateral, along);
            out.push_back(scene.to_ego(course.point_at(s, post_offset)));
            stations.push_back(s);
        }
    };
    place(course.half_width(), post_lateral, scene.delineators_left, scene.stations_left);
    place(-course.half_width(), -post_lateral, scene.delineators_right, scene.stations_right);
    return scene;
}

// Noisy detector output for posts ahead of the ego within `max_range_m`.
// Every post consumes the same random draws whether or not it survives, so
// runs that differ only in sigma or dropout stay coupled.
inline std::vector<DelineatorDetection> simulate_detections(const RoadScene& scene, const NoiseConfig& noise,
                                                            double max_range_m) {
    noise.validate();
    if (!(max_range_m > 0.0)) {
        throw Error(ErrorKind::domain, "simulate_detections: range must be positive");
    }
    std::seed_seq seq{static_cast<std::uint32_t>(noise.seed), static_cast<std::uint32_t>(noise.seed >> 32),
                      static_cast<std::uint32_t>(scene.seed), static_cast<std::uint32_t>(scene.seed >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Range is centerline arc length ahead of the ego.
    auto in_range = [&](double station) {
        const double ahead = station - scene.ego_arclength;
        return ahead >= -1e-6 && ahead <= max_range_m + 1e-9;
    };

    std::vector<DelineatorDetection> out;
    for (const auto& [posts, stations] : {std::pair{&scene.delineators_left, &scene.stations_left},
                                          std::pair{&scene.delineators_right, &scene.stations_right}}) {
        for (std::size_t i = 0; i < posts->size(); ++i) {
            const double u = unit(rng);
            const Vec3 z{gauss(rng), gauss(rng), gauss(rng)};
            if (!in_range((*stations)[i]) || u < noise.dropout_prob) {
                continue;
            }
            out.push_back({(*posts)[i] + noise.position_sigma_m * z, 1.0, Side::unknown});
        }
    }

    if (noise.false_positive_rate_per_100m > 0.0) {
        const auto& course = scene.course;
        const double from = scene.ego_arclength;
        const double to = std::min(course.total_length(), from + max_range_m);
        const double mean = noise.false_positive_rate_per_100m * (to - from) / 100.0;
        if (mean > 0.0) {
            const int count = std::poisson_distribution<int>(mean)(rng);
            const double corridor = course.half_width() + course.layout.delineator_offset_m + 10.0;
            std::uniform_real_distribution<double> along(from, to);
            std::uniform_real_distribution<double> across(-corridor, corridor);
            for (int i = 0; i < count; ++i) {
                const double s = along(rng);
                const double l = across(rng);
                const double conf = unit(rng);
                out.push_back({scene.to_ego(course.point_at(s, l)), conf, Side::unknown});
            }
        }
    }
    return out;
}

// Analytic marking points every `step_m` of centerline station from the ego
// up to `range_m` ahead (clipped at the course end), ego frame, left to right.
inline std::vector<std::vector<Vec3>> sample_ground_truth(const RoadScene& scene, double step_m, double range_m) {
    if (!(step_m > 0.0) || !(range_m >= 0.0)) {
        throw Error(ErrorKind::domain, "sample_ground_truth: step must be positive and range non-negative");
    }
    const auto& course = scene.course;
    const double end = course.total_length();
    std::vector<double> stations;
    for (std::size_t k = 0;; ++k) {
        const double along = static_cast<double>(k) * step_m;
        const double s = scene.ego_arclength + along;
        if (along > range_m + 1e-9 || s > end + 1e-9) {
            break;
        }
        stations.push_back(std::min(s, end));
    }
    std::vector<std::vector<Vec3>> out;
    for (double lateral : course.marking_offsets()) {
        std::vector<Vec3> pts;
        pts.reserve(stations.size());
        for (double s : stations) {
            pts.push_back(scene.to_ego(course.point_at(s, lateral)));
        }
        out.push_back(std::move(pts));
    }
    return out;
}

}  // namespace delin
