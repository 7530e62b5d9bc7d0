#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "vec3.hpp"

// Horizontal (xy) polyline queries shared by the lane builder and metrics.
namespace delin::polyline {

inline std::vector<double> cumulative_length(std::span<const Vec3> pts) {
    std::vector<double> acc(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        acc[i] = acc[i - 1] + horizontal_distance(pts[i - 1], pts[i]);
    }
    return acc;
}

struct Foot {
    double along = 0.0;     // station of the foot point along the polyline
    double lateral = 0.0;   // signed horizontal offset, positive to the left
    double distance = std::numeric_limits<double>::infinity();
    bool interior = false;  // foot falls within the polyline, not past an end
};

// Closest-point projection in the xy plane. With `extend_ends`, the first and
// last edges act as rays so points beyond the ends still get a station.
inline Foot project(std::span<const Vec3> pts, const Vec3& p, bool extend_ends = false) {
    Foot best;
    if (pts.size() < 2) {
        return best;
    }
    double station = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double ex = pts[i + 1].x - pts[i].x;
        const double ey = pts[i + 1].y - pts[i].y;
        const double len2 = ex * ex + ey * ey;
        const double len = std::sqrt(len2);
        if (len2 > 0.0) {
            const double raw = ((p.x - pts[i].x) * ex + (p.y - pts[i].y) * ey) / len2;
            const bool before = i == 0 && raw < 0.0;
            const bool past = i + 2 == pts.size() && raw > 1.0;
            const bool interior = !before && !past;
            const double u = (!interior && extend_ends) ? raw : std::clamp(raw, 0.0, 1.0);
            const double fx = pts[i].x + u * ex;
            const double fy = pts[i].y + u * ey;
            const double dist = std::hypot(p.x - fx, p.y - fy);
            if (dist < best.distance) {
                best.distance = dist;
                best.along = station + u * len;
                best.lateral = (ex * (p.y - pts[i].y) - ey * (p.x - pts[i].x)) / len;
                best.interior = interior;
            }
        }
        station += len;
    }
    return best;
}

// Points every `step` of horizontal arc length from the first vertex, up to
// `max_length` (inclusive) or the polyline end.
inline std::vector<Vec3> resample(std::span<const Vec3> pts, double step, double max_length) {
    std::vector<Vec3> out;
    if (pts.empty()) {
        return out;
    }
    const auto acc = cumulative_length(pts);
    const double limit = std::min(max_length, acc.back());
    std::size_t seg = 0;
    for (std::size_t k = 0;; ++k) {
        const double s = static_cast<double>(k) * step;
        if (s > limit + 1e-9) {
            break;
        }
        while (seg + 2 < pts.size() && acc[seg + 1] < s) {
            ++seg;
        }
        if (pts.size() == 1) {
            out.push_back(pts[0]);
            break;
        }
        const double len = acc[seg + 1] - acc[seg];
        const double u = len > 0.0 ? std::clamp((s - acc[seg]) / len, 0.0, 1.0) : 0.0;
        out.push_back(pts[seg] + u * (pts[seg + 1] - pts[seg]));
    }
    return out;
}

// Smallest |lambda| such that origin + lambda * dir (horizontal) crosses an
// edge of the polyline; nullopt when the line misses it. Edges are widened
// by `slack_m` so a line through an end vertex still counts.
inline std::optional<double> crossing(std::span<const Vec3> pts, const Vec3& origin, const Vec3& dir,
                                      double slack_m = 1e-3) {
    std::optional<double> best;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double ex = pts[i + 1].x - pts[i].x;
        const double ey = pts[i + 1].y - pts[i].y;
        const double denom = dir.x * ey - dir.y * ex;
        if (std::abs(denom) < 1e-15) {
            continue;
        }
        const double wx = pts[i].x - origin.x;
        const double wy = pts[i].y - origin.y;
        const double lambda = (wx * ey - wy * ex) / denom;
        const double u = (wx * dir.y - wy * dir.x) / denom;
        const double pad = slack_m / std::hypot(ex, ey);
        if (u >= -pad && u <= 1.0 + pad) {
            if (!best || std::abs(lambda) < std::abs(*best)) {
                best = lambda;
            }
        }
    }
    return best;
}

// Unit horizontal direction of the polyline at vertex i (central where possible).
inline Vec3 direction_at(std::span<const Vec3> pts, std::size_t i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 < pts.size() ? i + 1 : i;
    Vec3 d{pts[b].x - pts[a].x, pts[b].y - pts[a].y, 0.0};
    const double len = norm(d);
    return len > 0.0 ? d * (1.0 / len) : Vec3{1.0, 0.0, 0.0};
}

}  // namespace delin::polyline
