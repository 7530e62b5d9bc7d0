#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bezier.hpp"
#include "chain.hpp"
#include "error.hpp"
#include "polyline.hpp"
#include "vec3.hpp"

namespace delin {

enum class Side { left, right, unknown };

struct DelineatorDetection {
    Vec3 position;  // post base, ego frame
    double confidence = 1.0;
    Side side_hint = Side::unknown;

    friend bool operator==(const DelineatorDetection&, const DelineatorDetection&) = default;
};

// Standardized rural-road cross section.
struct RoadLayoutConfig {
    double lane_width_m = 3.50;
    double delineator_offset_m = 0.50;  // post distance outside the outer marking
    double delineator_spacing_m = 30.0;
    double min_confidence = 0.0;

    void validate() const {
        if (!(lane_width_m > 0.0) || !(delineator_offset_m > 0.0) || !(delineator_spacing_m > 0.0)) {
            throw Error(ErrorKind::config, "layout dimensions must be positive");
        }
        if (!(lane_width_m > 2.0 * delineator_offset_m)) {
            throw Error(ErrorKind::config, "lane width must exceed twice the delineator offset");
        }
        if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) {
            throw Error(ErrorKind::config, "min_confidence must lie in [0, 1]");
        }
    }

    // Cross-road distance between corresponding posts for `lanes` lanes.
    double post_spacing(int lanes) const { return 2.0 * delineator_offset_m + lanes * lane_width_m; }

    friend bool operator==(const RoadLayoutConfig&, const RoadLayoutConfig&) = default;
};

enum class MarkingMode { shift_from_boundaries, midpoint_centerline };

// n lanes carry n + 1 markings, ordered left to right: outer-left, the
// centerlines, outer-right.
struct LaneModel {
    BezierChain left_boundary;
    BezierChain right_boundary;
    std::vector<SampledCurve> markings;
    int lane_count = 0;
    double detection_range_m = 0.0;
    bool lane_count_conflict = false;  // left and right posts implied different counts
    bool single_side = false;          // one boundary was synthesized

    friend bool operator==(const LaneModel&, const LaneModel&) = default;
};

struct SideAssignment {
    std::vector<Vec3> left;
    std::vector<Vec3> right;
};

namespace detail {

// Least-squares polynomial of degree <= 2 in s; returns coefficients c0..c2.
inline std::array<double, 3> fit_lateral(std::span<const double> s, std::span<const double> l, int degree) {
    const std::size_t m = static_cast<std::size_t>(degree) + 1;
    double scale = 1.0;
    for (double v : s) {
        scale = std::max(scale, std::abs(v));
    }
    std::array<std::array<double, 4>, 3> a{};
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double x = s[k] / scale;
        const std::array<double, 3> basis{1.0, x, x * x};
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < m; ++c) {
                a[r][c] += basis[r] * basis[c];
            }
            a[r][3] += basis[r] * l[k];
        }
    }
    // Gaussian elimination with partial pivoting on the m x m normal system.
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < m; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) {
                piv = r;
            }
        }
        std::swap(a[col], a[piv]);
        if (std::abs(a[col][col]) < 1e-300) {
            return fit_lateral(s, l, degree - 1);
        }
        for (std::size_t r = 0; r < m; ++r) {
            if (r != col) {
                const double f = a[r][col] / a[col][col];
                for (std::size_t c = col; c < 4; ++c) {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    std::array<double, 3> coef{};
    for (std::size_t r = 0; r < m; ++r) {
        coef[r] = a[r][3] / a[r][r];
    }
    coef[1] /= scale;
    coef[2] /= scale * scale;
    return coef;
}

inline double eval_lateral(const std::array<double, 3>& c, double s) { return c[0] + s * (c[1] + s * c[2]); }

// Residual sum of squares of l ~ poly(s) + h * (left ? 1 : -1), the two post
// rows modeled as one center curve and a half gap. Infinity when singular.
inline double two_track_rss(std::span<const double> s, std::span<const double> l, const std::vector<bool>& is_left,
                            int degree, double scale) {
    const std::size_t m = static_cast<std::size_t>(degree) + 2;
    std::array<std::array<double, 5>, 4> a{};
    auto basis = [&](std::size_t k) {
        const double x = s[k] / scale;
        std::array<double, 4> b{1.0, x, x * x, 0.0};
        b[m - 1] = is_left[k] ? 1.0 : -1.0;
        return b;
    };
    for (std::size_t k = 0; k < s.size(); ++k) {
        const auto b = basis(k);
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < m; ++c) {
                a[r][c] += b[r] * b[c];
            }
            a[r][4] += b[r] * l[k];
        }
    }
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < m; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) {
                piv = r;
            }
        }
        std::swap(a[col], a[piv]);
        if (std::abs(a[col][col]) < 1e-9) {
            return std::numeric_limits<double>::infinity();
        }
        for (std::size_t r = 0; r < m; ++r) {
            if (r != col) {
                const double f = a[r][col] / a[col][col];
                for (std::size_t c = col; c < 5; ++c) {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    std::array<double, 4> coef{};
    for (std::size_t r = 0; r < m; ++r) {
        coef[r] = a[r][4] / a[r][r];
    }
    if (!(coef[m - 1] > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    double rss = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        const auto b = basis(k);
        double fit = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            fit += b[r] * coef[r];
        }
        rss += (l[k] - fit) * (l[k] - fit);
    }
    return rss;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::vector<Vec3> waypoints_of(const BezierChain& chain) {
    std::vector<Vec3> pts;
    pts.reserve(chain.size() + 1);
    for (const auto& seg : chain.segments()) {
        pts.push_back(seg.p0());
    }
    pts.push_back(chain.end());
    return pts;
}

// Uniform samples per segment so that parameter steps stay near `step_m`.
inline std::size_t samples_for_step(const BezierChain& chain, double step_m) {
    double longest = 0.0;
    for (const auto& seg : chain.segments()) {
        longest = std::max(longest, distance(seg.p0(), seg.p3()));
    }
    return static_cast<std::size_t>(std::ceil(longest / step_m)) + 1;
}

}  // namespace detail

// Splits detections into left and right posts of the road, each sorted along
// the road. The road axis is the principal axis of all usable detections,
// oriented away from the ego origin; the lateral reference is a low-order
// polynomial fit refined by re-centering between the two sides.
inline SideAssignment assign_sides(std::span<const DelineatorDetection> detections, const RoadLayoutConfig& config) {
    std::vector<const DelineatorDetection*> usable;
    for (const auto& d : detections) {
        if (d.confidence >= config.min_confidence && is_finite(d.position)) {
            usable.push_back(&d);
        }
    }
    if (usable.size() < 2) {
        throw Error(ErrorKind::insufficient_input, "assign_sides: fewer than two usable detections");
    }

    const double n = static_cast<double>(usable.size());
    double cx = 0.0;
    double cy = 0.0;
    for (const auto* d : usable) {
        cx += d->position.x;
        cy += d->position.y;
    }
    cx /= n;
    cy /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (const auto* d : usable) {
        const double dx = d->position.x - cx;
        const double dy = d->position.y - cy;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    const double half_trace = 0.5 * (sxx + syy);
    const double root = std::hypot(0.5 * (sxx - syy), sxy);
    const double major = half_trace + root;
    const double minor = half_trace - root;

    Vec3 axis;
    const double centroid_dist = std::hypot(cx, cy);
    if (major > 4.0 * minor && major > 0.0) {
        const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
        axis = {std::cos(theta), std::sin(theta), 0.0};
    } else if (centroid_dist > 0.0) {
        // No dominant direction (e.g. one post per side): look from the ego.
        axis = {cx / centroid_dist, cy / centroid_dist, 0.0};
    } else {
        axis = {1.0, 0.0, 0.0};
    }
    if (axis.x * cx + axis.y * cy < 0.0) {
        axis = -axis;
    }
    const Vec3 lat{-axis.y, axis.x, 0.0};

    std::vector<double> s(usable.size());
    std::vector<double> l(usable.size());
    double s_min = std::numeric_limits<double>::infinity();
    double s_max = -s_min;
    for (std::size_t i = 0; i < usable.size(); ++i) {
        const Vec3 rel{usable[i]->position.x - cx, usable[i]->position.y - cy, 0.0};
        s[i] = dot(rel, axis);
        l[i] = dot(rel, lat);
        s_min = std::min(s_min, s[i]);
        s_max = std::max(s_max, s[i]);
    }
    const bool spread = s_max - s_min > 1.0;
    const int degree = !spread ? 0 : (usable.size() >= 5 ? 2 : 1);

    auto coef = detail::fit_lateral(s, l, degree);
    double rss = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double r = l[i] - detail::eval_lateral(coef, s[i]);
        rss += r * r;
    }
    const double rms = std::sqrt(rss / n);

    std::vector<Side> side(usable.size(), Side::unknown);
    if (rms < 0.25 * config.post_spacing(1)) {
        // All posts trace one smooth line: decide which side of the ego it is on.
        const auto line = detail::fit_lateral(s, l, spread ? 1 : 0);
        const double ego_s = -(cx * axis.x + cy * axis.y);
        const double ego_l = -(cx * lat.x + cy * lat.y);
        const Side all = detail::eval_lateral(line, ego_s) >= ego_l ? Side::left : Side::right;
        std::fill(side.begin(), side.end(), all);
    } else {
        auto classify = [&](const std::array<double, 3>& c) {
            for (std::size_t i = 0; i < s.size(); ++i) {
                side[i] = l[i] >= detail::eval_lateral(c, s[i]) ? Side::left : Side::right;
            }
        };
        classify(coef);
        // Re-fit the road center from both sides pulled together by the
        // estimated half spacing; robust to unequal post counts per side.
        for (int iter = 0; iter < 3; ++iter) {
            std::vector<double> rl;
            std::vector<double> rr;
            for (std::size_t i = 0; i < s.size(); ++i) {
                const double r = l[i] - detail::eval_lateral(coef, s[i]);
                (side[i] == Side::left ? rl : rr).push_back(r);
            }
            if (rl.empty() || rr.empty()) {
                break;
            }
            const double half = 0.5 * (detail::median(rl) - detail::median(rr));
            std::vector<double> centered(l.size());
            for (std::size_t i = 0; i < l.size(); ++i) {
                centered[i] = l[i] + (side[i] == Side::left ? -half : half);
            }
            coef = detail::fit_lateral(s, centered, degree);
            classify(coef);
        }
        // Single-post flips that lower the joint two-row residual; this
        // escapes splits that are self-consistent under re-centering, e.g.
        // one side extending well past the other on a curve.
        double scale = 1.0;
        for (double v : s) {
            scale = std::max(scale, std::abs(v));
        }
        std::vector<bool> is_left(side.size());
        for (std::size_t i = 0; i < side.size(); ++i) {
            is_left[i] = side[i] == Side::left;
        }
        double best = detail::two_track_rss(s, l, is_left, degree, scale);
        for (int pass = 0; pass < 3; ++pass) {
            bool changed = false;
            for (std::size_t i = 0; i < is_left.size(); ++i) {
                is_left[i] = !is_left[i];
                const double rss_flip = detail::two_track_rss(s, l, is_left, degree, scale);
                if (rss_flip < best * (1.0 - 1e-9)) {
                    best = rss_flip;
                    changed = true;
                } else {
                    is_left[i] = !is_left[i];
                }
            }
            if (!changed) {
                break;
            }
        }
        for (std::size_t i = 0; i < side.size(); ++i) {
            side[i] = is_left[i] ? Side::left : Side::right;
        }
    }

    std::vector<std::pair<double, Vec3>> left;
    std::vector<std::pair<double, Vec3>> right;
    for (std::size_t i = 0; i < usable.size(); ++i) {
        const Side hint = usable[i]->side_hint;
        const Side chosen = hint == Side::unknown ? side[i] : hint;
        (chosen == Side::left ? left : right).emplace_back(s[i], usable[i]->position);
    }
    auto by_along = [](const auto& a, const auto& b) { return a.first < b.first; };
    std::stable_sort(left.begin(), left.end(), by_along);
    std::stable_sort(right.begin(), right.end(), by_along);
    SideAssignment out;
    for (const auto& [_, p] : left) {
        out.left.push_back(p);
    }
    for (const auto& [_, p] : right) {
        out.right.push_back(p);
    }
    return out;
}

// Unit tangents at ordered posts. Interior: chord-length weighted central
// difference, which reduces to (p[i+1] - p[i-1]) for even spacing and is
// exact on circular arcs. Ends: the neighbor's tangent reflected about the
// end chord (exact on arcs); with two posts, the chord itself.
inline std::vector<Vec3> estimate_tangents(std::span<const Vec3> posts) {
    if (posts.size() < 2) {
        throw Error(ErrorKind::insufficient_input, "estimate_tangents: need at least two posts");
    }
    std::vector<Vec3> chords;
    std::vector<double> lengths;
    for (std::size_t i = 0; i + 1 < posts.size(); ++i) {
        const Vec3 d = posts[i + 1] - posts[i];
        const double len = norm(d);
        if (len < 1e-12) {
            throw Error(ErrorKind::degenerate_geometry, "estimate_tangents: coincident neighbors at index " +
                                                            std::to_string(i));
        }
        chords.push_back(d * (1.0 / len));
        lengths.push_back(len);
    }
    const std::size_t n = posts.size();
    std::vector<Vec3> t(n);
    if (n == 2) {
        t[0] = chords[0];
        t[1] = chords[0];
        return t;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const Vec3 blend = lengths[i] * chords[i - 1] + lengths[i - 1] * chords[i];
        const double len = norm(blend);
        if (len < 1e-12) {
            throw Error(ErrorKind::degenerate_geometry, "estimate_tangents: path reverses at index " +
                                                            std::to_string(i));
        }
        t[i] = blend * (1.0 / len);
    }
    auto reflect = [](const Vec3& chord, const Vec3& neighbor) {
        return normalized(2.0 * dot(chord, neighbor) * chord - neighbor);
    };
    t[0] = reflect(chords.front(), t[1]);
    t[n - 1] = reflect(chords.back(), t[n - 2]);
    return t;
}

inline BezierChain build_boundary(std::span<const Vec3> posts, const RoadLayoutConfig& config) {
    config.validate();
    if (posts.size() < 2) {
        throw Error(ErrorKind::insufficient_input, "build_boundary: need at least two posts");
    }
    const auto tangents = estimate_tangents(posts);
    return chain_from_waypoints(posts, tangents);
}

// Lane count from the cross-road distance between corresponding posts:
// round((d - 2 * offset) / lane width), at least one.
inline int estimate_lane_count(double d_delineators, const RoadLayoutConfig& config) {
    const double floor_m = 2.0 * config.delineator_offset_m + 0.5 * config.lane_width_m;
    if (!(d_delineators > floor_m)) {
        throw Error(ErrorKind::implausible_geometry,
                    "post spacing " + std::to_string(d_delineators) + " m is below " + std::to_string(floor_m) + " m");
    }
    const double lanes = (d_delineators - 2.0 * config.delineator_offset_m) / config.lane_width_m;
    return std::max(1, static_cast<int>(std::lround(lanes)));
}

// Greedy, order-preserving matching of left to right posts by smallest
// along-road gap; pairs with a gap above `max_gap_m` are never formed.
inline std::vector<std::pair<std::size_t, std::size_t>> pair_delineators(
    std::span<const Vec3> left, std::span<const Vec3> right,
    double max_gap_m = std::numeric_limits<double>::infinity()) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    if (left.empty() || right.empty()) {
        return pairs;
    }
    // Stations along whichever side has a polyline; the other side projects onto it.
    std::vector<double> sl(left.size(), 0.0);
    std::vector<double> sr(right.size(), 0.0);
    if (left.size() >= 2) {
        sl = polyline::cumulative_length(left);
        for (std::size_t j = 0; j < right.size(); ++j) {
            sr[j] = polyline::project(left, right[j], true).along;
        }
    } else if (right.size() >= 2) {
        sr = polyline::cumulative_length(right);
        sl[0] = polyline::project(right, left[0], true).along;
    }

    struct Candidate {
        double gap;
        std::size_t i;
        std::size_t j;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < left.size(); ++i) {
        for (std::size_t j = 0; j < right.size(); ++j) {
            const double gap = std::abs(sl[i] - sr[j]);
            if (gap <= max_gap_m) {
                candidates.push_back({gap, i, j});
            }
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return a.gap != b.gap ? a.gap < b.gap : (a.i != b.i ? a.i < b.i : a.j < b.j);
    });
    for (const auto& c : candidates) {
        const bool compatible = std::all_of(pairs.begin(), pairs.end(), [&](const auto& p) {
            return (c.i < p.first && c.j < p.second) || (c.i > p.first && c.j > p.second);
        });
        if (compatible) {
            pairs.emplace_back(c.i, c.j);
        }
    }
    std::sort(pairs.begin(), pairs.end());
    return pairs;
}

struct MarkingOptions {
    MarkingMode mode = MarkingMode::shift_from_boundaries;
    double step_m = 0.5;  // approximate sample spacing of the markings
    double extrapolation_m = 0.0;
    ExtrapolationPolicy policy{};
};

// Outer markings are the boundaries shifted inward by the post offset.
// Interior markings split the measured width between the outer markings into
// lane_count equal lanes, taken either from the nearer boundary or from the
// chain through midpoints of paired posts.
inline LaneModel derive_markings(const BezierChain& left, const BezierChain& right, const RoadLayoutConfig& config,
                                 const MarkingOptions& options = {}) {
    config.validate();
    if (!(options.step_m > 0.0)) {
        throw Error(ErrorKind::domain, "derive_markings: step must be positive");
    }
    const auto left_posts = detail::waypoints_of(left);
    const auto right_posts = detail::waypoints_of(right);
    const std::size_t sps = std::max(detail::samples_for_step(left, options.step_m),
                                     detail::samples_for_step(right, options.step_m));
    const auto left_line = sample_chain(left, sps);
    const auto right_line = sample_chain(right, sps);

    std::vector<double> from_left;
    std::vector<double> from_right;
    for (const auto& p : left_posts) {
        const auto foot = polyline::project(right_line.points(), p);
        if (foot.interior) {
            from_left.push_back(foot.distance);
        }
    }
    for (const auto& p : right_posts) {
        const auto foot = polyline::project(left_line.points(), p);
        if (foot.interior) {
            from_right.push_back(foot.distance);
        }
    }
    if (from_left.empty() && from_right.empty()) {
        throw Error(ErrorKind::geometry_mismatch, "derive_markings: left and right boundaries do not overlap");
    }

    int lanes = 0;
    bool conflict = false;
    if (!from_left.empty() && !from_right.empty()) {
        const int a = estimate_lane_count(detail::median(from_left), config);
        const int b = estimate_lane_count(detail::median(from_right), config);
        lanes = std::max(a, b);
        conflict = a != b;
    } else {
        lanes = estimate_lane_count(detail::median(from_left.empty() ? from_right : from_left), config);
    }
    std::vector<double> all = from_left;
    all.insert(all.end(), from_right.begin(), from_right.end());
    const double width = detail::median(all);
    const double lane_w = (width - 2.0 * config.delineator_offset_m) / lanes;
    const double off = config.delineator_offset_m;

    auto marking = [&](const BezierChain& base, double d) {
        const std::size_t n = detail::samples_for_step(base, options.step_m);
        return offset_with_extension(base, d, n, options.extrapolation_m, options.policy);
    };

    std::vector<SampledCurve> markings;
    markings.reserve(static_cast<std::size_t>(lanes) + 1);
    markings.push_back(marking(left, -off));
    if (lanes > 1) {
        if (options.mode == MarkingMode::shift_from_boundaries) {
            for (int k = 1; k < lanes; ++k) {
                markings.push_back(2 * k <= lanes ? marking(left, -(off + k * lane_w))
                                                  : marking(right, off + (lanes - k) * lane_w));
            }
        } else {
            const auto pairs = pair_delineators(left_posts, right_posts, 0.5 * config.delineator_spacing_m);
            if (pairs.size() < 2) {
                throw Error(ErrorKind::geometry_mismatch, "derive_markings: fewer than two paired posts");
            }
            std::vector<Vec3> mids;
            for (const auto& [i, j] : pairs) {
                mids.push_back(0.5 * (left_posts[i] + right_posts[j]));
            }
            const auto center = chain_from_waypoints(mids, estimate_tangents(mids));
            for (int k = 1; k < lanes; ++k) {
                markings.push_back(marking(center, 0.5 * (lanes - 2 * k) * lane_w));
            }
        }
    }
    markings.push_back(marking(right, off));

    const double outer = std::min(offset_chain(left, -off, sps).length(), offset_chain(right, off, sps).length());
    return LaneModel{left,  right, std::move(markings), lanes, outer + options.extrapolation_m,
                     conflict, false};
}

struct FitOptions {
    MarkingMode mode = MarkingMode::shift_from_boundaries;
    double step_m = 0.5;
    ExtrapolationPolicy policy{};
    int fallback_lane_count = 2;  // assumed when only one side is visible
};

// End-to-end: detections -> sides -> boundary chains -> markings, each
// marking extended by `extrapolation_m`. A side with fewer than two posts is
// replaced by the visible boundary shifted across the nominal road width.
inline LaneModel fit_lanes(std::span<const DelineatorDetection> detections, const RoadLayoutConfig& config,
                           double extrapolation_m, const FitOptions& options = {}) {
    config.validate();
    detail::check_extrapolation(extrapolation_m, options.policy);
    const auto sides = assign_sides(detections, config);
    const bool has_left = sides.left.size() >= 2;
    const bool has_right = sides.right.size() >= 2;
    if (!has_left && !has_right) {
        throw Error(ErrorKind::insufficient_input, "fit_lanes: no side has two posts");
    }

    const MarkingOptions marking_options{options.mode, options.step_m, extrapolation_m, options.policy};
    if (has_left && has_right) {
        return derive_markings(build_boundary(sides.left, config), build_boundary(sides.right, config), config,
                               marking_options);
    }

    const auto& present = has_left ? sides.left : sides.right;
    const BezierChain chain = build_boundary(present, config);
    const double across = config.post_spacing(options.fallback_lane_count) * (has_left ? -1.0 : 1.0);
    std::vector<Vec3> mirrored;
    mirrored.reserve(present.size());
    for (std::size_t i = 0; i < present.size(); ++i) {
        mirrored.push_back(present[i] + across * chain.normal_left(static_cast<double>(i)));
    }
    const BezierChain other = build_boundary(mirrored, config);
    LaneModel model = has_left ? derive_markings(chain, other, config, marking_options)
                               : derive_markings(other, chain, config, marking_options);
    model.single_side = true;
    return model;
}

}  // namespace delin
