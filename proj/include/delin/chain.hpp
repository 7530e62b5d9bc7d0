#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bezier.hpp"
#include "error.hpp"
#include "vec3.hpp"

namespace delin {

// Ordered segments with shared joints (C0, bitwise) and mirrored inner
// control points at every joint (C1, within kC1Tolerance). The global
// parameter s runs over [0, size()]; segment i covers [i, i + 1].
class BezierChain {
public:
    explicit BezierChain(std::vector<CubicBezier> segments) : segments_(std::move(segments)) {
        if (segments_.empty()) {
            throw Error(ErrorKind::insufficient_input, "chain needs at least one segment");
        }
        for (std::size_t i = 0; i + 1 < segments_.size(); ++i) {
            const auto& a = segments_[i];
            const auto& b = segments_[i + 1];
            if (!(a.p3() == b.p0())) {
                throw Error(ErrorKind::geometry_mismatch, "C0 violated at joint " + std::to_string(i));
            }
            if (norm(b.p1() - (2.0 * a.p3() - a.p2())) > kC1Tolerance) {
                throw Error(ErrorKind::geometry_mismatch, "C1 violated at joint " + std::to_string(i));
            }
        }
    }

    const std::vector<CubicBezier>& segments() const { return segments_; }
    std::size_t size() const { return segments_.size(); }
    const Vec3& start() const { return segments_.front().p0(); }
    const Vec3& end() const { return segments_.back().p3(); }

    // Segment index and local parameter for a global parameter.
    std::pair<std::size_t, double> locate(double s) const {
        const double n = static_cast<double>(segments_.size());
        if (!(s >= 0.0 && s <= n)) {
            throw Error(ErrorKind::domain, "chain parameter outside [0, n]", s);
        }
        if (s == n) {
            return {segments_.size() - 1, 1.0};
        }
        const auto i = static_cast<std::size_t>(std::floor(s));
        return {i, s - static_cast<double>(i)};
    }

    Vec3 eval(double s) const {
        const auto [i, t] = locate(s);
        return delin::eval(segments_[i], t);
    }

    Vec3 tangent(double s) const {
        const auto [i, t] = locate(s);
        return delin::tangent(segments_[i], t);
    }

    Vec3 normal_left(double s) const {
        const auto [i, t] = locate(s);
        return detail::left_of(detail::bernstein_derivative(segments_[i], t), s);
    }

    friend bool operator==(const BezierChain&, const BezierChain&) = default;

private:
    std::vector<CubicBezier> segments_;
};

// Polyline with a strictly increasing parameter per vertex. Used for offset
// curves, which are not polynomial and so are kept sampled.
class SampledCurve {
public:
    SampledCurve(std::vector<Vec3> points, std::vector<double> params)
        : points_(std::move(points)), params_(std::move(params)) {
        if (points_.size() != params_.size()) {
            throw Error(ErrorKind::domain, "sampled curve: points/params size mismatch");
        }
        if (points_.size() < 2) {
            throw Error(ErrorKind::insufficient_input, "sampled curve needs at least two points");
        }
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (!is_finite(points_[i]) || !std::isfinite(params_[i])) {
                throw Error(ErrorKind::domain, "sampled curve: non-finite value");
            }
            if (i > 0 && !(params_[i] > params_[i - 1])) {
                throw Error(ErrorKind::domain, "sampled curve: params must be strictly increasing");
            }
        }
    }

    const std::vector<Vec3>& points() const { return points_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t size() const { return points_.size(); }
    const Vec3& front() const { return points_.front(); }
    const Vec3& back() const { return points_.back(); }

    double length() const {
        double total = 0.0;
        for (std::size_t i = 1; i < points_.size(); ++i) {
            total += distance(points_[i - 1], points_[i]);
        }
        return total;
    }

    // Appends vertices; the caller keeps params increasing.
    void append(std::span<const Vec3> points, std::span<const double> params) {
        if (points.size() != params.size()) {
            throw Error(ErrorKind::domain, "sampled curve: points/params size mismatch");
        }
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (!(params[i] > params_.back())) {
                throw Error(ErrorKind::domain, "sampled curve: params must be strictly increasing");
            }
            points_.push_back(points[i]);
            params_.push_back(params[i]);
        }
    }

    friend bool operator==(const SampledCurve&, const SampledCurve&) = default;

private:
    std::vector<Vec3> points_;
    std::vector<double> params_;
};

// Joins one segment per consecutive waypoint pair. At interior joints the
// outgoing p1 is the mirror of the incoming p2, so C1 holds exactly; the
// supplied tangent only shapes the incoming side there.
inline BezierChain chain_from_waypoints(std::span<const Vec3> waypoints, std::span<const Vec3> tangents,
                                        double alpha_frac = 1.0 / 3.0, double beta_frac = 1.0 / 3.0) {
    if (waypoints.size() < 2) {
        throw Error(ErrorKind::insufficient_input, "chain_from_waypoints: need at least two waypoints");
    }
    if (tangents.size() != waypoints.size()) {
        throw Error(ErrorKind::domain, "chain_from_waypoints: one tangent per waypoint required");
    }
    std::vector<CubicBezier> segments;
    segments.reserve(waypoints.size() - 1);
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
        auto seg = construct_segment(waypoints[i], waypoints[i + 1], tangents[i], tangents[i + 1], alpha_frac,
                                     beta_frac);
        if (!segments.empty()) {
            const auto& prev = segments.back();
            seg = CubicBezier(seg.p0(), 2.0 * prev.p3() - prev.p2(), seg.p2(), seg.p3());
        }
        segments.push_back(seg);
    }
    return BezierChain(std::move(segments));
}

namespace detail {

inline void require_samples(std::size_t samples_per_segment) {
    if (samples_per_segment < 2) {
        throw Error(ErrorKind::domain, "samples_per_segment must be at least 2");
    }
}

// Visits every uniform sample (segment, local t, global s); joints once.
template <typename Fn>
void for_each_sample(const BezierChain& chain, std::size_t samples_per_segment, Fn&& fn) {
    require_samples(samples_per_segment);
    const double denom = static_cast<double>(samples_per_segment - 1);
    for (std::size_t i = 0; i < chain.size(); ++i) {
        for (std::size_t j = (i == 0 ? 0 : 1); j < samples_per_segment; ++j) {
            const double t = j == samples_per_segment - 1 ? 1.0 : static_cast<double>(j) / denom;
            fn(chain.segments()[i], t, static_cast<double>(i) + t);
        }
    }
}

}  // namespace detail

inline SampledCurve sample_chain(const BezierChain& chain, std::size_t samples_per_segment) {
    std::vector<Vec3> points;
    std::vector<double> params;
    detail::for_each_sample(chain, samples_per_segment, [&](const CubicBezier& seg, double t, double s) {
        points.push_back(detail::bernstein(seg, t));
        params.push_back(s);
    });
    return SampledCurve(std::move(points), std::move(params));
}

// Pointwise lateral shift B(s) + d * N(s); positive d moves left.
inline SampledCurve offset_chain(const BezierChain& chain, double d, std::size_t samples_per_segment) {
    if (!std::isfinite(d)) {
        throw Error(ErrorKind::domain, "offset_chain: offset must be finite");
    }
    std::vector<Vec3> points;
    std::vector<double> params;
    detail::for_each_sample(chain, samples_per_segment, [&](const CubicBezier& seg, double t, double s) {
        const Vec3 n = detail::left_of(detail::bernstein_derivative(seg, t), s);
        points.push_back(detail::bernstein(seg, t) + d * n);
        params.push_back(s);
    });
    return SampledCurve(std::move(points), std::move(params));
}

inline double arc_length(const BezierChain& chain, std::size_t samples_per_segment) {
    double total = 0.0;
    std::optional<Vec3> prev;
    detail::for_each_sample(chain, samples_per_segment, [&](const CubicBezier& seg, double t, double) {
        const Vec3 p = detail::bernstein(seg, t);
        if (prev) {
            total += distance(*prev, p);
        }
        prev = p;
    });
    return total;
}

struct ExtrapolationPolicy {
    double cap_m = 10.0;
    bool allow_beyond_cap = false;
    double step_m = 0.5;
};

namespace detail {

inline void check_extrapolation(double distance_m, const ExtrapolationPolicy& policy) {
    if (!(distance_m >= 0.0) || !std::isfinite(distance_m)) {
        throw Error(ErrorKind::domain, "extrapolation distance must be finite and non-negative");
    }
    if (!(policy.step_m > 0.0)) {
        throw Error(ErrorKind::domain, "extrapolation step must be positive");
    }
    if (distance_m > policy.cap_m && !policy.allow_beyond_cap) {
        throw Error(ErrorKind::range_policy, "extrapolation of " + std::to_string(distance_m) +
                                                 " m exceeds the cap of " + std::to_string(policy.cap_m) + " m");
    }
}

// Straight continuation from `origin` along unit `direction`; excludes the
// origin itself. Params advance by `rate` per meter.
inline std::pair<std::vector<Vec3>, std::vector<double>> straight_run(const Vec3& origin, const Vec3& direction,
                                                                      double origin_param, double rate,
                                                                      double distance_m, double step_m) {
    std::vector<Vec3> points;
    std::vector<double> params;
    const auto steps = static_cast<std::size_t>(std::ceil(distance_m / step_m - 1e-9));
    for (std::size_t k = 1; k <= steps; ++k) {
        const double along = k == steps ? distance_m : static_cast<double>(k) * step_m;
        points.push_back(origin + along * direction);
        params.push_back(origin_param + along * rate);
    }
    return {std::move(points), std::move(params)};
}

}  // namespace detail

// Continues the chain beyond its end along the end tangent. The returned
// stretch starts at the chain end; nullopt when distance is zero.
inline std::optional<SampledCurve> extrapolate(const BezierChain& chain, double distance_m,
                                               const ExtrapolationPolicy& policy = {}) {
    detail::check_extrapolation(distance_m, policy);
    if (distance_m == 0.0) {
        return std::nullopt;
    }
    const Vec3 t_end = chain.tangent(static_cast<double>(chain.size()));
    const double speed = norm(t_end);
    const double s_end = static_cast<double>(chain.size());
    auto [points, params] =
        detail::straight_run(chain.end(), t_end * (1.0 / speed), s_end, 1.0 / speed, distance_m, policy.step_m);
    points.insert(points.begin(), chain.end());
    params.insert(params.begin(), s_end);
    return SampledCurve(std::move(points), std::move(params));
}

// Offset of `chain` by d with its straight extension appended; the extension
// runs along the chain's end tangent from the offset end point, which is
// where the exact offset curve would continue.
inline SampledCurve offset_with_extension(const BezierChain& chain, double d, std::size_t samples_per_segment,
                                          double distance_m, const ExtrapolationPolicy& policy = {}) {
    detail::check_extrapolation(distance_m, policy);
    SampledCurve curve = offset_chain(chain, d, samples_per_segment);
    if (distance_m > 0.0) {
        const double s_end = static_cast<double>(chain.size());
        const Vec3 t_end = chain.tangent(s_end);
        const double speed = norm(t_end);
        auto [points, params] = detail::straight_run(curve.back(), t_end * (1.0 / speed), s_end, 1.0 / speed,
                                                     distance_m, policy.step_m);
        curve.append(points, params);
    }
    return curve;
}

}  // namespace delin
