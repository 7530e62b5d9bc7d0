#pragma once

#include <array>
#include <cmath>
#include <string>

#include "error.hpp"
#include "vec3.hpp"

namespace delin {

// Joint continuity tolerance for chains, meters.
inline constexpr double kC1Tolerance = 1e-9;
// Below this, U x T is treated as zero (tangent parallel to the up vector).
inline constexpr double kCrossDegeneracy = 1e-12;
// Allowed deviation of a "unit" direction from length one.
inline constexpr double kUnitTolerance = 1e-9;

// One cubic segment with Bernstein control points p0..p3.
class CubicBezier {
public:
    CubicBezier(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3) : p_{p0, p1, p2, p3} {
        for (const auto& p : p_) {
            if (!is_finite(p)) {
                throw Error(ErrorKind::domain, "control point is not finite");
            }
        }
        if (p0 == p3) {
            throw Error(ErrorKind::degenerate_geometry, "segment start and end coincide");
        }
    }

    const Vec3& p0() const { return p_[0]; }
    const Vec3& p1() const { return p_[1]; }
    const Vec3& p2() const { return p_[2]; }
    const Vec3& p3() const { return p_[3]; }
    const std::array<Vec3, 4>& control_points() const { return p_; }

    friend bool operator==(const CubicBezier&, const CubicBezier&) = default;

private:
    std::array<Vec3, 4> p_;
};

namespace detail {

inline void require_unit_interval(double t, const char* what) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw Error(ErrorKind::domain, std::string(what) + ": parameter outside [0, 1]", t);
    }
}

// Unchecked Bernstein evaluation; t = 0 and t = 1 reproduce p0 and p3 bitwise.
inline Vec3 bernstein(const CubicBezier& c, double t) {
    const double s = 1.0 - t;
    const double b0 = s * s * s;
    const double b1 = 3.0 * s * s * t;
    const double b2 = 3.0 * s * t * t;
    const double b3 = t * t * t;
    return b0 * c.p0() + b1 * c.p1() + b2 * c.p2() + b3 * c.p3();
}

inline Vec3 bernstein_derivative(const CubicBezier& c, double t) {
    const double s = 1.0 - t;
    return 3.0 * s * s * (c.p1() - c.p0()) + 6.0 * s * t * (c.p2() - c.p1()) + 3.0 * t * t * (c.p3() - c.p2());
}

// U x T normalized, for an unnormalized tangent T.
inline Vec3 left_of(const Vec3& tangent, double param) {
    const double len = norm(tangent);
    if (len == 0.0) {
        throw Error(ErrorKind::degenerate_geometry, "zero tangent", param);
    }
    const Vec3 n = cross(kUp, tangent * (1.0 / len));
    const double n_len = norm(n);
    if (n_len < kCrossDegeneracy) {
        throw Error(ErrorKind::degenerate_geometry, "tangent parallel to up vector", param);
    }
    return n * (1.0 / n_len);
}

}  // namespace detail

inline Vec3 eval(const CubicBezier& curve, double t) {
    detail::require_unit_interval(t, "eval");
    return detail::bernstein(curve, t);
}

// dB/dt, not normalized.
inline Vec3 tangent(const CubicBezier& curve, double t) {
    detail::require_unit_interval(t, "tangent");
    const Vec3 d = detail::bernstein_derivative(curve, t);
    if (d == Vec3{}) {
        throw Error(ErrorKind::degenerate_geometry, "zero tangent", t);
    }
    return d;
}

// Unit normal U x T / |U x T| with U = +z; points to the left of travel.
inline Vec3 normal_left(const CubicBezier& curve, double t) {
    detail::require_unit_interval(t, "normal_left");
    return detail::left_of(detail::bernstein_derivative(curve, t), t);
}

// Hermite-style segment: inner control points sit on the end tangents at a
// fraction of the chord length from each endpoint.
inline CubicBezier construct_segment(const Vec3& start, const Vec3& end, const Vec3& t_start, const Vec3& t_end,
                                     double alpha_frac = 1.0 / 3.0, double beta_frac = 1.0 / 3.0) {
    if (!is_finite(start) || !is_finite(end)) {
        throw Error(ErrorKind::domain, "construct_segment: endpoint is not finite");
    }
    if (start == end) {
        throw Error(ErrorKind::degenerate_geometry, "construct_segment: coincident endpoints");
    }
    if (std::abs(norm(t_start) - 1.0) > kUnitTolerance || std::abs(norm(t_end) - 1.0) > kUnitTolerance) {
        throw Error(ErrorKind::domain, "construct_segment: tangents must be unit length");
    }
    if (!(alpha_frac > 0.0 && alpha_frac < 1.0) || !(beta_frac > 0.0 && beta_frac < 1.0)) {
        throw Error(ErrorKind::domain, "construct_segment: handle fractions must lie in (0, 1)");
    }
    const double chord = distance(start, end);
    return CubicBezier(start, start + (alpha_frac * chord) * t_start, end - (beta_frac * chord) * t_end, end);
}

}  // namespace delin
