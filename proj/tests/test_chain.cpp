#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "delin/chain.hpp"
#include "oracles.hpp"

using delin::BezierChain;
using delin::CubicBezier;
using delin::Error;
using delin::ErrorKind;
using delin::Vec3;

namespace {

BezierChain straight_chain(std::vector<double> xs) {
    std::vector<Vec3> pts;
    for (double x : xs) {
        pts.push_back({x, 0, 0});
    }
    const std::vector<Vec3> tangents(pts.size(), Vec3{1, 0, 0});
    return delin::chain_from_waypoints(pts, tangents);
}

// Waypoints evenly spread over [a0, a1] on `circle`, with exact tangents.
BezierChain arc_chain(const oracle::Circle& circle, double a0, double a1, int n) {
    std::vector<Vec3> pts;
    std::vector<Vec3> tangents;
    for (int i = 0; i < n; ++i) {
        const double a = a0 + (a1 - a0) * i / (n - 1);
        pts.push_back(circle.at(a));
        tangents.push_back(circle.tangent(a));
    }
    return delin::chain_from_waypoints(pts, tangents);
}

BezierChain random_chain(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> step(15.0, 40.0);
    std::uniform_real_distribution<double> turn(-0.4, 0.4);
    std::vector<Vec3> pts{{0, 0, 0}};
    std::vector<Vec3> tangents;
    double heading = turn(rng);
    for (int i = 0; i < 5; ++i) {
        heading += turn(rng);
        const double len = step(rng);
        pts.push_back(pts.back() + Vec3{len * std::cos(heading), len * std::sin(heading), 0.0});
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec3 d = i + 1 < pts.size() ? pts[i + 1] - pts[i] : pts[i] - pts[i - 1];
        tangents.push_back(delin::normalized(d));
    }
    return delin::chain_from_waypoints(pts, tangents);
}

}  // namespace

TEST(ChainFromWaypoints, StraightChainMirrorsAtJoint) {
    const auto chain = straight_chain({0, 30, 60});
    ASSERT_EQ(chain.size(), 2u);
    EXPECT_EQ(chain.segments()[1].p1(), (Vec3{40, 0, 0}));
    EXPECT_EQ(chain.start(), (Vec3{0, 0, 0}));
    EXPECT_EQ(chain.end(), (Vec3{60, 0, 0}));
}

TEST(ChainFromWaypoints, MirrorRuleOverridesTangent) {
    // Incoming p2 = (2, -0.1, 0) at joint (3, 0, 0) must give outgoing p1 = (4, 0.1, 0).
    const std::vector<Vec3> pts{{0, 0, 0}, {3, 0, 0}, {6, 0, 0}};
    const double c = std::hypot(1.0, 0.1);
    const std::vector<Vec3> tangents{{1, 0, 0}, {1 / c, 0.1 / c, 0}, {1, 0, 0}};
    const auto chain = delin::chain_from_waypoints(pts, tangents, 1.0 / 3.0, c / 3.0);
    const auto& in = chain.segments()[0];
    const auto& out = chain.segments()[1];
    EXPECT_NEAR(in.p2().x, 2.0, 1e-12);
    EXPECT_NEAR(in.p2().y, -0.1, 1e-12);
    EXPECT_NEAR(out.p1().x, 4.0, 1e-12);
    EXPECT_NEAR(out.p1().y, 0.1, 1e-12);
}

TEST(ChainFromWaypoints, NeedsTwoWaypointsAndMatchingTangents) {
    const std::vector<Vec3> one{{0, 0, 0}};
    try {
        delin::chain_from_waypoints(one, one);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::insufficient_input);
    }
    const std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
    EXPECT_THROW(delin::chain_from_waypoints(two, one), Error);
}

TEST(ChainFromWaypoints, RadiusTwoHundredArc) {
    const oracle::Circle circle{{0, 200, 0}, 200.0};
    const double a0 = -std::numbers::pi / 2;
    const auto chain = arc_chain(circle, a0, a0 + 120.0 / 200.0, 5);
    double worst_c1 = 0.0;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        const auto in = delin::tangent(chain.segments()[i], 1.0);
        const auto out = delin::tangent(chain.segments()[i + 1], 0.0);
        worst_c1 = std::max(worst_c1, delin::norm(in - out));
    }
    EXPECT_LE(worst_c1, 1e-9);
    double worst = 0.0;
    for (int k = 0; k <= 400; ++k) {
        worst = std::max(worst, circle.radial_error(chain.eval(4.0 * k / 400.0)));
    }
    EXPECT_LT(worst, 0.02);
}

TEST(BezierChain, RejectsBrokenContinuity) {
    const CubicBezier a{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    const CubicBezier gap{{3.001, 0, 0}, {4, 0, 0}, {5, 0, 0}, {6, 0, 0}};
    const CubicBezier kink{{3, 0, 0}, {4, 0.5, 0}, {5, 0, 0}, {6, 0, 0}};
    EXPECT_THROW(BezierChain({a, gap}), Error);
    EXPECT_THROW(BezierChain({a, kink}), Error);
    EXPECT_THROW(BezierChain({}), Error);
    EXPECT_NO_THROW(BezierChain({a, CubicBezier{{3, 0, 0}, {4, 0, 0}, {5, 1, 0}, {6, 1, 0}}}));
}

TEST(BezierChain, GlobalParameter) {
    const auto chain = straight_chain({0, 30, 60});
    EXPECT_EQ(chain.eval(0.0), (Vec3{0, 0, 0}));
    EXPECT_EQ(chain.eval(1.0), (Vec3{30, 0, 0}));
    EXPECT_EQ(chain.eval(2.0), (Vec3{60, 0, 0}));
    EXPECT_NEAR(chain.eval(1.5).x, 45.0, 1e-12);
    EXPECT_THROW(chain.eval(2.01), Error);
    EXPECT_THROW(chain.eval(-0.01), Error);
}

TEST(OffsetChain, StraightBothSides) {
    const auto chain = straight_chain({0, 30});
    for (double d : {0.5, -0.5}) {
        const auto off = delin::offset_chain(chain, d, 16);
        EXPECT_EQ(off.size(), 16u);
        for (const auto& p : off.points()) {
            EXPECT_NEAR(p.y, d, 1e-15);
        }
    }
}

TEST(OffsetChain, CircleOffsetIsConcentric) {
    const oracle::Circle circle{{0, 100, 0}, 100.0};
    const double a0 = -std::numbers::pi / 2;
    // 10 m chords keep the chain itself within a fraction of a millimeter.
    const auto chain = arc_chain(circle, a0, a0 + 0.9, 10);
    // Positive d moves left, toward the center of a left turn.
    const auto off = delin::offset_chain(chain, 0.5, 32);
    const auto base = delin::sample_chain(chain, 32);
    const oracle::Circle inner{circle.center, 99.5};
    for (std::size_t i = 0; i < off.size(); ++i) {
        EXPECT_LT(inner.radial_error(off.points()[i]), 1e-3);
        const double rb = delin::horizontal_distance(base.points()[i], circle.center);
        const double ro = delin::horizontal_distance(off.points()[i], circle.center);
        EXPECT_NEAR(rb - ro, 0.5, 1e-3);
    }
}

TEST(OffsetChain, RejectsBadArguments) {
    const auto chain = straight_chain({0, 30});
    EXPECT_THROW(delin::offset_chain(chain, std::nan(""), 8), Error);
    EXPECT_THROW(delin::offset_chain(chain, 0.5, 1), Error);
    const BezierChain up({CubicBezier{{0, 0, 0}, {0, 0, 1}, {0, 0, 2}, {0, 0, 3}}});
    try {
        delin::offset_chain(up, 0.5, 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate_geometry);
        EXPECT_TRUE(e.parameter().has_value());
    }
}

TEST(OffsetChainProperty, DistanceAndSide) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ud(-5.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto chain = random_chain(rng);
        const double d = ud(rng);
        const auto base = delin::sample_chain(chain, 12);
        const auto off = delin::offset_chain(chain, d, 12);
        ASSERT_EQ(base.size(), off.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            const Vec3 delta = off.points()[i] - base.points()[i];
            EXPECT_NEAR(delin::norm(delta), std::abs(d), 1e-12);
            const Vec3 t = chain.tangent(base.params()[i]);
            EXPECT_GT(delin::cross(t, delta).z * d, 0.0);
        }
    }
}

TEST(OffsetChainProperty, InvolutionOnStraights) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ud(-4.0, 4.0);
    std::uniform_real_distribution<double> ua(-3.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const oracle::Rigid T{ua(rng), {ua(rng), ua(rng), 0}};
        const Vec3 a = T({0, 0, 0});
        const Vec3 b = T({30, 0, 0});
        const Vec3 c = T({60, 0, 0});
        const Vec3 dir = delin::normalized(b - a);
        const std::vector<Vec3> pts{a, b, c};
        const std::vector<Vec3> tangents(3, dir);
        const auto chain = delin::chain_from_waypoints(pts, tangents);
        const double d = ud(rng);
        const auto there = delin::offset_chain(chain, d, 10);
        const auto base = delin::sample_chain(chain, 10);
        // Re-offset the shifted samples with the same, constant normal.
        const Vec3 n = chain.normal_left(0.0);
        for (std::size_t i = 0; i < there.size(); ++i) {
            EXPECT_LE(delin::norm(there.points()[i] - d * n - base.points()[i]), 1e-9);
        }
        const std::vector<Vec3> shifted{there.front(), there.points()[there.size() / 2], there.back()};
        const auto back = delin::offset_chain(delin::chain_from_waypoints(shifted, tangents), -d, 10);
        for (std::size_t i = 0; i < back.size(); ++i) {
            EXPECT_LE(delin::norm(back.points()[i] - base.points()[i]), 1e-9);
        }
    }
}

TEST(ChainProperty, C1HoldsForRandomChains) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const auto chain = random_chain(rng);
        for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
            const auto in = delin::tangent(chain.segments()[i], 1.0);
            const auto out = delin::tangent(chain.segments()[i + 1], 0.0);
            EXPECT_LE(delin::norm(in - out), 1e-9);
        }
    }
}

TEST(Extrapolate, StraightContinuation) {
    const auto chain = straight_chain({0, 30, 60});
    const auto ext = delin::extrapolate(chain, 10.0);
    ASSERT_TRUE(ext.has_value());
    EXPECT_EQ(ext->front(), (Vec3{60, 0, 0}));
    EXPECT_NEAR(ext->back().x, 70.0, 1e-12);
    EXPECT_NEAR(ext->back().y, 0.0, 1e-12);
    EXPECT_NEAR(ext->length(), 10.0, 1e-12);
}

TEST(Extrapolate, ZeroDistanceIsEmpty) {
    EXPECT_FALSE(delin::extrapolate(straight_chain({0, 30}), 0.0).has_value());
}

TEST(Extrapolate, ChordVersusArcOnRadiusHundred) {
    const oracle::Circle circle{{0, 100, 0}, 100.0};
    const double a0 = -std::numbers::pi / 2;
    const double a1 = a0 + 0.6;
    const auto chain = arc_chain(circle, a0, a1, 3);
    const auto ext = delin::extrapolate(chain, 10.0);
    ASSERT_TRUE(ext.has_value());
    // Deviation of the straight end from the circle point 10 m further on.
    const double expected = 100.0 * (1.0 - std::cos(10.0 / 100.0));
    const Vec3 on_circle = circle.at(a1 + 0.1);
    const Vec3 radial = delin::normalized(on_circle - circle.center);
    const double lateral = std::abs(delin::dot(ext->back() - on_circle, radial));
    EXPECT_NEAR(expected, 0.4996, 1e-4);
    EXPECT_NEAR(lateral, expected, 0.01);
}

TEST(Extrapolate, CapPolicy) {
    const auto chain = straight_chain({0, 30});
    try {
        delin::extrapolate(chain, 10.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::range_policy);
    }
    delin::ExtrapolationPolicy allow;
    allow.allow_beyond_cap = true;
    const auto ext = delin::extrapolate(chain, 25.0, allow);
    ASSERT_TRUE(ext.has_value());
    EXPECT_NEAR(ext->back().x, 55.0, 1e-12);
    EXPECT_THROW(delin::extrapolate(chain, -1.0), Error);
}

TEST(OffsetWithExtension, ContinuesFromOffsetEnd) {
    const auto chain = straight_chain({0, 30});
    const auto curve = delin::offset_with_extension(chain, -3.75, 8, 10.0);
    EXPECT_NEAR(curve.back().x, 40.0, 1e-12);
    EXPECT_NEAR(curve.back().y, -3.75, 1e-12);
    EXPECT_NEAR(curve.length(), 40.0, 1e-9);
}

TEST(ArcLength, Straight) {
    EXPECT_NEAR(delin::arc_length(straight_chain({0, 30}), 2), 30.0, 1e-9);
    EXPECT_NEAR(delin::arc_length(straight_chain({0, 10, 30}), 7), 30.0, 1e-9);
}

TEST(ArcLength, QuarterCircle) {
    const oracle::Circle circle{{0, 0, 0}, 100.0};
    const auto chain = arc_chain(circle, 0.0, std::numbers::pi / 2, 5);
    EXPECT_NEAR(delin::arc_length(chain, 64), 100.0 * std::numbers::pi / 2, 0.1);
}

TEST(ArcLength, MonotoneInSamples) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const auto chain = random_chain(rng);
        double prev = 0.0;
        for (std::size_t n : {2u, 3u, 5u, 9u, 17u, 33u, 65u}) {
            const double len = delin::arc_length(chain, n);
            EXPECT_GE(len, prev - 1e-9);
            prev = len;
        }
    }
}

TEST(ArcLength, DegenerateChainNotConstructible) {
    EXPECT_THROW(BezierChain({CubicBezier{{1, 1, 0}, {1, 1, 0}, {1, 1, 0}, {1, 1, 0}}}), Error);
}
