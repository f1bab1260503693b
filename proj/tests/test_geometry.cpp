#include <catch_amalgamated.hpp>

#include "mbf/mapping/geometry.hpp"

using namespace mbf;
using namespace mbf::mapping;

namespace {

// Polar classifier: a point is inside ring i when its distance from the
// center does not exceed the ellipse radius along its own direction.
int polar_zone(Point2 p, const ZoneLayout& l)
{
    const double x = p.ml - l.center.ml, y = p.ap - l.center.ap;
    if (x > l.rect_ml_bound) return 5;
    if (x < -l.rect_ml_bound) return 4;
    const double r = std::hypot(x, y);
    const double phi = std::atan2(y, x);
    for (int i = 0; i < 3; ++i) {
        const double a = l.radii[static_cast<std::size_t>(i)].ml, b = l.radii[static_cast<std::size_t>(i)].ap;
        const double R = a * b / std::hypot(b * std::cos(phi), a * std::sin(phi));
        if (r <= R * (1.0 + 1e-12)) return i;
    }
    return 3;
}

std::vector<ZoneLayout> presets()
{
    std::vector<ZoneLayout> v;
    v.push_back({});
    v.push_back({{0, 0}, {Point2{2, 3}, Point2{4, 6}, Point2{6, 9}}, 8.0});
    ZoneLayout shifted;
    shifted.center = {3.0, -2.0};
    v.push_back(shifted);
    v.push_back({{0, 0}, {Point2{1, 0.5}, Point2{1.5, 1}, Point2{3, 5}}, 4.0});
    v.push_back({{0, 0}, {Point2{5, 5}, Point2{10, 10}, Point2{15, 15}}, 25.0});
    return v;
}

}  // namespace

TEST_CASE("zone examples")
{
    const ZoneLayout l;
    REQUIRE(allocate_zone(l.center, l) == 0);
    REQUIRE(allocate_zone({8.5, 0.0}, l) == kZoneRight);
    REQUIRE(allocate_zone({-8.5, 0.0}, l) == kZoneLeft);
    REQUIRE(allocate_zone({3.0, 0.0}, l) == 1);
    REQUIRE(allocate_zone({3.0 / std::sqrt(2.0), 3.0 / std::sqrt(2.0)}, l) == 1);
    REQUIRE(allocate_zone({2.0, 0.0}, l) == 0);  // boundary goes to the inner zone
    REQUIRE(allocate_zone({0.0, 7.0}, l) == 3);
    // Rectangles take priority even at large AP.
    REQUIRE(allocate_zone({9.0, 30.0}, l) == kZoneRight);
}

TEST_CASE("zone allocation agrees with the polar classifier on a dense grid")
{
    for (const auto& l : presets()) {
        l.validate();
        const double span = l.rect_ml_bound * 1.3;
        int mismatches = 0;
        for (int i = 0; i < 100; ++i)
            for (int j = 0; j < 100; ++j) {
                const Point2 p{l.center.ml - span + 2.0 * span * (i + 0.5) / 100.0,
                               l.center.ap - span + 2.0 * span * (j + 0.5) / 100.0};
                mismatches += allocate_zone(p, l) != polar_zone(p, l);
            }
        REQUIRE(mismatches == 0);
    }
}

TEST_CASE("zone intensity rises with distance")
{
    for (int z = 1; z < kZoneCount; ++z) REQUIRE(zone_intensity(z) >= zone_intensity(z - 1));
    REQUIRE(zone_intensity(0) == 0.0);
    REQUIRE(zone_intensity(3) == 1.0);
}

TEST_CASE("layout validation")
{
    ZoneLayout l;
    l.radii[1] = {1.0, 4.0};
    REQUIRE_THROWS_AS(l.validate(), ConfigInvalid);
    l = {};
    l.rect_ml_bound = 6.0;
    REQUIRE_THROWS_AS(l.validate(), ConfigInvalid);
}

TEST_CASE("circular trajectory quarter points")
{
    Trajectory t;
    t.center = {1.0, -1.0};
    t.amp = {5.0, 3.0};
    t.tempo_divisor = 4;
    auto p0 = trajectory_position(t, 0.0);
    REQUIRE(p0.ml == Catch::Approx(6.0));
    REQUIRE(p0.ap == Catch::Approx(-1.0));
    auto p1 = trajectory_position(t, 1.0);  // theta = 0.25
    REQUIRE(p1.ml == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(p1.ap == Catch::Approx(2.0));
}

TEST_CASE("square trajectory follows its perimeter at constant speed")
{
    Trajectory t;
    t.shape = TrajectoryShape::square;
    t.amp = {4.0, 4.0};
    t.tempo_divisor = 1;
    // Arc-length oracle: side length 8, perimeter 32, corners (+,+) (-,+) (-,-) (+,-).
    auto oracle = [](double theta) -> Point2 {
        const double s = theta * 32.0;
        if (s <= 8.0) return {4.0 - s, 4.0};
        if (s <= 16.0) return {-4.0, 4.0 - (s - 8.0)};
        if (s <= 24.0) return {-4.0 + (s - 16.0), -4.0};
        return {4.0, -4.0 + (s - 24.0)};
    };
    const auto mid = trajectory_position(t, 0.125);
    REQUIRE(mid.ml == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(mid.ap == Catch::Approx(4.0));
    for (int i = 0; i < 1000; ++i) {
        const double th = i / 1000.0;
        const auto p = trajectory_position(t, th);
        const auto q = oracle(th);
        REQUIRE(p.ml == Catch::Approx(q.ml).margin(1e-9));
        REQUIRE(p.ap == Catch::Approx(q.ap).margin(1e-9));
    }
}

TEST_CASE("rhombic, linear and diagonal shapes")
{
    Trajectory t;
    t.tempo_divisor = 1;
    t.amp = {3.0, 2.0};
    t.shape = TrajectoryShape::rhombic;
    auto r0 = trajectory_position(t, 0.0);
    REQUIRE(r0.ml == Catch::Approx(3.0));
    REQUIRE(r0.ap == Catch::Approx(0.0).margin(1e-12));
    auto r1 = trajectory_position(t, 0.25);
    REQUIRE(r1.ml == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(r1.ap == Catch::Approx(2.0));
    t.shape = TrajectoryShape::linear;
    REQUIRE(trajectory_position(t, 0.0).ml == Catch::Approx(3.0));
    REQUIRE(trajectory_position(t, 0.5).ml == Catch::Approx(-3.0));
    REQUIRE(trajectory_position(t, 0.25).ap == 0.0);
    t.shape = TrajectoryShape::diagonal;
    REQUIRE(trajectory_position(t, 0.5).ap == Catch::Approx(-2.0));
}

TEST_CASE("every shape is periodic")
{
    for (auto shape : {TrajectoryShape::linear, TrajectoryShape::diagonal, TrajectoryShape::circular,
                       TrajectoryShape::square, TrajectoryShape::rhombic}) {
        Trajectory t;
        t.shape = shape;
        t.amp = {4.0, 7.0};
        t.tempo_divisor = 3;
        t.center = {0.5, 1.5};
        for (double b = 0.0; b < 12.0; b += 0.037) {
            const auto p = trajectory_position(t, b);
            const auto q = trajectory_position(t, b + 3.0);
            REQUIRE(std::abs(p.ml - q.ml) < 1e-9);
            REQUIRE(std::abs(p.ap - q.ap) < 1e-9);
        }
    }
}

TEST_CASE("anticipated error feedback")
{
    Trajectory t;
    t.tempo_divisor = 4;
    // On the anticipated target: neutral on both axes.
    const auto target = trajectory_position(t, 1.0 + 0.25);
    const auto fv = anticipated_error_feedback(target, t, 1.0, 0.25, 1.0, 1.0);
    REQUIRE(fv.ml.value == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(fv.ap.value == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(fv.ml.directional);
    // Far right of the target: saturates to 1 on ML; far below: 0 on AP.
    const auto far = anticipated_error_feedback({target.ml + 100.0, target.ap - 100.0}, t, 1.0, 0.25, 1.0, 1.0);
    REQUIRE(far.ml.value == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(far.ap.value == Catch::Approx(0.0).margin(1e-9));
}
