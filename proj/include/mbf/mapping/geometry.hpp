#pragma once

#include <array>
#include <cmath>
#include <string>

#include "mbf/mapping/feedback.hpp"

namespace mbf::mapping {

// Six feedback zones around a target trunk orientation: three concentric
// ellipses (zones 0..2 inside ring i, zone 3 outside all rings) and two
// lateral rectangles (4 = left, 5 = right) that take priority.
struct ZoneLayout {
    Point2 center{};
    std::array<Point2, 3> radii{Point2{2.0, 2.0}, Point2{4.0, 4.0}, Point2{6.0, 6.0}};  // semi-axes (ml, ap)
    double rect_ml_bound = 8.0;

    bool operator==(const ZoneLayout&) const = default;

    void validate() const
    {
        for (std::size_t i = 0; i < radii.size(); ++i) {
            if (!(radii[i].ml > 0.0 && radii[i].ap > 0.0)) throw ConfigInvalid("ring radii must be positive");
            if (i > 0 && !(radii[i].ml > radii[i - 1].ml && radii[i].ap > radii[i - 1].ap))
                throw ConfigInvalid("ring radii must be strictly ascending");
        }
        if (!(rect_ml_bound > radii.back().ml)) throw ConfigInvalid("rect_ml_bound must exceed outer ring");
    }
};

inline constexpr int kZoneCount = 6;
inline constexpr int kZoneLeft = 4;
inline constexpr int kZoneRight = 5;

inline int allocate_zone(Point2 pos, const ZoneLayout& layout)
{
    const double dml = pos.ml - layout.center.ml;
    const double dap = pos.ap - layout.center.ap;
    if (std::abs(dml) > layout.rect_ml_bound) return dml < 0.0 ? kZoneLeft : kZoneRight;
    for (int i = 0; i < 3; ++i) {
        const auto& r = layout.radii[static_cast<std::size_t>(i)];
        const double u = dml / r.ml;
        const double v = dap / r.ap;
        if (u * u + v * v <= 1.0) return i;
    }
    return 3;
}

// Feedback intensity per zone: rings step up by thirds, rectangles are maximal.
inline double zone_intensity(int zone)
{
    static constexpr std::array<double, kZoneCount> kLevels{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0, 1.0};
    return kLevels[static_cast<std::size_t>(std::clamp(zone, 0, kZoneCount - 1))];
}

enum class TrajectoryShape { linear, diagonal, circular, square, rhombic };

inline const char* to_string(TrajectoryShape s)
{
    switch (s) {
    case TrajectoryShape::linear: return "linear";
    case TrajectoryShape::diagonal: return "diagonal";
    case TrajectoryShape::circular: return "circular";
    case TrajectoryShape::square: return "square";
    case TrajectoryShape::rhombic: return "rhombic";
    }
    return "linear";
}

struct Trajectory {
    TrajectoryShape shape = TrajectoryShape::circular;
    Point2 amp{5.0, 5.0};
    int tempo_divisor = 4;  // one cycle spans this many beats
    Point2 center{};

    bool operator==(const Trajectory&) const = default;

    void validate() const
    {
        if (!(amp.ml > 0.0 && amp.ap > 0.0)) throw ConfigInvalid("trajectory amplitude must be positive");
        if (tempo_divisor < 1) throw ConfigInvalid("tempo_divisor must be >= 1");
    }
};

// Triangle wave with tri(0) = 1, tri(0.5) = -1, period 1.
inline double triangle_wave(double theta) { return std::abs(4.0 * theta - 2.0) - 1.0; }

namespace detail {

template <std::size_t N>
Point2 walk_closed_polygon(const std::array<Point2, N>& v, double theta)
{
    std::array<double, N> len{};
    double perimeter = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const auto& a = v[i];
        const auto& b = v[(i + 1) % N];
        len[i] = std::hypot(b.ml - a.ml, b.ap - a.ap);
        perimeter += len[i];
    }
    double s = theta * perimeter;
    for (std::size_t i = 0; i < N; ++i) {
        if (s <= len[i] || i == N - 1) {
            const double f = len[i] > 0.0 ? std::min(s / len[i], 1.0) : 0.0;
            const auto& a = v[i];
            const auto& b = v[(i + 1) % N];
            return {a.ml + f * (b.ml - a.ml), a.ap + f * (b.ap - a.ap)};
        }
        s -= len[i];
    }
    return v[0];
}

}  // namespace detail

inline Point2 trajectory_position(const Trajectory& traj, double beat_phase)
{
    double theta = std::fmod(beat_phase / traj.tempo_divisor, 1.0);
    if (theta < 0.0) theta += 1.0;
    const auto& c = traj.center;
    const auto& a = traj.amp;
    switch (traj.shape) {
    case TrajectoryShape::circular: {
        const double w = 2.0 * kPi * theta;
        return {c.ml + a.ml * std::cos(w), c.ap + a.ap * std::sin(w)};
    }
    case TrajectoryShape::linear: return {c.ml + a.ml * triangle_wave(theta), c.ap};
    case TrajectoryShape::diagonal: {
        const double t = triangle_wave(theta);
        return {c.ml + a.ml * t, c.ap + a.ap * t};
    }
    case TrajectoryShape::square: {
        const std::array<Point2, 4> v{Point2{a.ml, a.ap}, Point2{-a.ml, a.ap}, Point2{-a.ml, -a.ap},
                                      Point2{a.ml, -a.ap}};
        const auto p = detail::walk_closed_polygon(v, theta);
        return {c.ml + p.ml, c.ap + p.ap};
    }
    case TrajectoryShape::rhombic: {
        const std::array<Point2, 4> v{Point2{a.ml, 0.0}, Point2{0.0, a.ap}, Point2{-a.ml, 0.0},
                                      Point2{0.0, -a.ap}};
        const auto p = detail::walk_closed_polygon(v, theta);
        return {c.ml + p.ml, c.ap + p.ap};
    }
    }
    return c;
}

struct SigmoidFeedbackConfig {
    double lead_beats = 0.25;
    double slope = 1.0;            // per degree
    double dead_half_width = 1.0;  // degrees
    bool operator==(const SigmoidFeedbackConfig&) const = default;
};

struct DirectionalPair {
    FeedbackVariable ml{0.5, true};
    FeedbackVariable ap{0.5, true};
};

// Directional feedback from the distance between the user and where the
// trajectory will be `lead_beats` ahead.
inline DirectionalPair anticipated_error_feedback(Point2 user, const Trajectory& traj, double beat_phase,
                                                  double lead_beats, double slope, double dead_half_width)
{
    const Point2 target = trajectory_position(traj, beat_phase + lead_beats);
    return {{sigmoid_pair(user.ml - target.ml, slope, dead_half_width), true},
            {sigmoid_pair(user.ap - target.ap, slope, dead_half_width), true}};
}

}  // namespace mbf::mapping
