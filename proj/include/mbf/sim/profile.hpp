#pragma once

// Deterministic synthetic motion: analytic trunk tilt traces, gravity-consistent
// accelerometer samples, gyro as the analytic angular rate, and scripted
// footfall spikes on the leg sensors. Replay re-emits the raw samples from an
// engine log.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbf/mapping/geometry.hpp"
#include "mbf/motion/pipeline.hpp"
#include "mbf/session/log.hpp"
#include "mbf/transport/osc.hpp"

namespace mbf::sim {

using transport::ImuSample;

MBF_DEFINE_ERROR(InvalidProfile);

inline constexpr double kSamplePeriodMs = 8.0;  // 125 Hz
inline constexpr double kMaxTiltDeg = 60.0;
inline constexpr double kMaxCadence = 160.0;

enum class ProfileKind { static_sway, reach, sts, gait, replay };
enum class Axis { ml, ap };

NLOHMANN_JSON_SERIALIZE_ENUM(ProfileKind, {{ProfileKind::static_sway, "static_sway"},
                                           {ProfileKind::reach, "reach"},
                                           {ProfileKind::sts, "sts"},
                                           {ProfileKind::gait, "gait"},
                                           {ProfileKind::replay, "replay"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Axis, {{Axis::ml, "ml"}, {Axis::ap, "ap"}})

struct MotionProfile {
    ProfileKind kind = ProfileKind::static_sway;
    double duration = 10.0;  // s
    std::uint64_t seed = 1;

    // Constant trunk orientation added to every kind (deg).
    double offset_ml = 0.0;
    double offset_ap = 0.0;
    double acc_noise = 0.0;   // g, std-dev
    double gyro_noise = 0.0;  // deg/s, std-dev
    double gyro_offset = 0.0; // deg/s, added to every gyro axis

    // static_sway
    double sway_amp = 0.0;  // deg
    double sway_freq = 0.25;
    Axis sway_axis = Axis::ml;

    // reach: repeated excursions start, rise, hold, return
    double reach_angle = 20.0;
    double reach_period = 4.0;  // s
    double reach_start = 1.0;   // s, first onset
    double reach_rise = 0.5;    // s
    double reach_hold = 1.0;    // s
    int reach_count = 0;        // 0 = as many as fit
    Axis reach_axis = Axis::ap;

    // sts: AP flexion bump per cycle plus intermittency bursts
    double sts_peak = 45.0;
    double sts_period = 6.0;   // s
    double sts_start = 1.0;    // s
    double sts_duration = 2.0; // s, flexion up and back down
    std::vector<double> burst_times;  // s
    double burst_amp = 0.3;    // g
    double burst_ms = 80.0;

    // gait
    double cadence = 100.0;  // steps/min
    double jitter_ms = 0.0;  // uniform +-jitter per step
    double spike_g = 1.8;
    int spike_samples = 2;

    // replay
    std::string replay_path;

    // Threshold reported as ground-truth crossings of the primary angle.
    double crossing_deg = 30.0;

    void validate() const
    {
        if (!(duration > 0.0)) throw InvalidProfile("duration must be positive");
        auto tilt_ok = [](double a) { return std::abs(a) <= kMaxTiltDeg; };
        if (!tilt_ok(offset_ml) || !tilt_ok(offset_ap)) throw InvalidProfile("offset exceeds 60 deg");
        if (acc_noise < 0.0 || gyro_noise < 0.0) throw InvalidProfile("noise must be >= 0");
        switch (kind) {
        case ProfileKind::static_sway:
            if (!tilt_ok(sway_amp + std::max(std::abs(offset_ml), std::abs(offset_ap))))
                throw InvalidProfile("sway amplitude exceeds 60 deg");
            if (!(sway_freq > 0.0)) throw InvalidProfile("sway frequency must be positive");
            break;
        case ProfileKind::reach:
            if (!tilt_ok(reach_angle)) throw InvalidProfile("reach angle exceeds 60 deg");
            if (!(reach_rise > 0.0 && reach_hold >= 0.0 && reach_start >= 0.0))
                throw InvalidProfile("reach timing must be positive");
            if (!(reach_period >= 2.0 * reach_rise + reach_hold))
                throw InvalidProfile("reach period shorter than one excursion");
            if (reach_count < 0) throw InvalidProfile("reach_count must be >= 0");
            break;
        case ProfileKind::sts:
            if (!tilt_ok(sts_peak) || sts_peak <= 0.0) throw InvalidProfile("sts peak must be in (0, 60]");
            if (!(sts_duration > 0.0 && sts_period >= sts_duration)) throw InvalidProfile("bad sts timing");
            if (!(burst_ms > 0.0)) throw InvalidProfile("burst length must be positive");
            break;
        case ProfileKind::gait:
            if (!(cadence > 0.0 && cadence <= kMaxCadence)) throw InvalidProfile("cadence must be in (0, 160]");
            if (jitter_ms < 0.0 || jitter_ms >= 30000.0 / cadence) throw InvalidProfile("jitter too large");
            if (spike_samples < 1) throw InvalidProfile("spike_samples must be >= 1");
            break;
        case ProfileKind::replay:
            if (replay_path.empty()) throw InvalidProfile("replay needs a log path");
            break;
        }
    }

    bool operator==(const MotionProfile&) const = default;
};

// Missing keys keep their defaults.
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    MotionProfile, kind, duration, seed, offset_ml, offset_ap, acc_noise, gyro_noise, gyro_offset,
    sway_amp, sway_freq, sway_axis, reach_angle, reach_period, reach_start, reach_rise, reach_hold,
    reach_count, reach_axis, sts_peak, sts_period, sts_start, sts_duration, burst_times, burst_amp,
    burst_ms, cadence, jitter_ms, spike_g, spike_samples, replay_path, crossing_deg)

inline MotionProfile load_profile(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidProfile("cannot open profile " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidProfile(path.string() + ": " + e.what());
    }
    MotionProfile p = j.get<MotionProfile>();
    if (p.kind == ProfileKind::replay && !p.replay_path.empty()) {
        std::filesystem::path rp(p.replay_path);
        if (rp.is_relative()) p.replay_path = (path.parent_path() / rp).string();
    }
    p.validate();
    return p;
}

// One sensor slot per body location: trunk, left leg, right leg.
enum Slot : std::size_t { kTrunk = 0, kLeftLeg = 1, kRightLeg = 2 };
inline constexpr std::size_t kSlots = 3;

struct SimFrame {
    TimeMs t = 0.0;  // ms from profile start
    std::array<ImuSample, kSlots> sensors{};
};

struct Footfall {
    TimeMs t = 0.0;  // time of the first spike sample
    motion::Foot foot = motion::Foot::left;
};

struct GroundTruth {
    std::vector<Footfall> footfalls;
    std::vector<TimeMs> crossings;        // rising crossings of crossing_deg by the primary angle
    std::vector<TimeMs> falling_crossings;
    std::vector<TimeMs> onsets;           // reach / sts cycle starts
    std::vector<TimeMs> bursts;           // intermittency burst starts
    std::vector<Point2> tilt;             // analytic (ml, ap) per frame
    int repetitions = 0;
};

struct GeneratedProfile {
    std::vector<SimFrame> frames;
    GroundTruth truth;
};

// Gravity in the sensor frame for a given tilt, such that
// atan2(x, z) = ap and atan2(y, z) = ml exactly.
inline Vec3 gravity_for_tilt(double ml_deg, double ap_deg)
{
    const Vec3 v{std::tan(ap_deg / kDegPerRad), std::tan(ml_deg / kDegPerRad), 1.0};
    return v / v.norm();
}

namespace detail {

inline double raised_cosine(double x) { return 0.5 - 0.5 * std::cos(kPi * std::clamp(x, 0.0, 1.0)); }

// Excursion 0 -> 1 -> 0: rise, hold, fall; u in seconds from onset.
inline double excursion(double u, double rise, double hold)
{
    if (u < 0.0) return 0.0;
    if (u < rise) return raised_cosine(u / rise);
    if (u < rise + hold) return 1.0;
    if (u < 2.0 * rise + hold) return 1.0 - raised_cosine((u - rise - hold) / rise);
    return 0.0;
}

inline int reach_total(const MotionProfile& p)
{
    const double avail = p.duration - p.reach_start - (2.0 * p.reach_rise + p.reach_hold);
    const int fit = avail < 0.0 ? 0 : static_cast<int>(std::floor(avail / p.reach_period)) + 1;
    return p.reach_count > 0 ? std::min(p.reach_count, fit) : fit;
}

inline int sts_total(const MotionProfile& p)
{
    const double avail = p.duration - p.sts_start - p.sts_duration;
    return avail < 0.0 ? 0 : static_cast<int>(std::floor(avail / p.sts_period)) + 1;
}

// Analytic trunk tilt (ml, ap) in degrees at time t seconds.
inline Point2 analytic_tilt(const MotionProfile& p, double t)
{
    Point2 out{p.offset_ml, p.offset_ap};
    switch (p.kind) {
    case ProfileKind::static_sway: {
        const double v = p.sway_amp * std::sin(2.0 * kPi * p.sway_freq * t);
        (p.sway_axis == Axis::ml ? out.ml : out.ap) += v;
        break;
    }
    case ProfileKind::reach: {
        const int n = reach_total(p);
        if (n == 0 || t < p.reach_start) break;
        const int k = std::min(static_cast<int>(std::floor((t - p.reach_start) / p.reach_period)), n - 1);
        const double u = t - p.reach_start - k * p.reach_period;
        (p.reach_axis == Axis::ml ? out.ml : out.ap) += p.reach_angle * excursion(u, p.reach_rise, 0.0 + p.reach_hold);
        break;
    }
    case ProfileKind::sts: {
        const int n = sts_total(p);
        if (n == 0 || t < p.sts_start) break;
        const int k = std::min(static_cast<int>(std::floor((t - p.sts_start) / p.sts_period)), n - 1);
        const double u = t - p.sts_start - k * p.sts_period;
        if (u < p.sts_duration) out.ap += p.sts_peak * 0.5 * (1.0 - std::cos(2.0 * kPi * u / p.sts_duration));
        break;
    }
    case ProfileKind::gait:
    case ProfileKind::replay: break;
    }
    return out;
}

inline double primary_angle(const MotionProfile& p, Point2 tilt)
{
    switch (p.kind) {
    case ProfileKind::static_sway: return p.sway_axis == Axis::ml ? tilt.ml : tilt.ap;
    case ProfileKind::reach: return p.reach_axis == Axis::ml ? tilt.ml : tilt.ap;
    default: return tilt.ap;
    }
}

// Crossing instant by bisection on the analytic trace inside [a, b] seconds.
inline double refine_crossing(const MotionProfile& p, double a, double b, double level)
{
    auto f = [&](double t) { return primary_angle(p, analytic_tilt(p, t)) - level; };
    double fa = f(a);
    for (int i = 0; i < 60; ++i) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if ((fm >= 0.0) == (fa >= 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

// Logged raw samples at their logged times relative to the first row,
// snapped to the row period so scheduler jitter cannot move a sample into
// the neighbouring tick.
inline std::vector<SimFrame> load_replay_frames(const std::filesystem::path& path)
{
    const auto rows = session::read_log(path);
    std::vector<SimFrame> frames;
    frames.reserve(rows.size());
    // One row per mapping tick, so the row index is the replay clock. Wall
    // timestamps jitter and would open holes in the tick grid.
    for (const auto& r : rows) {
        SimFrame f;
        f.t = static_cast<double>(frames.size()) * session::kLogPeriodMs;
        for (std::size_t s = 0; s < kSlots; ++s) {
            f.sensors[s].t_rx = f.t;
            f.sensors[s].acc = r.raw[s].acc;
            f.sensors[s].gyro = r.raw[s].gyro;
        }
        frames.push_back(f);
    }
    return frames;
}

inline GeneratedProfile generate_profile(const MotionProfile& p)
{
    p.validate();
    GeneratedProfile g;
    if (p.kind == ProfileKind::replay) {
        g.frames = load_replay_frames(p.replay_path);
        return g;
    }

    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> acc_n(0.0, 1.0), gyro_n(0.0, 1.0);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);

    // Footfall schedule snapped to the sample grid.
    std::vector<std::pair<long, motion::Foot>> spikes;
    if (p.kind == ProfileKind::gait) {
        const double step_ms = 60000.0 / p.cadence;
        for (int k = 0;; ++k) {
            const double nominal = step_ms * (k + 0.5);
            const double t = nominal + (p.jitter_ms > 0.0 ? p.jitter_ms * jitter(rng) : 0.0);
            if (nominal >= p.duration * 1000.0) break;
            const long idx = std::lround(t / kSamplePeriodMs);
            if (static_cast<double>(idx + p.spike_samples - 1) * kSamplePeriodMs >= p.duration * 1000.0) break;
            const auto foot = (k % 2 == 0) ? motion::Foot::left : motion::Foot::right;
            spikes.emplace_back(idx, foot);
            g.truth.footfalls.push_back({static_cast<double>(idx) * kSamplePeriodMs, foot});
        }
    }

    const long n = static_cast<long>(std::ceil(p.duration * 1000.0 / kSamplePeriodMs - 1e-9));
    g.frames.reserve(static_cast<std::size_t>(n));
    g.truth.tilt.reserve(static_cast<std::size_t>(n));
    constexpr double h = 1e-5;  // s, for the angular rate
    std::size_t next_spike = 0;
    for (long k = 0; k < n; ++k) {
        const double t_ms = static_cast<double>(k) * kSamplePeriodMs;
        const double t = t_ms / 1000.0;
        const Point2 tilt = detail::analytic_tilt(p, t);
        const Point2 before = detail::analytic_tilt(p, t - h);
        const Point2 after = detail::analytic_tilt(p, t + h);
        SimFrame f;
        f.t = t_ms;
        ImuSample& trunk = f.sensors[kTrunk];
        trunk.t_rx = t_ms;
        trunk.acc = gravity_for_tilt(tilt.ml, tilt.ap);
        trunk.gyro = {(after.ml - before.ml) / (2.0 * h), (after.ap - before.ap) / (2.0 * h), 0.0};
        if (p.kind == ProfileKind::sts)
            for (double b : p.burst_times) {
                const double u = t - b;
                if (u >= 0.0 && u * 1000.0 < p.burst_ms)
                    trunk.acc.x += p.burst_amp * std::sin(2.0 * kPi * u * 1000.0 / p.burst_ms);
            }
        for (std::size_t s = 0; s < kSlots; ++s) {
            f.sensors[s].t_rx = t_ms;
            if (s != kTrunk) f.sensors[s].acc = {0.0, 0.0, 1.0};
        }
        while (next_spike < spikes.size() && spikes[next_spike].first + p.spike_samples <= k) ++next_spike;
        for (std::size_t i = next_spike; i < spikes.size() && spikes[i].first <= k; ++i) {
            const auto slot = spikes[i].second == motion::Foot::left ? kLeftLeg : kRightLeg;
            if (k < spikes[i].first + p.spike_samples) f.sensors[slot].acc = {0.0, 0.0, p.spike_g};
        }
        for (auto& s : f.sensors) {
            if (p.acc_noise > 0.0)
                for (int a = 0; a < 3; ++a) s.acc[a] += p.acc_noise * acc_n(rng);
            if (p.gyro_noise > 0.0)
                for (int a = 0; a < 3; ++a) s.gyro[a] += p.gyro_noise * gyro_n(rng);
            if (p.gyro_offset != 0.0)
                for (int a = 0; a < 3; ++a) s.gyro[a] += p.gyro_offset;
        }
        g.frames.push_back(f);
        g.truth.tilt.push_back(tilt);
    }

    // Threshold crossings of the analytic primary angle, refined between samples.
    for (std::size_t k = 1; k < g.truth.tilt.size(); ++k) {
        const double a = detail::primary_angle(p, g.truth.tilt[k - 1]);
        const double b = detail::primary_angle(p, g.truth.tilt[k]);
        const double t0 = g.frames[k - 1].t / 1000.0, t1 = g.frames[k].t / 1000.0;
        if (a < p.crossing_deg && b >= p.crossing_deg)
            g.truth.crossings.push_back(detail::refine_crossing(p, t0, t1, p.crossing_deg) * 1000.0);
        if (a >= p.crossing_deg && b < p.crossing_deg)
            g.truth.falling_crossings.push_back(detail::refine_crossing(p, t0, t1, p.crossing_deg) * 1000.0);
    }
    if (p.kind == ProfileKind::reach) {
        g.truth.repetitions = detail::reach_total(p);
        for (int k = 0; k < g.truth.repetitions; ++k) g.truth.onsets.push_back((p.reach_start + k * p.reach_period) * 1000.0);
    } else if (p.kind == ProfileKind::sts) {
        g.truth.repetitions = detail::sts_total(p);
        for (int k = 0; k < g.truth.repetitions; ++k) g.truth.onsets.push_back((p.sts_start + k * p.sts_period) * 1000.0);
        for (double b : p.burst_times) g.truth.bursts.push_back(b * 1000.0);
    } else if (p.kind == ProfileKind::gait) {
        g.truth.repetitions = static_cast<int>(g.truth.footfalls.size());
    }
    return g;
}

// Zone index per frame of the analytic tilt trace.
inline std::vector<int> zone_occupancy(const GroundTruth& truth, const mapping::ZoneLayout& layout)
{
    std::vector<int> z;
    z.reserve(truth.tilt.size());
    for (const auto& p : truth.tilt) z.push_back(mapping::allocate_zone(p, layout));
    return z;
}

}  // namespace mbf::sim
