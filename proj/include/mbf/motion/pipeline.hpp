#pragma once

// Raw IMU samples -> calibrated, conditioned movement parameters at the
// feedback rate.
//
// Sensor frame: z up when upright, x forward, y to the right.
//   tilt_ap = atan2(acc.x, acc.z), positive = forward flexion; d/dt = gyro.y
//   tilt_ml = atan2(acc.y, acc.z), positive = right lean;      d/dt = gyro.x

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <vector>

#include "mbf/motion/filters.hpp"
#include "mbf/transport/osc.hpp"

namespace mbf::motion {

using transport::ImuSample;

MBF_DEFINE_ERROR(NotStationary);
MBF_DEFINE_ERROR(InsufficientSamples);

enum class Foot { left, right };

inline const char* to_string(Foot f) { return f == Foot::left ? "left" : "right"; }

struct StepEvent {
    Foot foot = Foot::left;
    TimeMs t = 0.0;
    TimeMs duration_since_prev = 0.0;  // same foot; 0 for the first event
    bool operator==(const StepEvent&) const = default;
};

struct MovementState {
    double tilt_ml = 0.0;
    double tilt_ap = 0.0;
    Point2 pos2d{};
    double jerk_sq = 0.0;
    std::optional<StepEvent> step_event;
    double flexion_angle = 0.0;
};

struct Tilt {
    double ml = 0.0;
    double ap = 0.0;
};

struct BiasEstimate {
    Vec3 gyro_bias{};
    Vec3 acc_bias{};
};

inline constexpr double kMaxStationaryGyroStd = 3.0;  // deg/s
inline constexpr std::size_t kMinCalibrationSamples = 100;

inline BiasEstimate calibrate_bias(std::span<const ImuSample> samples)
{
    if (samples.size() < kMinCalibrationSamples)
        throw InsufficientSamples("calibration needs at least 1 s of samples");
    const double n = static_cast<double>(samples.size());
    Vec3 gmean{}, amean{};
    for (const auto& s : samples) {
        gmean = gmean + s.gyro;
        amean = amean + s.acc;
    }
    gmean = gmean / n;
    amean = amean / n;
    Vec3 gvar{};
    for (const auto& s : samples) {
        const Vec3 d = s.gyro - gmean;
        gvar = gvar + Vec3{d.x * d.x, d.y * d.y, d.z * d.z};
    }
    gvar = gvar / n;
    for (int i = 0; i < 3; ++i)
        if (std::sqrt(gvar[i]) > kMaxStationaryGyroStd)
            throw NotStationary("gyro std-dev " + std::to_string(std::sqrt(gvar[i])) + " deg/s on axis " +
                                std::to_string(i));

    int axis = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(amean[i]) > std::abs(amean[axis])) axis = i;
    Vec3 gravity{};
    gravity[axis] = amean[axis] >= 0.0 ? 1.0 : -1.0;
    return {gmean, amean - gravity};
}

inline ImuSample correct_bias(ImuSample s, const BiasEstimate& b)
{
    s.gyro = s.gyro - b.gyro_bias;
    s.acc = s.acc - b.acc_bias;
    return s;
}

inline constexpr double kDefaultComplementaryAlpha = 0.98;

// One complementary-filter update. `sample.acc` is the gravity reference
// (already conditioned by the caller if desired).
// Complementary blend against an explicit reference angle (deg).
inline Tilt estimate_tilt_from(Tilt prev, const Vec3& gyro, Tilt ref, double dt,
                               double alpha = kDefaultComplementaryAlpha)
{
    auto blend = [&](double prev_deg, double rate, double r) {
        double v = alpha * (prev_deg + rate * dt) + (1.0 - alpha) * r;
        if (!std::isfinite(v)) v = r;
        if (!std::isfinite(v)) v = 0.0;
        return std::clamp(v, -90.0, 90.0);
    };
    return {blend(prev.ml, gyro.x, ref.ml), blend(prev.ap, gyro.y, ref.ap)};
}

inline Tilt estimate_tilt(const ImuSample& sample, Tilt prev, double dt,
                          double alpha = kDefaultComplementaryAlpha)
{
    const Tilt ref{std::atan2(sample.acc.y, sample.acc.z) * kDegPerRad,
                   std::atan2(sample.acc.x, sample.acc.z) * kDegPerRad};
    return estimate_tilt_from(prev, sample.gyro, ref, dt, alpha);
}

// Tilt estimator. The conditioning stage (median + lowpass) runs on the
// discrepancy between the accelerometer angle and the integrated gyro angle,
// and the reference handed to the complementary blend is gyro angle plus
// conditioned discrepancy. Motion on which both sensors agree therefore
// reaches the reference without filter lag, while accelerometer noise,
// spikes and gyro drift are still smoothed out.
class TiltEstimator {
public:
    explicit TiltEstimator(const FilterSpec& spec = {}, double alpha = kDefaultComplementaryAlpha)
        : alpha_(alpha), dt_(1.0 / spec.rate), cond_{SignalConditioner(spec), SignalConditioner(spec)} {}

    Tilt update(const ImuSample& s)
    {
        const double acc_ml = std::atan2(s.acc.y, s.acc.z) * kDegPerRad;
        const double acc_ap = std::atan2(s.acc.x, s.acc.z) * kDegPerRad;
        if (!started_) {
            gyro_angle_ = {acc_ml, acc_ap};
            tilt_ = reference_ = {std::clamp(acc_ml, -90.0, 90.0), std::clamp(acc_ap, -90.0, 90.0)};
            cond_[0].process(0.0);
            cond_[1].process(0.0);
            started_ = true;
            return tilt_;
        }
        gyro_angle_.ml += s.gyro.x * dt_;
        gyro_angle_.ap += s.gyro.y * dt_;
        reference_.ml = gyro_angle_.ml + cond_[0].process(acc_ml - gyro_angle_.ml);
        reference_.ap = gyro_angle_.ap + cond_[1].process(acc_ap - gyro_angle_.ap);
        tilt_ = estimate_tilt_from(tilt_, s.gyro, reference_, dt_, alpha_);
        return tilt_;
    }

    Tilt current() const { return tilt_; }
    Tilt reference() const { return reference_; }

private:
    double alpha_;
    double dt_;
    std::array<SignalConditioner, 2> cond_;
    Tilt gyro_angle_{};
    Tilt reference_{};
    Tilt tilt_{};
    bool started_ = false;
};

// Smoothed instantaneous squared jerk in (m/s^3)^2.
class JerkEstimator {
public:
    explicit JerkEstimator(const FilterSpec& spec = {3, 8.0})
        : dt_(1.0 / spec.rate), acc_{SignalConditioner(spec), SignalConditioner(spec), SignalConditioner(spec)},
          smooth_(design_butterworth(spec)) {}

    double update(const Vec3& acc_g)
    {
        Vec3 a;
        for (int i = 0; i < 3; ++i) a[i] = acc_[static_cast<std::size_t>(i)].process(acc_g[i]) * kGravity;
        double raw = 0.0;
        if (has_prev_) raw = ((a - prev_) / dt_).norm_sq();
        prev_ = a;
        if (!has_prev_) {
            for (auto& s : smooth_) s.prime(0.0);
            has_prev_ = true;
        }
        double y = raw;
        for (auto& s : smooth_) y = s.process(y);
        return std::max(0.0, y);
    }

private:
    double dt_;
    std::array<SignalConditioner, 3> acc_;
    ButterworthCascade smooth_;
    Vec3 prev_{};
    bool has_prev_ = false;
};

inline std::vector<double> compute_jerk(std::span<const Vec3> acc_stream, const FilterSpec& spec = {3, 8.0})
{
    JerkEstimator j(spec);
    std::vector<double> out;
    out.reserve(acc_stream.size());
    for (const auto& a : acc_stream) out.push_back(j.update(a));
    return out;
}

struct StepDetectorConfig {
    FilterSpec filter{1, 30.0};
    double threshold_g = 1.3;
    TimeMs refractory_ms = 300.0;
    bool operator==(const StepDetectorConfig&) const = default;
};

// Rising-edge threshold detector on the conditioned acceleration magnitude.
// The reported event time is the raw-magnitude peak among the recent
// samples, which removes the conditioning delay from the timestamp.
class StepDetector {
public:
    explicit StepDetector(Foot foot, const StepDetectorConfig& cfg = {})
        : foot_(foot), cfg_(cfg), cond_(cfg.filter) {}

    std::optional<StepEvent> update(const ImuSample& s)
    {
        const double raw = s.acc.norm();
        history_[head_] = {s.t_rx, raw};
        head_ = (head_ + 1) % history_.size();
        if (filled_ < history_.size()) ++filled_;

        const double v = cond_.process(raw);
        const bool above = v >= cfg_.threshold_g;
        const bool rising = above && !above_;
        above_ = above;
        if (!rising) return std::nullopt;

        const TimeMs t = peak_time(s.t_rx);
        if (last_t_ && t - *last_t_ < cfg_.refractory_ms) return std::nullopt;
        StepEvent e{foot_, t, last_t_ ? t - *last_t_ : 0.0};
        last_t_ = t;
        return e;
    }

    Foot foot() const { return foot_; }

private:
    static constexpr TimeMs kPeakSearchMs = 80.0;

    TimeMs peak_time(TimeMs now) const
    {
        TimeMs best_t = now;
        double best = -1.0;
        for (std::size_t i = 0; i < filled_; ++i) {
            const auto& h = history_[i];
            if (now - h.t > kPeakSearchMs) continue;
            if (h.mag > best || (h.mag == best && h.t < best_t)) {
                best = h.mag;
                best_t = h.t;
            }
        }
        return best_t;
    }

    struct Entry {
        TimeMs t = 0.0;
        double mag = 0.0;
    };

    Foot foot_;
    StepDetectorConfig cfg_;
    SignalConditioner cond_;
    std::array<Entry, 16> history_{};
    std::size_t head_ = 0;
    std::size_t filled_ = 0;
    bool above_ = false;
    std::optional<TimeMs> last_t_;
};

inline std::vector<StepEvent> detect_step(std::span<const ImuSample> stream, Foot foot,
                                          const StepDetectorConfig& cfg = {})
{
    StepDetector d(foot, cfg);
    std::vector<StepEvent> out;
    for (const auto& s : stream)
        if (auto e = d.update(s)) out.push_back(*e);
    return out;
}

}  // namespace mbf::motion
