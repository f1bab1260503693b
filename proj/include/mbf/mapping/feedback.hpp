#pragma once

// Movement parameter -> feedback variable in [0, 1].
//
// A target range yields zero feedback. Outside it the compliance error is
// normalized against the bound on that side, shaped by a power law, then
// optionally quantized, made directional (0.5 = neutral) and inverted.

#include <algorithm>
#include <cmath>
#include <utility>

#include "mbf/common.hpp"

namespace mbf::mapping {

MBF_DEFINE_ERROR(ConfigInvalid);

struct MappingConfig {
    double target_lo = -2.0;
    double target_hi = 2.0;
    double bound_lo = -20.0;
    double bound_hi = 20.0;
    double gamma = 1.0;
    int quant_levels = 0;  // 0 = continuous
    bool invert = false;
    bool directional = false;

    bool operator==(const MappingConfig&) const = default;

    double target_center() const { return 0.5 * (target_lo + target_hi); }

    void validate() const
    {
        if (!(std::isfinite(bound_lo) && std::isfinite(bound_hi) && std::isfinite(target_lo) &&
              std::isfinite(target_hi)))
            throw ConfigInvalid("non-finite range");
        if (!(bound_lo < target_lo && target_lo <= target_hi && target_hi < bound_hi))
            throw ConfigInvalid("require bound_lo < target_lo <= target_hi < bound_hi");
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigInvalid("gamma must be > 0");
        if (quant_levels < 0) throw ConfigInvalid("quant_levels must be >= 0");
    }
};

struct FeedbackVariable {
    double value = 0.0;
    bool directional = false;

    static constexpr FeedbackVariable neutral(bool directional)
    {
        return {directional ? 0.5 : 0.0, directional};
    }
    constexpr bool is_neutral() const { return value == (directional ? 0.5 : 0.0); }
    bool operator==(const FeedbackVariable&) const = default;
};

// Normalized compliance error in [0, 1] before shaping.
inline double compliance_error(double x, const MappingConfig& cfg)
{
    if (x > cfg.target_hi) return clamp01((x - cfg.target_hi) / (cfg.bound_hi - cfg.target_hi));
    if (x < cfg.target_lo) return clamp01((cfg.target_lo - x) / (cfg.target_lo - cfg.bound_lo));
    return 0.0;
}

inline double quantize(double v, int levels)
{
    if (levels <= 0) return v;
    const double q = static_cast<double>(levels);
    return std::round(v * q) / q;
}

inline FeedbackVariable map_feedback_variable(double x, const MappingConfig& cfg)
{
    cfg.validate();
    const double shaped = quantize(std::pow(compliance_error(x, cfg), cfg.gamma), cfg.quant_levels);
    double fv = shaped;
    if (cfg.directional) {
        const double d = x - cfg.target_center();
        const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        fv = 0.5 + 0.5 * sign * shaped;
    }
    if (cfg.invert) fv = 1.0 - fv;
    return {clamp01(fv), cfg.directional};
}

inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Sum-of-sigmoids directional map of a signed distance: 0.5 at d = 0, a
// plateau of width 2*d0 around it, saturating to 0 / 1 at the extremes.
inline double sigmoid_pair(double d, double slope, double dead_half_width)
{
    return 0.5 * (logistic(slope * (d - dead_half_width)) + logistic(slope * (d + dead_half_width)));
}

// Signed step-duration error relative to the beat interval, with a dead zone,
// normalized by the beat interval and clamped to [-1, 1].
inline double step_timing_error(double duration_ms, double beat_interval_ms, double dead_zone_ms)
{
    const double diff = duration_ms - beat_interval_ms;
    const double excess = std::max(0.0, std::abs(diff) - dead_zone_ms);
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    return std::clamp(sign * excess / beat_interval_ms, -1.0, 1.0);
}

inline int reach_scale_degree(double tilt, std::pair<double, double> axis_range, int n_degrees)
{
    const auto [lo, hi] = axis_range;
    if (!(lo < hi) || n_degrees < 2) throw ConfigInvalid("reach range must be increasing with n >= 2");
    const double t = std::clamp(tilt, lo, hi);
    const int idx = static_cast<int>(std::floor((t - lo) / (hi - lo) * n_degrees));
    return std::clamp(idx, 0, n_degrees - 1);
}

// Fires once when the input rises to the threshold; re-arms only after it
// falls back below threshold - hysteresis.
class HysteresisTrigger {
public:
    HysteresisTrigger(double threshold = 0.0, double hysteresis = 2.0)
        : threshold_(threshold), hysteresis_(hysteresis) {}

    bool update(double v)
    {
        if (armed_ && v >= threshold_) {
            armed_ = false;
            return true;
        }
        if (!armed_ && v <= threshold_ - hysteresis_) armed_ = true;
        return false;
    }

    void set(double threshold, double hysteresis)
    {
        threshold_ = threshold;
        hysteresis_ = hysteresis;
    }
    bool armed() const { return armed_; }

private:
    double threshold_;
    double hysteresis_;
    bool armed_ = true;
};

struct CueEvents {
    bool sit_cue = false;
    bool stand_cue = false;
};

class FlexionCueDetector {
public:
    FlexionCueDetector(double sit_threshold = 30.0, double stand_threshold = 30.0, double hysteresis = 2.0)
        : sit_(sit_threshold, hysteresis), stand_(stand_threshold, hysteresis) {}

    CueEvents update(double flexion_angle)
    {
        return {sit_.update(flexion_angle), stand_.update(flexion_angle)};
    }

    void configure(double sit_threshold, double stand_threshold, double hysteresis)
    {
        sit_.set(sit_threshold, hysteresis);
        stand_.set(stand_threshold, hysteresis);
    }

private:
    HysteresisTrigger sit_;
    HysteresisTrigger stand_;
};

}  // namespace mbf::mapping
