#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mbf/biquad.hpp"

namespace mbf::synth {

MBF_DEFINE_ERROR(InvalidFreq);

inline constexpr double kSampleRate = 48000.0;
inline constexpr int kBlockFrames = 480;

inline double db_to_gain(double db) { return std::pow(10.0, db / 20.0); }
inline double gain_to_db(double g) { return 20.0 * std::log10(g); }

// Static compressor curve: gain change in dB (<= 0) for a detected level.
inline double compressor_gain(double level_db, double threshold_db, double ratio)
{
    if (ratio <= 1.0 || level_db <= threshold_db) return 0.0;
    return -(level_db - threshold_db) * (1.0 - 1.0 / ratio);
}

// RBJ peaking equalizer.
inline Biquad design_peaking_eq(double freq, double gain_db, double q, double fs = kSampleRate)
{
    if (!(freq > 0.0 && freq < fs / 2.0)) throw InvalidFreq("peaking EQ frequency must be in (0, fs/2)");
    if (!(q > 0.0)) throw InvalidFreq("Q must be positive");
    const double a = std::pow(10.0, gain_db / 40.0);
    const double w0 = 2.0 * kPi * freq / fs;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double cw = std::cos(w0);
    const double a0 = 1.0 + alpha / a;
    Biquad b;
    b.b0 = (1.0 + alpha * a) / a0;
    b.b1 = -2.0 * cw / a0;
    b.b2 = (1.0 - alpha * a) / a0;
    b.a1 = -2.0 * cw / a0;
    b.a2 = (1.0 - alpha / a) / a0;
    return b;
}

inline double one_pole_coeff(double time_ms, double fs = kSampleRate)
{
    return time_ms <= 0.0 ? 1.0 : 1.0 - std::exp(-1000.0 / (time_ms * fs));
}

struct CompressorSettings {
    double threshold_db = -12.0;
    double ratio = 3.0;
    double attack_ms = 5.0;
    double release_ms = 80.0;
    bool operator==(const CompressorSettings&) const = default;
};

// Peak-detecting feed-forward compressor; attack/release smooth the gain
// reduction.
class Compressor {
public:
    explicit Compressor(const CompressorSettings& s = {}) { configure(s); }

    void configure(const CompressorSettings& s)
    {
        s_ = s;
        attack_ = one_pole_coeff(s.attack_ms);
        release_ = one_pole_coeff(s.release_ms);
    }

    double process(double x)
    {
        const double mag = std::abs(x);
        if (mag == 0.0 && reduction_db_ == 0.0) return x;
        const double level_db = mag > 1e-9 ? gain_to_db(mag) : -180.0;
        const double target = compressor_gain(level_db, s_.threshold_db, s_.ratio);
        const double coeff = target < reduction_db_ ? attack_ : release_;
        reduction_db_ += (target - reduction_db_) * coeff;
        if (reduction_db_ > -1e-6) reduction_db_ = 0.0;
        return reduction_db_ == 0.0 ? x : x * db_to_gain(reduction_db_);
    }

    double reduction_db() const { return reduction_db_; }

private:
    CompressorSettings s_;
    double attack_ = 1.0;
    double release_ = 1.0;
    double reduction_db_ = 0.0;
};

// Stereo-linked peak limiter with instant attack. Output never exceeds the
// ceiling (and is hard-clamped to [-1, 1] as a last resort).
class Limiter {
public:
    explicit Limiter(double ceiling = 0.98, double release_ms = 60.0)
        : ceiling_(ceiling), release_(one_pole_coeff(release_ms)) {}

    void process(double& l, double& r)
    {
        const double peak = std::max(std::abs(l), std::abs(r));
        if (peak * gain_ > ceiling_) gain_ = ceiling_ / peak;
        else if (gain_ < 1.0) gain_ = std::min(1.0, gain_ + (1.0 - gain_) * release_);
        if (gain_ != 1.0) {
            l *= gain_;
            r *= gain_;
        }
        l = std::clamp(l, -1.0, 1.0);
        r = std::clamp(r, -1.0, 1.0);
    }

    double gain() const { return gain_; }

private:
    double ceiling_;
    double release_;
    double gain_ = 1.0;
};

// Linear ramp that lands exactly on its target.
class Ramp {
public:
    explicit Ramp(double v = 0.0) : current_(v), target_(v) {}

    void set_target(double t, int samples)
    {
        if (t == target_ && remaining_ == 0) return;
        target_ = t;
        remaining_ = std::max(samples, 1);
        step_ = (t - current_) / remaining_;
    }

    double next()
    {
        if (remaining_ > 0) {
            current_ += step_;
            if (--remaining_ == 0) current_ = target_;
        }
        return current_;
    }

    double value() const { return current_; }
    double target() const { return target_; }
    bool idle_at(double v) const { return remaining_ == 0 && current_ == v; }

private:
    double current_;
    double target_;
    double step_ = 0.0;
    int remaining_ = 0;
};

class Noise {
public:
    explicit Noise(std::uint32_t seed = 0x9E3779B9u) : state_(seed ? seed : 1u) {}
    double next()
    {
        state_ ^= state_ << 13;
        state_ ^= state_ >> 17;
        state_ ^= state_ << 5;
        return static_cast<double>(state_) / 2147483648.0 - 1.0;
    }
    void reseed(std::uint32_t s) { state_ = s ? s : 1u; }

private:
    std::uint32_t state_;
};

// Constant-power pan, p in [-1, 1].
struct PanGains {
    double l;
    double r;
};

inline PanGains pan_gains(double p)
{
    const double a = (std::clamp(p, -1.0, 1.0) + 1.0) * kPi / 4.0;
    return {std::cos(a), std::sin(a)};
}

// State-variable filter (Chamberlin/TPT form) used by voices.
class Svf {
public:
    struct Out {
        double low, band, high;
    };

    void set(double cutoff, double q, double fs = kSampleRate)
    {
        g_ = std::tan(kPi * std::min(cutoff, 0.49 * fs) / fs);
        k_ = 1.0 / q;
        a1_ = 1.0 / (1.0 + g_ * (g_ + k_));
    }

    Out process(double x)
    {
        const double v3 = x - ic2_;
        const double v1 = a1_ * ic1_ + g_ * a1_ * v3;
        const double v2 = ic2_ + g_ * v1;
        ic1_ = 2.0 * v1 - ic1_;
        ic2_ = 2.0 * v2 - ic2_;
        return {v2, v1, x - k_ * v1 - v2};
    }

    void reset() { ic1_ = ic2_ = 0.0; }

private:
    double g_ = 0.1, k_ = 1.0, a1_ = 1.0;
    double ic1_ = 0.0, ic2_ = 0.0;
};

}  // namespace mbf::synth
