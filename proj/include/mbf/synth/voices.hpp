#pragma once

// Sound sources: synthesized percussion, a two-oscillator subtractive voice,
// and the feedback one-shots (bell, band sweep) and tones (disturbance, siren).
// A voice that has finished produces exact zeros.

#include <array>
#include <cmath>

#include "mbf/sequencer/score.hpp"
#include "mbf/synth/dsp.hpp"

namespace mbf::synth {

inline double midi_to_hz(double pitch) { return 440.0 * std::pow(2.0, (pitch - 69.0) / 12.0); }

inline constexpr double kSilenceLevel = 1e-4;  // -80 dB: envelope end

class PercussionVoice {
public:
    enum class Kind { kick, snare, hat, perc };

    explicit PercussionVoice(Kind kind = Kind::kick, std::uint32_t seed = 1) : kind_(kind), noise_(seed)
    {
        hp_.set(7000.0, 0.7);
    }

    // env_scale stretches decay times (tempo adaptation).
    void trigger(int velocity, int pitch, double env_scale)
    {
        active_ = true;
        t_ = 0;
        phase_ = 0.0;
        level_ = velocity / 127.0;
        amp_ = 1.0;
        body_ = 1.0;
        hp_.reset();
        const double s = std::clamp(env_scale, 0.25, 4.0);
        switch (kind_) {
        case Kind::kick:
            amp_decay_ = decay_coeff(0.16 * s);
            body_decay_ = decay_coeff(0.004);
            break;
        case Kind::snare:
            amp_decay_ = decay_coeff(0.07 * s);
            body_decay_ = decay_coeff(0.05 * s);
            break;
        case Kind::hat:
            amp_decay_ = decay_coeff(0.03 * s);
            break;
        case Kind::perc:
            amp_decay_ = decay_coeff(0.06 * s);
            tone_hz_ = 800.0 * std::pow(2.0, (pitch - 60) / 12.0);
            break;
        }
    }

    double next()
    {
        if (!active_) return 0.0;
        const double t = t_ / kSampleRate;
        double y = 0.0;
        switch (kind_) {
        case Kind::kick: {
            const double f = 50.0 + 110.0 * std::exp(-t / 0.03);
            phase_ += f / kSampleRate;
            y = std::sin(2.0 * kPi * phase_) * amp_ + 0.3 * noise_.next() * body_;
            body_ *= body_decay_;
            break;
        }
        case Kind::snare: {
            phase_ += 185.0 / kSampleRate;
            y = 0.6 * noise_.next() * amp_ + 0.5 * std::sin(2.0 * kPi * phase_) * body_;
            body_ *= body_decay_;
            break;
        }
        case Kind::hat: y = hp_.process(noise_.next()).high * amp_; break;
        case Kind::perc:
            phase_ += tone_hz_ / kSampleRate;
            y = std::sin(2.0 * kPi * phase_) * amp_;
            break;
        }
        amp_ *= amp_decay_;
        ++t_;
        if (amp_ < kSilenceLevel && (kind_ != Kind::snare || body_ < kSilenceLevel)) active_ = false;
        return y * level_;
    }

    bool active() const { return active_; }

private:
    static double decay_coeff(double tau_s) { return std::exp(-1.0 / (tau_s * kSampleRate)); }

    Kind kind_;
    Noise noise_;
    Svf hp_;
    bool active_ = false;
    long t_ = 0;
    double phase_ = 0.0;
    double level_ = 0.0;
    double amp_ = 0.0, amp_decay_ = 0.0;
    double body_ = 0.0, body_decay_ = 0.0;
    double tone_hz_ = 800.0;
};

struct VoiceShape {
    double attack_ms = 5.0;
    double decay_ms = 150.0;
    double sustain = 0.6;
    double release_ms = 120.0;
    double cutoff_hz = 2500.0;
    double resonance = 0.9;
    double detune_cents = 7.0;  // second oscillator
    double level = 0.22;
};

inline VoiceShape default_voice_shape(seq::Track t)
{
    switch (t) {
    case seq::Track::bass: return {3.0, 200.0, 0.7, 80.0, 700.0, 1.0, 5.0, 0.35};
    case seq::Track::chord: return {8.0, 250.0, 0.5, 150.0, 2000.0, 0.8, 7.0, 0.12};
    case seq::Track::melody: return {5.0, 180.0, 0.6, 120.0, 3200.0, 0.9, 7.0, 0.22};
    case seq::Track::pad: return {200.0, 400.0, 0.8, 400.0, 1400.0, 0.7, 12.0, 0.08};
    default: return {};
    }
}

// Saw + square (polyBLEP) through a resonant lowpass, linear attack and
// exponential decay/release.
class PitchedVoice {
public:
    void configure(const VoiceShape& shape) { shape_ = shape; }

    void note_on(int pitch, int velocity, double env_scale)
    {
        pitch_ = pitch;
        velocity_ = velocity / 127.0;
        stage_ = Stage::attack;
        env_ = 0.0;
        phase1_ = 0.0;
        phase2_ = 0.25;
        filter_.reset();
        filter_.set(shape_.cutoff_hz * (0.6 + 0.4 * velocity_), shape_.resonance);
        const double s = std::clamp(env_scale, 0.25, 4.0);
        attack_step_ = 1.0 / std::max(1.0, shape_.attack_ms * 1e-3 * kSampleRate);
        decay_ = std::exp(-1.0 / (shape_.decay_ms * s * 1e-3 * kSampleRate));
        release_ = std::exp(-1.0 / (shape_.release_ms * s * 1e-3 * kSampleRate));
        offset_cache_ = NAN;
    }

    void note_off() { if (stage_ != Stage::idle) stage_ = Stage::release; }
    void retune(int pitch) { pitch_ = pitch; offset_cache_ = NAN; }

    // pitch_offset in semitones (transpose + detune), applied live.
    double next(double pitch_offset)
    {
        if (stage_ == Stage::idle) return 0.0;
        if (!(pitch_offset == offset_cache_)) {
            offset_cache_ = pitch_offset;
            const double f = midi_to_hz(pitch_ + pitch_offset);
            inc1_ = f / kSampleRate;
            inc2_ = f * std::pow(2.0, shape_.detune_cents / 1200.0) / kSampleRate;
        }
        switch (stage_) {
        case Stage::attack:
            env_ += attack_step_;
            if (env_ >= 1.0) {
                env_ = 1.0;
                stage_ = Stage::decay;
            }
            break;
        case Stage::decay: env_ = shape_.sustain + (env_ - shape_.sustain) * decay_; break;
        case Stage::release:
            env_ *= release_;
            if (env_ < kSilenceLevel) {
                stage_ = Stage::idle;
                return 0.0;
            }
            break;
        case Stage::idle: break;
        }
        const double saw = 2.0 * phase1_ - 1.0 - poly_blep(phase1_, inc1_);
        double sq = phase2_ < 0.5 ? 1.0 : -1.0;
        sq += poly_blep(phase2_, inc2_);
        sq -= poly_blep(std::fmod(phase2_ + 0.5, 1.0), inc2_);
        phase1_ += inc1_;
        if (phase1_ >= 1.0) phase1_ -= 1.0;
        phase2_ += inc2_;
        if (phase2_ >= 1.0) phase2_ -= 1.0;
        const double y = filter_.process(0.5 * saw + 0.5 * sq).low;
        return y * env_ * velocity_ * shape_.level;
    }

    bool active() const { return stage_ != Stage::idle; }
    bool held() const { return stage_ == Stage::attack || stage_ == Stage::decay; }
    int pitch() const { return pitch_; }

private:
    enum class Stage { idle, attack, decay, release };

    static double poly_blep(double t, double dt)
    {
        if (t < dt) {
            t /= dt;
            return t + t - t * t - 1.0;
        }
        if (t > 1.0 - dt) {
            t = (t - 1.0) / dt;
            return t * t + t + t + 1.0;
        }
        return 0.0;
    }

    VoiceShape shape_;
    Svf filter_;
    Stage stage_ = Stage::idle;
    int pitch_ = 60;
    double velocity_ = 0.0;
    double env_ = 0.0;
    double attack_step_ = 1.0, decay_ = 0.0, release_ = 0.0;
    double phase1_ = 0.0, phase2_ = 0.0;
    double inc1_ = 0.0, inc2_ = 0.0;
    double offset_cache_ = NAN;
};

// Inharmonic struck-bell partials.
class BellOneShot {
public:
    void trigger(double f0 = 880.0, double level = 0.3)
    {
        for (std::size_t i = 0; i < kPartials; ++i) {
            phase_[i] = 0.0;
            inc_[i] = f0 * kRatio[i] / kSampleRate;
            amp_[i] = level * kAmp[i];
            decay_[i] = std::exp(-1.0 / (kTau[i] * kSampleRate));
        }
        active_ = true;
    }

    double next()
    {
        if (!active_) return 0.0;
        double y = 0.0;
        bool any = false;
        for (std::size_t i = 0; i < kPartials; ++i) {
            y += amp_[i] * std::sin(2.0 * kPi * phase_[i]);
            phase_[i] += inc_[i];
            if (phase_[i] >= 1.0) phase_[i] -= 1.0;
            amp_[i] *= decay_[i];
            any = any || amp_[i] > kSilenceLevel;
        }
        active_ = any;
        return y;
    }

    bool active() const { return active_; }

private:
    static constexpr std::size_t kPartials = 4;
    static constexpr std::array<double, kPartials> kRatio{1.0, 2.76, 5.40, 8.93};
    static constexpr std::array<double, kPartials> kAmp{1.0, 0.6, 0.4, 0.25};
    static constexpr std::array<double, kPartials> kTau{1.2, 0.8, 0.5, 0.3};
    std::array<double, kPartials> phase_{}, inc_{}, amp_{}, decay_{};
    bool active_ = false;
};

// Band-pass filtered noise whose centre sweeps upward ("wah"-like cue).
class SweepOneShot {
public:
    void trigger(double level = 0.3, double duration_s = 0.4)
    {
        n_ = 0;
        len_ = static_cast<long>(duration_s * kSampleRate);
        level_ = level;
        noise_.reseed(0x5EEDu);
        bp_.reset();
        active_ = true;
    }

    double next()
    {
        if (!active_) return 0.0;
        const double x = static_cast<double>(n_) / static_cast<double>(len_);
        if ((n_ & 31) == 0) bp_.set(300.0 * std::pow(10.0, x), 4.0);
        const double env = std::sin(kPi * x);
        const double y = bp_.process(noise_.next()).band * env * level_ * 2.0;
        if (++n_ >= len_) active_ = false;
        return y;
    }

    bool active() const { return active_; }

private:
    Svf bp_;
    Noise noise_{0x5EEDu};
    long n_ = 0, len_ = 1;
    double level_ = 0.0;
    bool active_ = false;
};

class SineOsc {
public:
    double next(double freq)
    {
        const double y = std::sin(2.0 * kPi * phase_);
        phase_ += freq / kSampleRate;
        if (phase_ >= 1.0) phase_ -= 1.0;
        return y;
    }
    void reset() { phase_ = 0.0; }

private:
    double phase_ = 0.0;
};

}  // namespace mbf::synth
