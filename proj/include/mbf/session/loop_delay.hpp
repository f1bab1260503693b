#pragma once

// End-to-end biofeedback loop delay: the simulator streams step changes of
// trunk tilt over UDP loopback into the real-time engine, and an analyzer on
// the audio sink timestamps the first audible output after each onset.

#include <cmath>
#include <mutex>
#include <numeric>
#include <vector>

#include "mbf/session/realtime.hpp"
#include "mbf/sim/stream.hpp"

namespace mbf::session {

MBF_DEFINE_ERROR(EmptyTrial);

// Sensor period + mapping period + block + smoothing ramp.
inline constexpr double kLoopBudgetMs = sim::kSamplePeriodMs + kFrameMs + kFrameMs + kFrameMs;

struct LoopDelayOptions {
    double angle_deg = 20.0;
    double rise_s = 0.08;
    double hold_s = 0.4;
    double period_s = 1.013;  // not a multiple of the tick period, so onset phases vary
    double start_s = 1.0;
    double threshold = 1e-3;  // -60 dBFS
    double quiet_ms = 100.0;  // silence required before an onset counts
};

struct LoopDelayResult {
    int trials = 0;
    int detected = 0;
    double mean_ms = 0.0;
    double std_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;
    std::vector<double> delays_ms;
    std::uint64_t missed_ticks = 0;
    double wall_s = 0.0;
};

// First-sample-above-threshold detector over a block stream.
class OnsetDetector {
public:
    OnsetDetector(double threshold, double quiet_ms)
        : threshold_(threshold), quiet_samples_(static_cast<std::int64_t>(quiet_ms * synth::kSampleRate / 1000.0)) {}

    void process(const synth::AudioBlock& b, TimeMs play_ms)
    {
        for (int i = 0; i < synth::kBlockFrames; ++i) {
            const auto k = static_cast<std::size_t>(i);
            const double a = std::max(std::abs(b.left[k]), std::abs(b.right[k]));
            if (a > threshold_) {
                if (quiet_ >= quiet_samples_) {
                    std::lock_guard lk(m_);
                    onsets_.push_back(play_ms + i * 1000.0 / synth::kSampleRate);
                }
                quiet_ = 0;
            } else {
                ++quiet_;
            }
        }
    }

    std::vector<TimeMs> onsets() const
    {
        std::lock_guard lk(m_);
        return onsets_;
    }

private:
    double threshold_;
    std::int64_t quiet_samples_;
    std::int64_t quiet_ = std::numeric_limits<std::int64_t>::max() / 2;
    mutable std::mutex m_;
    std::vector<TimeMs> onsets_;
};

inline LoopDelayResult measure_loop_delay(int n_trials, std::shared_ptr<const MusicLibrary> library,
                                          const LoopDelayOptions& opt = {})
{
    if (n_trials <= 0) throw EmptyTrial("loop delay needs at least one trial");
    const TimeMs t_start = monotonic_now_ms();

    SessionState st;
    st.mode = Mode::static_balance;
    st.settings(Mode::static_balance).strategy = synth::Strategy::disturbance_tone;
    st.settings(Mode::static_balance).secondary_enabled = false;
    for (auto& s : st.sensors) s.port = 0;  // ephemeral

    sim::MotionProfile p;
    p.kind = sim::ProfileKind::reach;
    p.reach_axis = sim::Axis::ap;
    p.reach_angle = opt.angle_deg;
    p.reach_rise = opt.rise_s;
    p.reach_hold = opt.hold_s;
    p.reach_period = opt.period_s;
    p.reach_start = opt.start_s;
    p.reach_count = n_trials;
    p.duration = opt.start_s + n_trials * opt.period_s + 0.5;
    const auto gen = sim::generate_profile(p);

    OnsetDetector detector(opt.threshold, opt.quiet_ms);
    RealtimeOptions ro;
    ro.sensor_host = "127.0.0.1";
    ro.autoplay = false;  // music paused: the only output is feedback
    ro.audio_sink = [&](const synth::AudioBlock& b, std::int64_t, TimeMs play) { detector.process(b, play); };
    RealtimeEngine engine(st, std::move(library), ro);
    engine.start();

    sim::StreamOptions so;
    for (std::size_t s = 0; s < sim::kSlots; ++s) so.ports[s] = engine.sensor_port(s);
    const auto stats = sim::stream_profile(gen.frames, so);
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    const auto live = engine.live();
    engine.stop();

    const auto detections = detector.onsets();
    LoopDelayResult r;
    r.trials = static_cast<int>(gen.truth.onsets.size());
    r.missed_ticks = live.sched.missed_ticks;
    for (const TimeMs onset : gen.truth.onsets) {
        const TimeMs w = stats.origin_ms + onset;
        for (const TimeMs d : detections)
            if (d >= w && d < w + opt.period_s * 1000.0) {
                r.delays_ms.push_back(d - w);
                break;
            }
    }
    r.detected = static_cast<int>(r.delays_ms.size());
    if (!r.delays_ms.empty()) {
        const double n = static_cast<double>(r.delays_ms.size());
        r.mean_ms = std::accumulate(r.delays_ms.begin(), r.delays_ms.end(), 0.0) / n;
        double ss = 0.0;
        for (double d : r.delays_ms) ss += (d - r.mean_ms) * (d - r.mean_ms);
        r.std_ms = r.delays_ms.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        r.min_ms = *std::min_element(r.delays_ms.begin(), r.delays_ms.end());
        r.max_ms = *std::max_element(r.delays_ms.begin(), r.delays_ms.end());
    }
    r.wall_s = (monotonic_now_ms() - t_start) / 1000.0;
    return r;
}

}  // namespace mbf::session
