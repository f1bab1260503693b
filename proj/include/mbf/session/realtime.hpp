#pragma once

// Real-time runner. Threads:
//   scheduler  1 kHz deadline loop; every tenth tick runs the mapping tick and
//              applies queued control commands, every tick advances the
//              sequencer, every frame publishes a block snapshot
//   render     renders published snapshots, never allocates or locks
//   sink       audio consumer (WAV file or analyzer callback)
//   receiver   UDP sensor sockets (transport::SensorReceiver)
// Control requests from IO threads go through a command queue and are applied
// by the scheduler between ticks.

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <pthread.h>
#include <sched.h>
#include <semaphore>
#include <thread>

#include <json.hpp>

#include "mbf/session/engine.hpp"
#include "mbf/synth/wav.hpp"

namespace mbf::session {

MBF_DEFINE_ERROR(EngineStopped);

enum class CommandKind { set_param, set_mode, transport, standby, calibrate };

struct Command {
    std::uint64_t seq = 0;
    CommandKind kind = CommandKind::set_param;
    std::string path;
    nlohmann::json value;
};

struct CommandResult {
    std::uint64_t seq = 0;
    bool ok = false;
    std::string error;    // error code when !ok
    std::string message;
    nlohmann::json applied;
    std::string warning;
};

struct SchedulerStats {
    std::uint64_t frames = 0;
    std::uint64_t missed_ticks = 0;  // mapping ticks that started a full period late or later
    std::uint64_t late_ticks = 0;    // started more than 1 ms late
    double max_lateness_ms = 0.0;
    double mean_lateness_ms = 0.0;
    std::uint64_t render_overruns = 0;  // snapshot queue full
    std::uint64_t audio_overruns = 0;
};

struct LiveView {
    Telemetry telemetry;
    EngineCounters counters;
    SchedulerStats sched;
    CalibrationStatus calibration = CalibrationStatus::idle;
};

struct RealtimeOptions {
    bool bind_sensors = true;
    std::string sensor_host = "0.0.0.0";
    std::optional<std::filesystem::path> log_path;
    std::optional<std::filesystem::path> wav_path;
    // Runs on the sink thread. play_ms is when the first sample would leave
    // a device buffered one block deep, on the monotonic time base.
    std::function<void(const synth::AudioBlock&, std::int64_t index, TimeMs play_ms)> audio_sink;
    bool autoplay = true;
};

class RealtimeEngine {
public:
    RealtimeEngine(SessionState state, std::shared_ptr<const MusicLibrary> library, RealtimeOptions opt = {})
        : opt_(std::move(opt)), core_(std::move(state), std::move(library)), renderer_(core_.state().mixer),
          state_snapshot_(std::make_shared<const SessionState>(core_.state()))
    {
        if (opt_.log_path) {
            log_ = std::make_unique<LogWriter>(*opt_.log_path);
            core_.set_log_writer(log_.get());
        }
        if (opt_.wav_path) wav_ = std::make_unique<synth::WavWriter>(*opt_.wav_path);
        if (opt_.bind_sensors) {
            std::array<int, transport::kSlotCount> ports{};
            for (std::size_t s = 0; s < ports.size(); ++s) ports[s] = core_.state().sensors[s].port;
            receiver_ = std::make_unique<transport::SensorReceiver>(core_.inboxes(), ports, opt_.sensor_host);
        }
    }

    ~RealtimeEngine() { stop(); }
    RealtimeEngine(const RealtimeEngine&) = delete;
    RealtimeEngine& operator=(const RealtimeEngine&) = delete;

    void start()
    {
        if (running_.exchange(true)) return;
        stop_.store(false);
        sched_done_.store(false);
        render_done_.store(false);
        if (opt_.autoplay) core_.play();
        using clock = std::chrono::steady_clock;
        origin_ = clock::now() + std::chrono::milliseconds(20);
        origin_ms_ = std::chrono::duration<double, std::milli>(origin_.time_since_epoch()).count();
        sink_thread_ = std::thread([this] { sink_loop(); });
        render_thread_ = std::thread([this] { render_loop(); });
        sched_thread_ = std::thread([this] { scheduler_loop(); });
    }

    void stop()
    {
        if (!running_.exchange(false)) return;
        stop_.store(true);
        if (sched_thread_.joinable()) sched_thread_.join();
        if (render_thread_.joinable()) render_thread_.join();
        if (sink_thread_.joinable()) sink_thread_.join();
        if (receiver_) receiver_->stop();
        if (log_) log_->close();
        if (wav_) wav_->close();
        applied_cv_.notify_all();
    }

    bool running() const { return running_.load(); }
    TimeMs origin_ms() const { return origin_ms_; }
    int sensor_port(std::size_t slot) const { return receiver_ ? receiver_->port(slot) : 0; }
    const std::optional<std::filesystem::path>& log_path() const { return opt_.log_path; }

    // ---- control side (any thread) ----------------------------------------
    std::uint64_t submit(Command c)
    {
        if (!running_.load()) throw EngineStopped("engine is not running");
        std::lock_guard lk(submit_m_);
        c.seq = ++submitted_;
        if (!commands_.push(c)) throw EngineStopped("command queue full");
        return c.seq;
    }

    // Waits until the scheduler has applied command `seq`.
    std::optional<CommandResult> wait_applied(std::uint64_t seq, std::chrono::milliseconds timeout = std::chrono::milliseconds(2000))
    {
        std::unique_lock lk(applied_m_);
        const bool ok = applied_cv_.wait_for(lk, timeout, [&] { return applied_seq_ >= seq || !running_.load(); });
        if (!ok || applied_seq_ < seq) return std::nullopt;
        for (const auto& r : results_)
            if (r.seq == seq) return r;
        return std::nullopt;
    }

    // Waits until every command submitted so far has been applied.
    bool sync(std::chrono::milliseconds timeout = std::chrono::milliseconds(2000))
    {
        std::uint64_t target;
        {
            std::lock_guard lk(submit_m_);
            target = submitted_;
        }
        std::unique_lock lk(applied_m_);
        return applied_cv_.wait_for(lk, timeout, [&] { return applied_seq_ >= target; });
    }

    std::shared_ptr<const SessionState> state_snapshot() const
    {
        std::lock_guard lk(state_m_);
        return state_snapshot_;
    }

    LiveView live() const
    {
        std::lock_guard lk(live_m_);
        return live_;
    }

    std::string calibration_message() const
    {
        std::lock_guard lk(state_m_);
        return calib_message_;
    }

private:
    struct TimedBlock {
        synth::AudioBlock block;
        std::int64_t index = 0;
    };

    void scheduler_loop()
    {
        using clock = std::chrono::steady_clock;
        try_realtime_priority();
        auto last = origin_;
        double lateness_sum = 0.0;
        std::uint64_t mixer_version = core_.mixer_version();
        auto prev_calib = core_.calibration_status();
        for (std::int64_t n = 0; !stop_.load(std::memory_order_relaxed); ++n) {
            const auto deadline = origin_ + std::chrono::milliseconds(n);
            std::this_thread::sleep_until(deadline);
            const auto now_tp = clock::now();
            const TimeMs now = std::chrono::duration<double, std::milli>(now_tp.time_since_epoch()).count();
            const int phase = static_cast<int>(n % kSeqTicksPerFrame);
            if (phase == 0) {
                apply_commands();
                const double late = std::chrono::duration<double, std::milli>(now_tp - deadline).count();
                lateness_sum += late;
                ++sched_.frames;
                sched_.max_lateness_ms = std::max(sched_.max_lateness_ms, late);
                sched_.mean_lateness_ms = lateness_sum / static_cast<double>(sched_.frames);
                if (late >= 1.0) ++sched_.late_ticks;
                if (late >= kFrameMs) ++sched_.missed_ticks;
                core_.tick_mbf(now);
                if (core_.mixer_version() != mixer_version) {
                    mixer_version = core_.mixer_version();
                    mixer_box_.write(core_.state().mixer);
                }
                if (core_.calibration_status() != prev_calib) {
                    prev_calib = core_.calibration_status();
                    publish_state();
                }
                if (live_m_.try_lock()) {
                    live_.telemetry = core_.telemetry();
                    live_.counters = core_.counters();
                    live_.sched = sched_;
                    live_.sched.audio_overruns = audio_overruns_.load(std::memory_order_relaxed);
                    live_.calibration = core_.calibration_status();
                    live_m_.unlock();
                }
            }
            const double dt = std::chrono::duration<double, std::milli>(now_tp - last).count();
            last = now_tp;
            core_.tick_sequencer(dt, phase * kFramesPerSeqTick);
            if (phase == kSeqTicksPerFrame - 1) {
                if (!snapshots_.push(core_.publish_block())) ++sched_.render_overruns;
                render_sem_.release();
            }
        }
        sched_done_.store(true);
        render_sem_.release();
    }

    void apply_commands()
    {
        bool changed = false;
        while (auto c = commands_.pop()) {
            CommandResult r;
            r.seq = c->seq;
            try {
                apply(*c, r);
                r.ok = true;
            } catch (const Error& e) {
                r.ok = false;
                r.error = e.code();
                r.message = e.what();
            } catch (const std::exception& e) {
                r.ok = false;
                r.error = "InternalError";
                r.message = e.what();
            }
            changed = true;
            {
                std::lock_guard lk(applied_m_);
                results_.push_back(std::move(r));
                if (results_.size() > 256) results_.pop_front();
                applied_seq_ = c->seq;
            }
        }
        if (changed) {
            publish_state();
            applied_cv_.notify_all();
        }
    }

    void apply(const Command& c, CommandResult& r)
    {
        switch (c.kind) {
        case CommandKind::set_param: {
            SessionState next = core_.state();
            auto out = set_field(next, c.path, c.value);
            core_.apply_state(next);
            r.applied = get_field(core_.state(), out.path);
            r.warning = out.warning;
            return;
        }
        case CommandKind::set_mode: {
            if (!c.value.is_string()) throw TypeMismatch("mode must be a string");
            const auto m = parse_mode(c.value.get<std::string>());
            if (!m) throw TypeMismatch("unknown mode '" + c.value.get<std::string>() + "'");
            core_.set_mode(*m);
            r.applied = std::string(to_string(*m));
            return;
        }
        case CommandKind::transport: {
            const auto v = c.value.is_string() ? c.value.get<std::string>() : std::string();
            if (v == "play") core_.play();
            else if (v == "pause") core_.pause();
            else if (v == "rewind") core_.rewind();
            else if (v == "stop") core_.stop();
            else throw TypeMismatch("transport expects play, pause, rewind or stop");
            r.applied = v;
            return;
        }
        case CommandKind::standby: {
            if (!c.value.is_boolean()) throw TypeMismatch("standby expects a boolean");
            core_.set_standby(c.value.get<bool>());
            r.applied = c.value;
            return;
        }
        case CommandKind::calibrate:
            core_.begin_calibration();
            r.applied = "running";
            return;
        }
    }

    void publish_state()
    {
        auto s = std::make_shared<const SessionState>(core_.state());
        std::lock_guard lk(state_m_);
        state_snapshot_ = std::move(s);
        calib_message_ = core_.calibration_message();
    }

    void render_loop()
    {
        try_realtime_priority();
        TimedBlock out;
        for (;;) {
            render_sem_.acquire();
            if (auto m = mixer_box_.read(); m.fresh) renderer_.configure(m.value);
            bool any = false;
            while (auto snap = snapshots_.pop()) {
                any = true;
                renderer_.render_block(*snap, out.block);
                out.index = snap->index;
                if (!audio_.push(out)) ++audio_overruns_;
            }
            if (any) sink_sem_.release();
            if (sched_done_.load() && snapshots_.empty()) break;
        }
        render_done_.store(true);
        sink_sem_.release();
    }

    void sink_loop()
    {
        for (;;) {
            sink_sem_.acquire();
            while (auto b = audio_.pop()) {
                const TimeMs play = origin_ms_ + static_cast<double>(b->index) * kFrameMs + 2.0 * kFrameMs;
                if (opt_.audio_sink) opt_.audio_sink(b->block, b->index, play);
                if (wav_) wav_->write(b->block);
            }
            if (render_done_.load() && audio_.empty()) break;
        }
    }

    // Best effort; without the privilege the threads stay at normal priority.
    static void try_realtime_priority()
    {
        sched_param p{};
        p.sched_priority = sched_get_priority_min(SCHED_FIFO) + 10;
        pthread_setschedparam(pthread_self(), SCHED_FIFO, &p);
    }

    RealtimeOptions opt_;
    EngineCore core_;
    synth::Renderer renderer_;
    std::unique_ptr<LogWriter> log_;
    std::unique_ptr<synth::WavWriter> wav_;
    std::unique_ptr<transport::SensorReceiver> receiver_;

    std::atomic<bool> running_{false};
    std::atomic<bool> stop_{false};
    std::atomic<bool> sched_done_{false};
    std::atomic<bool> render_done_{false};
    std::chrono::steady_clock::time_point origin_{};
    TimeMs origin_ms_ = 0.0;
    std::thread sched_thread_, render_thread_, sink_thread_;

    SpscQueue<synth::BlockSnapshot, 64> snapshots_;
    SpscQueue<TimedBlock, 128> audio_;
    std::counting_semaphore<1 << 20> render_sem_{0};
    std::counting_semaphore<1 << 20> sink_sem_{0};
    LatestMailbox<synth::MixerSettings> mixer_box_;
    std::atomic<std::uint64_t> audio_overruns_{0};
    SchedulerStats sched_{};

    std::mutex submit_m_;
    std::uint64_t submitted_ = 0;
    SpscQueue<Command, 256> commands_;

    mutable std::mutex applied_m_;
    std::condition_variable applied_cv_;
    std::uint64_t applied_seq_ = 0;
    std::deque<CommandResult> results_;

    mutable std::mutex state_m_;
    std::shared_ptr<const SessionState> state_snapshot_;
    std::string calib_message_;

    mutable std::mutex live_m_;
    LiveView live_{};
};

}  // namespace mbf::session
