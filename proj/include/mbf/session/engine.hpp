#pragma once

// The engine core: one 100 Hz mapping tick and ten 1 kHz sequencer ticks make
// one 10 ms frame, which becomes one audio block. The same core is driven by
// the offline runner (simulated time) and the real-time scheduler.

#include <array>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mbf/mapping/feedback.hpp"
#include "mbf/mapping/geometry.hpp"
#include "mbf/motion/pipeline.hpp"
#include "mbf/sequencer/sequencer.hpp"
#include "mbf/session/log.hpp"
#include "mbf/session/state.hpp"
#include "mbf/sim/profile.hpp"
#include "mbf/synth/renderer.hpp"
#include "mbf/transport/udp.hpp"

#ifndef MBF_DATA_DIR
#define MBF_DATA_DIR "data"
#endif

namespace mbf::session {

MBF_DEFINE_ERROR(MissingAsset);

inline constexpr TimeMs kFrameMs = 10.0;
inline constexpr int kSeqTicksPerFrame = 10;
inline constexpr int kFramesPerSeqTick = synth::kBlockFrames / kSeqTicksPerFrame;  // 48 samples per ms

inline std::filesystem::path default_data_dir()
{
    if (const char* env = std::getenv("MBF_DATA_DIR"); env && *env) return env;
    return MBF_DATA_DIR;
}

// Songs and styles loaded once at startup.
struct MusicLibrary {
    std::map<std::string, seq::SongScore> songs;
    std::map<std::string, seq::StylePattern> styles;

    static MusicLibrary load(const std::filesystem::path& dir)
    {
        MusicLibrary lib;
        const auto songs = dir / "songs";
        if (std::filesystem::is_directory(songs))
            for (const auto& e : std::filesystem::directory_iterator(songs))
                if (e.path().extension() == ".song") lib.songs.emplace(e.path().stem().string(), seq::load_song_file(e.path()));
        lib.styles = seq::scan_style_directory(dir / "styles");
        return lib;
    }

    const seq::SongScore& song(const std::string& name) const
    {
        auto it = songs.find(name);
        if (it == songs.end()) throw MissingAsset("no song named '" + name + "'");
        return it->second;
    }

    const seq::StylePattern& style(const std::string& name) const
    {
        auto it = styles.find(name);
        if (it == styles.end()) throw MissingAsset("no style named '" + name + "'");
        return it->second;
    }

    seq::Timeline timeline(const std::string& song_name, const std::string& style_name) const
    {
        return seq::Timeline(song(song_name), style(style_name));
    }
};

// Per-tick view for snapshots. Trivially copyable.
struct Telemetry {
    TimeMs t = 0.0;
    Mode mode = Mode::static_balance;
    bool standby = false;
    bool playing = false;
    std::array<bool, transport::kSlotCount> online{};
    double tilt_ml = 0.0, tilt_ap = 0.0;
    Point2 pos{};
    int zone = 0;
    double jerk_sq = 0.0;
    double flexion = 0.0;
    double fv = 0.0, fv2 = 0.0;
    Point2 target{};
    int rep_count = 0;
    double progress = 0.0;
    double tempo = 120.0;
    double beat = 0.0;
};

struct EngineCounters {
    std::uint64_t mbf_ticks = 0;
    std::uint64_t seq_ticks = 0;
    std::uint64_t blocks = 0;
    std::uint64_t stale_samples = 0;    // tick reused the previous sample of an online sensor
    std::uint64_t offline_ticks = 0;    // a required sensor was offline
    std::uint64_t freeze_events = 0;    // online -> offline transitions of a required sensor
    std::uint64_t log_rows = 0;
    std::uint64_t dropped_log_rows = 0;
};

enum class CalibrationStatus { idle, running, done, failed };

class EngineCore {
public:
    EngineCore(SessionState state, std::shared_ptr<const MusicLibrary> library)
        : state_(std::move(state)), library_(std::move(library))
    {
        validate_state(state_);
        rebuild_pipeline();
        load_music();
        for (auto& c : calib_) c.reserve(kCalibrationTicks);
    }

    std::span<transport::SensorInbox> inboxes() { return inboxes_; }

    void set_log_writer(LogWriter* w) { log_writer_ = w; }
    void set_row_sink(std::vector<LogRow>* rows) { rows_ = rows; }

    const SessionState& state() const { return state_; }
    const Telemetry& telemetry() const { return tele_; }
    const motion::MovementState& movement() const { return movement_; }
    const EngineCounters& counters() const { return counters_; }
    const seq::Sequencer& sequencer() const { return seq_; }
    std::span<const synth::StrategyControl> controls() const { return {controls_.data(), control_count_}; }

    // Replaces the state and reconfigures whatever changed. Throws
    // InvalidState and keeps the old state when `next` is invalid.
    void apply_state(const SessionState& next)
    {
        validate_state(next);
        SessionState prev = std::move(state_);
        state_ = next;
        state_.rep_count = prev.rep_count;
        state_.progress = prev.progress;
        if (prev.filters != state_.filters || prev.gait.detector != state_.gait.detector) rebuild_pipeline();
        if (prev.song != state_.song || prev.style != state_.style) {
            try {
                load_music();
            } catch (...) {
                state_ = std::move(prev);
                throw;
            }
        }
        if (prev.tempo != state_.tempo) seq_.set_tempo(state_.tempo);
        if (prev.mode != state_.mode) reset_mode_state();
        rep_trigger_.set(state_.reach.rep_threshold, state_.reach.rep_hysteresis);
        cues_.configure(state_.sts.sit_threshold, state_.sts.stand_threshold, state_.sts.hysteresis);
        if (prev.mixer != state_.mixer) ++mixer_version_;
    }

    // Bumped whenever the mixer settings change; render paths poll it.
    std::uint64_t mixer_version() const { return mixer_version_; }

    void set_mode(Mode m)
    {
        if (m == state_.mode) return;
        state_.mode = m;
        reset_mode_state();
    }
    void set_standby(bool on) { state_.standby = on; }
    void play() { seq_.play(); }
    void pause() { seq_.pause(); }
    void rewind()
    {
        seq_.rewind();
        state_.progress = 0.0;
    }
    void stop()
    {
        seq_.pause();
        rewind();
    }
    void reset_reps()
    {
        state_.rep_count = 0;
        rep_trigger_ = mapping::HysteresisTrigger(state_.reach.rep_threshold, state_.reach.rep_hysteresis);
    }

    // Bias calibration over the next 100 ticks of fresh samples.
    void begin_calibration()
    {
        for (auto& c : calib_) c.clear();
        calib_status_ = CalibrationStatus::running;
        calib_message_.clear();
    }
    CalibrationStatus calibration_status() const { return calib_status_; }
    const std::string& calibration_message() const { return calib_message_; }

    // ---- 100 Hz mapping tick ------------------------------------------------
    void tick_mbf(TimeMs now)
    {
        ++counters_.mbf_ticks;
        std::array<bool, transport::kSlotCount> fresh{};
        for (std::size_t s = 0; s < inboxes_.size(); ++s) {
            const auto r = inboxes_[s].mailbox.read();
            fresh[s] = r.fresh;
            if (r.fresh) {
                latest_[s] = r.value;
                ever_[s] = true;
            }
            slots_[s].last_rx = inboxes_[s].last_rx.load(std::memory_order_acquire);
            transport::poll_sensor_status(slots_[s], now, state_.offline_timeout_ms);
            if (slots_[s].online && !fresh[s]) ++counters_.stale_samples;
        }
        if (calib_status_ == CalibrationStatus::running) collect_calibration(fresh);

        // Motion pipeline on the newest sample of each assigned sensor.
        motion::MovementState m;
        const int trunk = slot_for(transport::BodyLocation::trunk);
        if (trunk >= 0) {
            const auto s = corrected(trunk);
            const auto tilt = tilt_.update(s);
            m.tilt_ml = tilt.ml;
            m.tilt_ap = tilt.ap;
            m.pos2d = {tilt.ml, tilt.ap};
            m.flexion_angle = tilt.ap;
            m.jerk_sq = jerk_.update(s.acc);
        }
        std::array<std::optional<motion::StepEvent>, 2> steps{};
        for (int f = 0; f < 2; ++f) {
            const int slot = slot_for(f == 0 ? transport::BodyLocation::left_leg : transport::BodyLocation::right_leg);
            if (slot < 0) continue;
            auto s = corrected(slot);
            if (!fresh[static_cast<std::size_t>(slot)] && !slots_[static_cast<std::size_t>(slot)].online) continue;
            steps[static_cast<std::size_t>(f)] = step_[static_cast<std::size_t>(f)].update(s);
        }
        for (const auto& e : steps)
            if (e) m.step_event = e;

        // Required sensors for the current mode.
        bool offline = false;
        if (is_gait(state_.mode)) {
            for (auto loc : {transport::BodyLocation::left_leg, transport::BodyLocation::right_leg}) {
                const int s = slot_for(loc);
                offline = offline || s < 0 || !slots_[static_cast<std::size_t>(s)].online;
            }
        } else {
            offline = trunk < 0 || !slots_[static_cast<std::size_t>(trunk)].online;
        }
        if (offline) {
            ++counters_.offline_ticks;
            if (!was_offline_ && any_required_seen()) ++counters_.freeze_events;
        }
        was_offline_ = offline;

        LogRow row;
        row.t = now;
        row.mode = state_.mode;
        row.standby = state_.standby;
        row.sensor_offline = offline;
        for (std::size_t s = 0; s < latest_.size(); ++s) row.raw[s] = {latest_[s].acc, latest_[s].gyro};
        row.tilt_ml = m.tilt_ml;
        row.tilt_ap = m.tilt_ap;
        row.pos_ml = m.pos2d.ml;
        row.pos_ap = m.pos2d.ap;
        row.jerk_sq = m.jerk_sq;
        row.flexion = m.flexion_angle;
        row.zone = mapping::allocate_zone(m.pos2d, state_.zones);
        row.tempo = seq_.tempo();
        row.beat = seq_.beat_phase();

        compute_controls(now, m, steps, row);
        if (offline || state_.standby) neutralize_controls();
        row.fv = control_count_ > 0 ? controls_[0].fv : 0.0;
        row.fv2 = control_count_ > 1 ? controls_[1].fv : row.fv;
        row.rep_count = state_.rep_count;

        movement_ = m;
        state_.progress = seq_.progress();
        update_telemetry(row);
        if (log_writer_ && !log_writer_->push(row)) ++counters_.dropped_log_rows;
        if (rows_) rows_->push_back(row);
        ++counters_.log_rows;
    }

    // ---- 1 kHz sequencer tick ------------------------------------------------
    // `offset` is the frame within the pending block where due events start.
    void tick_sequencer(double dt_ms, int offset)
    {
        ++counters_.seq_ticks;
        offset = std::clamp(offset, 0, synth::kBlockFrames - 1);
        seq_.tick(dt_ms, [&](const seq::MusicEvent& e) { pending_.push_event({e, offset}); });
    }

    // Closes the pending block: events collected since the last publish plus
    // the controls of the latest mapping tick.
    const synth::BlockSnapshot& publish_block()
    {
        published_ = pending_;
        published_.index = static_cast<std::int64_t>(counters_.blocks++);
        published_.tempo = seq_.tempo();
        published_.control_count = 0;
        for (std::size_t i = 0; i < control_count_; ++i) published_.push_control(controls_[i]);
        pending_.event_count = 0;
        pending_.dropped_events = 0;
        return published_;
    }

    // One whole frame on simulated time: mapping tick at `now`, ten 1 ms
    // sequencer ticks, publish.
    const synth::BlockSnapshot& run_frame(TimeMs now)
    {
        tick_mbf(now);
        for (int i = 0; i < kSeqTicksPerFrame; ++i) tick_sequencer(1.0, i * kFramesPerSeqTick);
        return publish_block();
    }

private:
    static constexpr std::size_t kCalibrationTicks = motion::kMinCalibrationSamples;

    int slot_for(transport::BodyLocation loc) const
    {
        for (std::size_t s = 0; s < state_.sensors.size(); ++s)
            if (state_.sensors[s].location == loc) return static_cast<int>(s);
        return -1;
    }

    transport::ImuSample corrected(int slot) const
    {
        const auto& cfg = state_.sensors[static_cast<std::size_t>(slot)];
        return motion::correct_bias(latest_[static_cast<std::size_t>(slot)], {cfg.gyro_bias, cfg.acc_bias});
    }

    bool any_required_seen() const
    {
        if (is_gait(state_.mode)) {
            const int l = slot_for(transport::BodyLocation::left_leg);
            const int r = slot_for(transport::BodyLocation::right_leg);
            return (l >= 0 && ever_[static_cast<std::size_t>(l)]) || (r >= 0 && ever_[static_cast<std::size_t>(r)]);
        }
        const int t = slot_for(transport::BodyLocation::trunk);
        return t >= 0 && ever_[static_cast<std::size_t>(t)];
    }

    void rebuild_pipeline()
    {
        tilt_ = motion::TiltEstimator(state_.filters.tilt, state_.filters.alpha);
        jerk_ = motion::JerkEstimator(state_.filters.jerk);
        step_ = {motion::StepDetector(motion::Foot::left, state_.gait.detector),
                 motion::StepDetector(motion::Foot::right, state_.gait.detector)};
    }

    void load_music()
    {
        if (!library_) throw MissingAsset("no music library");
        const bool was_playing = seq_.playing();
        seq_.load(library_->timeline(state_.song, state_.style));
        seq_.set_tempo(state_.tempo);
        if (was_playing) seq_.play();
        key_ = library_->song(state_.song).key;
    }

    void reset_mode_state()
    {
        rep_trigger_ = mapping::HysteresisTrigger(state_.reach.rep_threshold, state_.reach.rep_hysteresis);
        cues_ = mapping::FlexionCueDetector(state_.sts.sit_threshold, state_.sts.stand_threshold, state_.sts.hysteresis);
        last_step_t_.reset();
        hold_until_ = -1.0;
        hold_m_ = 0.0;
        hold_sign_ = 0.0;
    }

    // Magnitude m in [0, 1] and direction sign, turned into a control for a
    // given strategy: non-directional strategies take fv = m, directional
    // ones fv = 0.5 + 0.5 * sign * m with loudness m.
    synth::StrategyControl make_control(synth::Strategy s, double m, double sign) const
    {
        const auto& ms = state_.current();
        synth::StrategyControl c = synth::StrategyControl::neutral(s);
        m = clamp01(m);
        if (synth::is_directional(s)) {
            c.fv = clamp01(0.5 + 0.5 * sign * m);
            c.level = m;
        } else {
            c.fv = m;
        }
        c.threshold = ms.gate_threshold;
        c.track_mask = static_cast<std::uint8_t>(ms.track_mask);
        c.hit_velocity = state_.gait.hit_velocity;
        c.cue = ms.cue;
        return c;
    }

    // Directional fv in [0, 1] -> (magnitude, sign).
    static std::pair<double, double> split_directional(double fv)
    {
        const double d = 2.0 * (fv - 0.5);
        return {std::abs(d), d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)};
    }

    static double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

    void compute_controls(TimeMs now, const motion::MovementState& m,
                          const std::array<std::optional<motion::StepEvent>, 2>& steps, LogRow& row)
    {
        const auto& ms = state_.current();
        const double gamma = ms.mapping.gamma;
        double m1 = 0.0, s1 = 0.0, m2 = 0.0, s2 = 0.0;
        bool secondary_cue = false;
        synth::CueKind cue_kind = ms.cue;
        int melody_pitch = -1;
        bool left_hit = false, right_hit = false;

        switch (state_.mode) {
        case Mode::static_balance: {
            m1 = std::pow(mapping::zone_intensity(row.zone), gamma);
            s1 = sign_of(m.pos2d.ml - state_.zones.center.ml);
            m2 = m1;
            s2 = s1;
            row.target_ml = state_.zones.center.ml;
            row.target_ap = state_.zones.center.ap;
            break;
        }
        case Mode::reach: {
            const auto& r = state_.reach;
            const double x = r.axis == Axis::ml ? m.tilt_ml : m.tilt_ap;
            m1 = std::pow(clamp01((x - r.range_lo) / (r.range_hi - r.range_lo)), gamma);
            s1 = 1.0;
            m2 = m1;
            s2 = s1;
            const int degree = mapping::reach_scale_degree(x, {r.range_lo, r.range_hi}, r.n_degrees);
            melody_pitch = std::clamp(seq::scale_degree_to_pitch(degree, key_, r.scale, r.root_octave), 0, 127);
            if (rep_trigger_.update(x)) ++state_.rep_count;
            row.target_ml = r.axis == Axis::ml ? r.range_hi : 0.0;
            row.target_ap = r.axis == Axis::ap ? r.range_hi : 0.0;
            break;
        }
        case Mode::trunk_control: {
            const auto& sg = state_.sigmoid;
            const double beat = seq_.beat_phase();
            const auto pair = mapping::anticipated_error_feedback(m.pos2d, state_.trajectory, beat, sg.lead_beats,
                                                                  sg.slope, sg.dead_half_width);
            auto [ml_m, ml_s] = split_directional(pair.ml.value);
            auto [ap_m, ap_s] = split_directional(pair.ap.value);
            m1 = std::pow(ml_m, gamma);
            s1 = ml_s;
            m2 = std::pow(ap_m, gamma);
            s2 = ap_s;
            const auto target = mapping::trajectory_position(state_.trajectory, beat + sg.lead_beats);
            row.target_ml = target.ml;
            row.target_ap = target.ap;
            break;
        }
        case Mode::sts: {
            const auto fv = mapping::map_feedback_variable(m.jerk_sq, ms.mapping);
            if (fv.directional) std::tie(m1, s1) = split_directional(fv.value);
            else {
                m1 = fv.value;
                s1 = 1.0;
            }
            m2 = m1;
            s2 = s1;
            const auto cue = cues_.update(m.flexion_angle);
            if (cue.stand_cue) ++state_.rep_count;
            row.cue = cue.sit_cue && cue.stand_cue ? CueFlag::both
                    : cue.stand_cue                 ? CueFlag::stand
                    : cue.sit_cue                   ? CueFlag::sit
                                                    : CueFlag::none;
            if (cue.stand_cue || cue.sit_cue) {
                secondary_cue = true;
                if (!cue.stand_cue)
                    cue_kind = ms.cue == synth::CueKind::bell ? synth::CueKind::sweep : synth::CueKind::bell;
            }
            break;
        }
        case Mode::gait_duration:
        case Mode::gait_phase: {
            for (const auto& e : steps) {
                if (!e) continue;
                ++state_.rep_count;
                row.step = e->foot == motion::Foot::left ? StepFlag::left : StepFlag::right;
                (e->foot == motion::Foot::left ? left_hit : right_hit) = true;
                if (last_step_t_) {
                    const double interval = e->t - *last_step_t_;
                    row.step_interval_ms = interval;
                    if (state_.mode == Mode::gait_duration) {
                        const double beat_ms = 60000.0 / seq_.tempo();
                        const double err = mapping::step_timing_error(interval, beat_ms, state_.gait.dead_zone_ms);
                        const auto fv = mapping::map_feedback_variable(err, ms.mapping);
                        if (fv.directional) std::tie(hold_m_, hold_sign_) = split_directional(fv.value);
                        else {
                            hold_m_ = fv.value;
                            hold_sign_ = 1.0;
                        }
                        hold_until_ = now + state_.gait.hold_beats * beat_ms;
                    }
                }
                last_step_t_ = e->t;
            }
            if (state_.mode == Mode::gait_duration) {
                if (now < hold_until_) {
                    m1 = hold_m_;
                    s1 = hold_sign_;
                }
            } else {
                // Live drums for the whole exercise; other strategies pulse on steps.
                m1 = ms.strategy == synth::Strategy::drum_trigger ? 1.0 : ((left_hit || right_hit) ? 1.0 : 0.0);
                s1 = right_hit ? 1.0 : (left_hit ? -1.0 : 0.0);
            }
            m2 = m1;
            s2 = s1;
            break;
        }
        }

        control_count_ = 0;
        auto primary = make_control(ms.strategy, m1, s1);
        primary.melody_pitch = melody_pitch >= 0 ? melody_pitch : primary.melody_pitch;
        primary.left_hit = left_hit;
        primary.right_hit = right_hit;
        controls_[control_count_++] = primary;
        if (ms.secondary_enabled) {
            synth::StrategyControl sec;
            if (ms.secondary == synth::Strategy::cue_artifact && state_.mode == Mode::sts) {
                sec = make_control(ms.secondary, secondary_cue ? 1.0 : 0.0, 1.0);
                sec.cue = cue_kind;
            } else {
                sec = make_control(ms.secondary, m2, s2);
                sec.melody_pitch = primary.melody_pitch;
                sec.left_hit = left_hit;
                sec.right_hit = right_hit;
            }
            controls_[control_count_++] = sec;
        }
    }

    void neutralize_controls()
    {
        for (std::size_t i = 0; i < control_count_; ++i)
            controls_[i] = synth::StrategyControl::neutral(controls_[i].strategy);
    }

    void update_telemetry(const LogRow& row)
    {
        tele_.t = row.t;
        tele_.mode = state_.mode;
        tele_.standby = state_.standby;
        tele_.playing = seq_.playing();
        for (std::size_t s = 0; s < slots_.size(); ++s) tele_.online[s] = slots_[s].online;
        tele_.tilt_ml = row.tilt_ml;
        tele_.tilt_ap = row.tilt_ap;
        tele_.pos = {row.pos_ml, row.pos_ap};
        tele_.zone = row.zone;
        tele_.jerk_sq = row.jerk_sq;
        tele_.flexion = row.flexion;
        tele_.fv = row.fv;
        tele_.fv2 = row.fv2;
        tele_.target = {row.target_ml, row.target_ap};
        tele_.rep_count = state_.rep_count;
        tele_.progress = state_.progress;
        tele_.tempo = row.tempo;
        tele_.beat = row.beat;
    }

    void collect_calibration(const std::array<bool, transport::kSlotCount>& fresh)
    {
        bool complete = true;
        for (std::size_t s = 0; s < calib_.size(); ++s) {
            if (!ever_[s]) continue;
            if (fresh[s] && calib_[s].size() < kCalibrationTicks) calib_[s].push_back(latest_[s]);
            complete = complete && calib_[s].size() >= kCalibrationTicks;
        }
        if (!complete) return;
        try {
            std::array<motion::BiasEstimate, transport::kSlotCount> est{};
            for (std::size_t s = 0; s < calib_.size(); ++s)
                if (ever_[s]) est[s] = motion::calibrate_bias(calib_[s]);
            for (std::size_t s = 0; s < calib_.size(); ++s)
                if (ever_[s]) {
                    state_.sensors[s].gyro_bias = est[s].gyro_bias;
                    state_.sensors[s].acc_bias = est[s].acc_bias;
                }
            calib_status_ = CalibrationStatus::done;
            calib_message_ = "calibrated";
        } catch (const Error& e) {
            calib_status_ = CalibrationStatus::failed;
            calib_message_ = e.what();
        }
    }

    SessionState state_;
    std::shared_ptr<const MusicLibrary> library_;
    std::array<transport::SensorInbox, transport::kSlotCount> inboxes_{};
    std::array<transport::SensorSlot, transport::kSlotCount> slots_{};
    std::array<transport::ImuSample, transport::kSlotCount> latest_{};
    std::array<bool, transport::kSlotCount> ever_{};
    bool was_offline_ = false;

    motion::TiltEstimator tilt_;
    motion::JerkEstimator jerk_;
    std::array<motion::StepDetector, 2> step_{motion::StepDetector(motion::Foot::left),
                                              motion::StepDetector(motion::Foot::right)};
    mapping::HysteresisTrigger rep_trigger_{15.0, 5.0};
    mapping::FlexionCueDetector cues_;
    std::optional<TimeMs> last_step_t_;
    TimeMs hold_until_ = -1.0;
    double hold_m_ = 0.0, hold_sign_ = 0.0;

    seq::Sequencer seq_;
    int key_ = 0;

    std::array<synth::StrategyControl, synth::kMaxBlockControls> controls_{};
    std::size_t control_count_ = 0;
    synth::BlockSnapshot pending_{};
    synth::BlockSnapshot published_{};
    std::uint64_t mixer_version_ = 0;

    motion::MovementState movement_{};
    Telemetry tele_{};
    EngineCounters counters_{};
    LogWriter* log_writer_ = nullptr;
    std::vector<LogRow>* rows_ = nullptr;

    CalibrationStatus calib_status_ = CalibrationStatus::idle;
    std::string calib_message_;
    std::array<std::vector<transport::ImuSample>, transport::kSlotCount> calib_{};
};

// ---------------------------------------------------------------------------
// Offline runner: simulated sensor frames in, rendered blocks out, no clocks.

struct OfflineOptions {
    double drop_fraction = 0.0;  // per datagram
    std::uint64_t seed = 1;
    bool render = true;
    bool autoplay = true;
    TimeMs duration_ms = 0.0;  // 0 = until the last frame
    std::function<void(const synth::AudioBlock&, const synth::BlockSnapshot&)> on_block;
    // Called before each frame; may change the engine (mode, standby, ...).
    std::function<void(EngineCore&, std::int64_t frame)> before_frame;
};

struct OfflineResult {
    std::int64_t frames = 0;
    std::uint64_t datagrams = 0;
    std::uint64_t dropped = 0;
    double wall_ms = 0.0;
};

inline OfflineResult run_offline(EngineCore& engine, std::span<const sim::SimFrame> frames, const OfflineOptions& opt = {})
{
    OfflineResult res;
    const TimeMs start = monotonic_now_ms();
    std::mt19937_64 rng(opt.seed ^ 0xD50Fu);
    std::bernoulli_distribution drop(opt.drop_fraction);
    std::optional<synth::Renderer> renderer;
    if (opt.render) renderer.emplace(engine.state().mixer);
    std::uint64_t mixer_version = engine.mixer_version();
    synth::AudioBlock block;

    const TimeMs end = opt.duration_ms > 0.0 ? opt.duration_ms : (frames.empty() ? 0.0 : frames.back().t + kFrameMs);
    if (opt.autoplay) engine.play();
    auto inboxes = engine.inboxes();
    std::size_t next = 0;
    for (std::int64_t k = 0; static_cast<double>(k) * kFrameMs < end; ++k) {
        const TimeMs now = static_cast<double>(k) * kFrameMs;
        if (opt.before_frame) opt.before_frame(engine, k);
        for (; next < frames.size() && frames[next].t <= now; ++next)
            for (std::size_t s = 0; s < sim::kSlots && s < inboxes.size(); ++s) {
                if (opt.drop_fraction > 0.0 && drop(rng)) {
                    ++res.dropped;
                    continue;
                }
                const auto bytes = transport::encode_osc_message(frames[next].sensors[s]);
                inboxes[s].deliver_bytes(bytes, frames[next].t);
                ++res.datagrams;
            }
        const auto& snap = engine.run_frame(now);
        if (renderer) {
            if (engine.mixer_version() != mixer_version) {
                renderer->configure(engine.state().mixer);
                mixer_version = engine.mixer_version();
            }
            renderer->render_block(snap, block);
            if (opt.on_block) opt.on_block(block, snap);
        }
        ++res.frames;
    }
    res.wall_ms = monotonic_now_ms() - start;
    return res;
}

}  // namespace mbf::session
