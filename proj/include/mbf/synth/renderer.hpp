#pragma once

// Block renderer: 8 tracks -> strips -> bus -> master EQ -> limiter.
// Strategy controls are per-block parameter targets; a strategy that is
// absent from a block reverts to its neutral target, reached through the
// same 10 ms ramps. Neutral paths are skipped outright, so a neutral control
// and no control give bit-identical output.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbf/sequencer/sequencer.hpp"
#include "mbf/synth/dsp.hpp"
#include "mbf/synth/voices.hpp"

namespace mbf::synth {

MBF_DEFINE_ERROR(UnknownStrategy);

inline constexpr std::size_t kTracks = seq::kTrackCount;

enum class Strategy : std::uint8_t {
    music_dissonance,
    disturbance_tone,
    ambulance_siren,
    pitch_skew,
    melody_degree,
    track_mute,
    drum_trigger,
    cue_artifact,
    music_stop,
};

inline constexpr std::array<std::string_view, 9> kStrategyNames{
    "music_dissonance", "disturbance_tone", "ambulance_siren", "pitch_skew", "melody_degree",
    "track_mute",       "drum_trigger",     "cue_artifact",    "music_stop"};

inline std::string_view to_string(Strategy s)
{
    const auto i = static_cast<std::size_t>(s);
    if (i >= kStrategyNames.size()) throw UnknownStrategy("strategy index " + std::to_string(i));
    return kStrategyNames[i];
}

inline Strategy strategy_from_string(std::string_view name)
{
    for (std::size_t i = 0; i < kStrategyNames.size(); ++i)
        if (kStrategyNames[i] == name) return static_cast<Strategy>(i);
    throw UnknownStrategy("unknown strategy '" + std::string(name) + "'");
}

inline bool is_directional(Strategy s) { return s == Strategy::ambulance_siren || s == Strategy::pitch_skew; }

enum class CueKind : std::uint8_t { bell, sweep };

struct StrategyControl {
    Strategy strategy = Strategy::music_dissonance;
    double fv = 0.0;           // feedback variable; 0.5 is neutral for directional strategies
    double level = 1.0;        // siren loudness 0..1
    double threshold = 0.5;    // track_mute / music_stop gate
    std::uint8_t track_mask = 0xFF;  // track_mute: bit i = track i
    bool left_hit = false;     // drum_trigger: left foot -> kick
    bool right_hit = false;    // drum_trigger: right foot -> snare
    int hit_velocity = 110;
    int melody_pitch = 60;     // melody_degree: MIDI pitch replacing sequenced melody
    CueKind cue = CueKind::bell;

    bool operator==(const StrategyControl&) const = default;

    static StrategyControl neutral(Strategy s)
    {
        StrategyControl c;
        c.strategy = s;
        c.fv = is_directional(s) ? 0.5 : 0.0;
        if (s == Strategy::ambulance_siren) c.level = 0.0;
        return c;
    }
};

struct BlockEvent {
    seq::MusicEvent event;
    int offset = 0;  // frame within the block
};

inline constexpr std::size_t kMaxBlockEvents = 96;
inline constexpr std::size_t kMaxBlockControls = 4;

// Immutable per-block input handed from the engine ticks to the render path.
struct BlockSnapshot {
    std::int64_t index = 0;
    double tempo = 120.0;
    std::array<BlockEvent, kMaxBlockEvents> events{};
    std::size_t event_count = 0;
    std::array<StrategyControl, kMaxBlockControls> controls{};
    std::size_t control_count = 0;
    std::size_t dropped_events = 0;

    bool push_event(const BlockEvent& e)
    {
        if (event_count == events.size()) {
            ++dropped_events;
            return false;
        }
        events[event_count++] = e;
        return true;
    }
    bool push_control(const StrategyControl& c)
    {
        if (control_count == controls.size()) return false;
        controls[control_count++] = c;
        return true;
    }
    std::span<const BlockEvent> event_span() const { return {events.data(), event_count}; }
    std::span<const StrategyControl> control_span() const { return {controls.data(), control_count}; }
};

struct AudioBlock {
    std::array<float, kBlockFrames> left{};
    std::array<float, kBlockFrames> right{};
    bool operator==(const AudioBlock&) const = default;
    bool silent() const
    {
        for (int i = 0; i < kBlockFrames; ++i)
            if (left[static_cast<std::size_t>(i)] != 0.0f || right[static_cast<std::size_t>(i)] != 0.0f) return false;
        return true;
    }
};

struct EqBand {
    double freq = 1000.0;
    double gain_db = 0.0;
    double q = 1.0;
    bool operator==(const EqBand&) const = default;
};

struct TrackStrip {
    double gain_db = 0.0;
    double pan = 0.0;
    CompressorSettings comp;
    std::array<EqBand, 4> eq{EqBand{100.0, 0.0, 0.7}, EqBand{500.0, 0.0, 1.0}, EqBand{2000.0, 0.0, 1.0},
                             EqBand{8000.0, 0.0, 0.7}};
    bool operator==(const TrackStrip&) const = default;
};

struct MixerSettings {
    std::array<TrackStrip, kTracks> tracks{};
    std::array<EqBand, 4> master_eq{EqBand{80.0, 0.0, 0.7}, EqBand{400.0, 0.0, 1.0}, EqBand{2500.0, 0.0, 1.0},
                                    EqBand{10000.0, 0.0, 0.7}};
    double limiter_ceiling = 0.98;
    double disturbance_freq = 2200.0;
    double disturbance_max_db = -6.0;
    double siren_lo = 600.0;
    double siren_hi = 800.0;
    double siren_rate = 2.0;  // tone alternations per second
    double siren_gain = 0.35;
    double max_detune_cents = 90.0;
    double max_skew_semitones = 2.0;
    double echo_beats = 0.75;
    double echo_feedback = 0.35;
    double echo_mix = 0.25;
    std::uint8_t solo_mask = 0;  // 0 = all tracks audible

    bool operator==(const MixerSettings&) const = default;

    static MixerSettings defaults()
    {
        MixerSettings m;
        using seq::Track;
        auto& t = m.tracks;
        auto at = [&](Track k) -> TrackStrip& { return t[static_cast<std::size_t>(k)]; };
        at(Track::kick) = {0.0, 0.0, {-10.0, 4.0, 2.0, 60.0}, {EqBand{60.0, 3.0, 1.0}, EqBand{300.0, -3.0, 1.2}, EqBand{2000.0, 0.0, 1.0}, EqBand{6000.0, 1.0, 0.7}}};
        at(Track::snare) = {-2.0, 0.0, {-12.0, 3.0, 3.0, 80.0}, {EqBand{200.0, 2.0, 1.0}, EqBand{800.0, 0.0, 1.0}, EqBand{3000.0, 1.5, 1.0}, EqBand{9000.0, 0.0, 0.7}}};
        at(Track::hat) = {-9.0, 0.3, {}, {EqBand{100.0, 0.0, 0.7}, EqBand{500.0, 0.0, 1.0}, EqBand{6000.0, -2.0, 1.0}, EqBand{10000.0, 2.0, 0.7}}};
        at(Track::perc) = {-8.0, -0.3, {}, {}};
        at(Track::bass) = {-2.0, 0.0, {-14.0, 3.0, 10.0, 120.0}, {EqBand{80.0, 2.0, 0.8}, EqBand{250.0, -2.0, 1.0}, EqBand{2000.0, 0.0, 1.0}, EqBand{8000.0, 0.0, 0.7}}};
        at(Track::chord) = {-5.0, -0.25, {}, {EqBand{150.0, -3.0, 0.7}, EqBand{500.0, 0.0, 1.0}, EqBand{2000.0, 1.0, 1.0}, EqBand{8000.0, 0.0, 0.7}}};
        at(Track::melody) = {-3.0, 0.15, {-12.0, 2.0, 5.0, 100.0}, {EqBand{200.0, -2.0, 0.7}, EqBand{1000.0, 0.0, 1.0}, EqBand{3000.0, 2.0, 1.0}, EqBand{8000.0, 0.0, 0.7}}};
        at(Track::pad) = {-7.0, 0.0, {}, {EqBand{200.0, -2.0, 0.7}, EqBand{500.0, 0.0, 1.0}, EqBand{2000.0, 0.0, 1.0}, EqBand{8000.0, -2.0, 0.7}}};
        return m;
    }

    void validate() const
    {
        auto check_band = [](const EqBand& b) {
            if (!(b.freq > 0.0 && b.freq < kSampleRate / 2.0)) throw InvalidFreq("EQ band frequency out of range");
            if (!(b.q > 0.0)) throw InvalidFreq("EQ band Q must be positive");
        };
        for (const auto& s : tracks) {
            if (!(s.comp.ratio >= 1.0)) throw InvalidFreq("compressor ratio must be >= 1");
            if (s.pan < -1.0 || s.pan > 1.0) throw InvalidFreq("pan must lie in [-1, 1]");
            for (const auto& b : s.eq) check_band(b);
        }
        for (const auto& b : master_eq) check_band(b);
        if (!(disturbance_freq > 0.0 && disturbance_freq < kSampleRate / 2.0))
            throw InvalidFreq("disturbance frequency out of range");
    }
};

// Echo delay for the melody send; scales inversely with tempo.
inline double echo_delay_ms(double tempo, double beats = 0.75) { return beats * 60000.0 / tempo; }

// Envelope time multiplier relative to 120 BPM.
inline double envelope_scale(double tempo) { return 120.0 / tempo; }

class Renderer {
public:
    explicit Renderer(const MixerSettings& settings = MixerSettings::defaults())
        : echo_buf_(static_cast<std::size_t>(echo_delay_ms(seq::kMinTempo, 2.0) * kSampleRate / 1000.0) + 1, 0.0)
    {
        using K = PercussionVoice::Kind;
        perc_ = {PercussionVoice(K::kick, 0x1234u), PercussionVoice(K::snare, 0x2345u),
                 PercussionVoice(K::hat, 0x3456u), PercussionVoice(K::perc, 0x4567u)};
        configure(settings);
    }

    // Not for the render path.
    void configure(const MixerSettings& s)
    {
        s.validate();
        settings_ = s;
        for (std::size_t t = 0; t < kTracks; ++t) {
            const auto& strip = s.tracks[t];
            Strip& st = strips_[t];
            st.gain = db_to_gain(strip.gain_db);
            st.pan = pan_gains(strip.pan);
            st.comp.configure(strip.comp);
            st.eq_count = 0;
            for (const auto& b : strip.eq)
                if (b.gain_db != 0.0) st.eq[st.eq_count++] = design_peaking_eq(b.freq, b.gain_db, b.q);
            const auto track = static_cast<seq::Track>(t);
            if (!seq::is_percussion(track))
                for (auto& v : pitched_[t - 4]) v.configure(default_voice_shape(track));
        }
        master_count_ = 0;
        for (const auto& b : s.master_eq)
            if (b.gain_db != 0.0) {
                master_l_[master_count_] = design_peaking_eq(b.freq, b.gain_db, b.q);
                master_r_[master_count_] = master_l_[master_count_];
                ++master_count_;
            }
        limiter_ = Limiter(s.limiter_ceiling);
    }

    const MixerSettings& settings() const { return settings_; }

    // Applies one control to the current block's targets.
    void apply_strategy(const StrategyControl& c)
    {
        const double fv = clamp01(c.fv);
        switch (c.strategy) {
        case Strategy::music_dissonance: tgt_.detune_cents = fv * settings_.max_detune_cents; break;
        case Strategy::disturbance_tone:
            tgt_.disturbance = fv * db_to_gain(settings_.disturbance_max_db);
            break;
        case Strategy::ambulance_siren:
            tgt_.siren_level = clamp01(c.level) * settings_.siren_gain;
            tgt_.siren_pan = 2.0 * (fv - 0.5);
            break;
        case Strategy::pitch_skew: tgt_.skew = 2.0 * (fv - 0.5) * settings_.max_skew_semitones; break;
        case Strategy::melody_degree:
            if (fv > 0.0) tgt_.melody_pitch = std::clamp(c.melody_pitch, 0, 127);
            break;
        case Strategy::track_mute:
            if (fv > c.threshold)
                for (std::size_t t = 0; t < kTracks; ++t)
                    if (c.track_mask & (1u << t)) tgt_.track_gate[t] = 0.0;
            break;
        case Strategy::music_stop:
            if (fv > c.threshold) tgt_.music_gate = 0.0;
            break;
        case Strategy::drum_trigger:
            if (fv > 0.0) {
                tgt_.drums_live = true;
                tgt_.left_hit = tgt_.left_hit || c.left_hit;
                tgt_.right_hit = tgt_.right_hit || c.right_hit;
                tgt_.hit_velocity = std::clamp(c.hit_velocity, 1, 127);
            }
            break;
        case Strategy::cue_artifact:
            if (fv > 0.0) {
                if (c.cue == CueKind::bell) tgt_.bell = true;
                else tgt_.sweep = true;
            }
            break;
        default: throw UnknownStrategy("strategy index " + std::to_string(static_cast<int>(c.strategy)));
        }
    }

    void render_block(const BlockSnapshot& snap, AudioBlock& out)
    {
        render_block(snap.event_span(), snap.control_span(), snap.tempo, out);
    }

    // events must be sorted by offset, each offset in [0, kBlockFrames).
    void render_block(std::span<const BlockEvent> events, std::span<const StrategyControl> controls, double tempo,
                      AudioBlock& out)
    {
        tgt_ = Targets{};
        for (const auto& c : controls) apply_strategy(c);
        begin_block(tempo);

        std::size_t next = 0;
        for (int i = 0; i < kBlockFrames; ++i) {
            while (next < events.size() && events[next].offset <= i) handle_event(events[next++].event);
            double l = 0.0, r = 0.0;
            mix_music(l, r);
            mix_feedback(l, r);
            for (int b = 0; b < master_count_; ++b) {
                l = master_l_[b].process(l);
                r = master_r_[b].process(r);
            }
            if (!std::isfinite(l)) l = 0.0;
            if (!std::isfinite(r)) r = 0.0;
            limiter_.process(l, r);
            out.left[static_cast<std::size_t>(i)] = static_cast<float>(l);
            out.right[static_cast<std::size_t>(i)] = static_cast<float>(r);
        }
        while (next < events.size()) handle_event(events[next++].event);
    }

    AudioBlock render_block(std::span<const BlockEvent> events, std::span<const StrategyControl> controls,
                            double tempo)
    {
        AudioBlock b;
        render_block(events, controls, tempo, b);
        return b;
    }

    double limiter_gain() const { return limiter_.gain(); }

private:
    static constexpr int kVoicesPerTrack = 4;
    static constexpr int kSmoothing = kBlockFrames;  // 10 ms

    struct Strip {
        double gain = 1.0;
        PanGains pan{1.0, 1.0};
        Compressor comp;
        std::array<Biquad, 4> eq{};
        int eq_count = 0;
    };

    struct Targets {
        double detune_cents = 0.0;
        double skew = 0.0;
        double disturbance = 0.0;
        double siren_level = 0.0;
        double siren_pan = 0.0;
        int melody_pitch = -1;
        std::array<double, kTracks> track_gate{1, 1, 1, 1, 1, 1, 1, 1};
        double music_gate = 1.0;
        bool drums_live = false;
        bool left_hit = false;
        bool right_hit = false;
        int hit_velocity = 110;
        bool bell = false;
        bool sweep = false;
    };

    void begin_block(double tempo)
    {
        tempo_ = std::clamp(tempo, seq::kMinTempo, seq::kMaxTempo);
        env_scale_ = envelope_scale(tempo_);
        echo_len_ = std::clamp(static_cast<std::size_t>(echo_delay_ms(tempo_, settings_.echo_beats) * kSampleRate / 1000.0),
                               std::size_t{1}, echo_buf_.size() - 1);
        detune_.set_target(tgt_.detune_cents, kSmoothing);
        skew_.set_target(tgt_.skew, kSmoothing);
        disturbance_.set_target(tgt_.disturbance, kSmoothing);
        siren_level_.set_target(tgt_.siren_level, kSmoothing);
        siren_pan_.set_target(tgt_.siren_pan, kSmoothing);
        music_gate_.set_target(tgt_.music_gate, kSmoothing);
        for (std::size_t t = 0; t < kTracks; ++t) track_gate_[t].set_target(tgt_.track_gate[t], kSmoothing);

        drums_live_ = tgt_.drums_live;
        if (tgt_.left_hit) perc_[0].trigger(tgt_.hit_velocity, 36, env_scale_);
        if (tgt_.right_hit) perc_[1].trigger(tgt_.hit_velocity, 38, env_scale_);
        if (tgt_.bell) bell_.trigger();
        if (tgt_.sweep) sweep_.trigger();

        if (tgt_.melody_pitch != melody_override_) {
            melody_override_ = tgt_.melody_pitch;
            auto& voices = pitched_[static_cast<std::size_t>(seq::Track::melody) - 4];
            for (std::size_t v = 0; v < voices.size(); ++v)
                if (voices[v].held())
                    voices[v].retune(melody_override_ >= 0 ? melody_override_ : keys_[static_cast<std::size_t>(seq::Track::melody) - 4][v]);
        }
    }

    void handle_event(const seq::MusicEvent& e)
    {
        const auto t = static_cast<std::size_t>(e.track);
        if (seq::is_percussion(e.track)) {
            if (e.kind != seq::EventKind::note_on) return;
            if (drums_live_ && (e.track == seq::Track::kick || e.track == seq::Track::snare)) return;
            perc_[t].trigger(e.velocity, e.pitch, env_scale_);
            return;
        }
        auto& voices = pitched_[t - 4];
        auto& keys = keys_[t - 4];
        if (e.kind == seq::EventKind::note_off) {
            for (std::size_t v = 0; v < voices.size(); ++v)
                if (voices[v].held() && keys[v] == e.pitch) {
                    voices[v].note_off();
                    keys[v] = -1;
                    return;
                }
            return;
        }
        std::size_t slot = voices.size();
        for (std::size_t v = 0; v < voices.size() && slot == voices.size(); ++v)
            if (!voices[v].active()) slot = v;
        for (std::size_t v = 0; v < voices.size() && slot == voices.size(); ++v)
            if (!voices[v].held()) slot = v;
        if (slot == voices.size()) slot = steal_[t - 4]++ % voices.size();
        keys[slot] = e.pitch;
        const int pitch = (e.track == seq::Track::melody && melody_override_ >= 0) ? melody_override_ : e.pitch;
        voices[slot].note_on(pitch, e.velocity, env_scale_);
    }

    void mix_music(double& l, double& r)
    {
        const double cents = detune_.next();
        const double skew = skew_.next();
        const double detune_st = cents / 100.0;
        double echo_in = 0.0;
        double ml = 0.0, mr = 0.0;
        for (std::size_t t = 0; t < kTracks; ++t) {
            const double gate = track_gate_[t].next();
            double x = 0.0;
            if (t < 4) {
                x = perc_[t].next();
            } else {
                const auto track = static_cast<seq::Track>(t);
                double offset = 0.0;
                if (track == seq::Track::chord || track == seq::Track::melody) offset = detune_st;
                if (track == seq::Track::melody) offset += skew;
                for (auto& v : pitched_[t - 4]) x += v.next(offset);
            }
            if (settings_.solo_mask != 0 && !(settings_.solo_mask & (1u << t))) continue;
            Strip& st = strips_[t];
            x *= st.gain;
            x = st.comp.process(x);
            for (int b = 0; b < st.eq_count; ++b) x = st.eq[static_cast<std::size_t>(b)].process(x);
            x = std::clamp(x, -1.0, 1.0);
            if (!track_gate_[t].idle_at(1.0)) x *= gate;
            if (t == static_cast<std::size_t>(seq::Track::melody)) echo_in = x;
            ml += x * st.pan.l;
            mr += x * st.pan.r;
        }
        // Tempo-synced echo on the melody send.
        const std::size_t n = echo_buf_.size();
        const double delayed = echo_buf_[(echo_pos_ + n - echo_len_) % n];
        echo_buf_[echo_pos_] = echo_in + settings_.echo_feedback * delayed;
        echo_pos_ = (echo_pos_ + 1) % n;
        if (delayed != 0.0) {
            ml += settings_.echo_mix * delayed;
            mr += settings_.echo_mix * delayed;
        }
        const double gate = music_gate_.next();
        if (!music_gate_.idle_at(1.0)) {
            ml *= gate;
            mr *= gate;
        }
        l += ml;
        r += mr;
    }

    void mix_feedback(double& l, double& r)
    {
        const double dist = disturbance_.next();
        if (!disturbance_.idle_at(0.0)) {
            const double y = dist * disturbance_osc_.next(settings_.disturbance_freq);
            l += y;
            r += y;
        } else {
            disturbance_osc_.reset();
        }
        const double level = siren_level_.next();
        const double pan = siren_pan_.next();
        if (!siren_level_.idle_at(0.0)) {
            const double period = kSampleRate / settings_.siren_rate;
            const bool hi = std::fmod(static_cast<double>(siren_n_++), 2.0 * period) >= period;
            const double y = level * siren_osc_.next(hi ? settings_.siren_hi : settings_.siren_lo);
            const auto g = pan_gains(pan);
            l += y * g.l;
            r += y * g.r;
        } else {
            siren_osc_.reset();
            siren_n_ = 0;
        }
        if (bell_.active()) {
            const double y = bell_.next();
            l += y;
            r += y;
        }
        if (sweep_.active()) {
            const double y = sweep_.next();
            l += y;
            r += y;
        }
    }

    MixerSettings settings_;
    std::array<Strip, kTracks> strips_;
    std::array<PercussionVoice, 4> perc_;
    std::array<std::array<PitchedVoice, kVoicesPerTrack>, 4> pitched_{};
    std::array<std::array<int, kVoicesPerTrack>, 4> keys_{{{-1, -1, -1, -1}, {-1, -1, -1, -1}, {-1, -1, -1, -1}, {-1, -1, -1, -1}}};
    std::array<std::size_t, 4> steal_{};
    std::array<Biquad, 4> master_l_{}, master_r_{};
    int master_count_ = 0;
    Limiter limiter_;

    Targets tgt_;
    Ramp detune_, skew_, disturbance_, siren_level_, siren_pan_;
    Ramp music_gate_{1.0};
    std::array<Ramp, kTracks> track_gate_{Ramp{1.0}, Ramp{1.0}, Ramp{1.0}, Ramp{1.0},
                                                   Ramp{1.0}, Ramp{1.0}, Ramp{1.0}, Ramp{1.0}};
    bool drums_live_ = false;
    int melody_override_ = -1;

    SineOsc disturbance_osc_, siren_osc_;
    long siren_n_ = 0;
    BellOneShot bell_;
    SweepOneShot sweep_;

    std::vector<double> echo_buf_;
    std::size_t echo_pos_ = 0;
    std::size_t echo_len_ = 1;
    double tempo_ = 120.0;
    double env_scale_ = 1.0;
};

}  // namespace mbf::synth
