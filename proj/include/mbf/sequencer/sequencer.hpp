#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "mbf/sequencer/score.hpp"

namespace mbf::seq {

inline constexpr double kMinTempo = 30.0;
inline constexpr double kMaxTempo = 240.0;

enum class EventKind : std::uint8_t { note_off, note_on };  // offs order before ons at equal ticks

struct MusicEvent {
    EventKind kind = EventKind::note_on;
    Track track = Track::melody;
    int pitch = 60;
    int velocity = 100;
    std::int64_t t_tick = 0;
    bool operator==(const MusicEvent&) const = default;
};

struct SequencerClock {
    double elapsed_ticks = 0.0;
    double tempo = 120.0;  // BPM
    int ppqn = kDefaultPpqn;
    bool playing = false;
};

inline double ticks_per_ms(double tempo, int ppqn) { return ppqn * tempo / 60000.0; }

inline double advance_clock(SequencerClock& clock, double dt_ms)
{
    if (clock.playing) clock.elapsed_ticks += dt_ms * ticks_per_ms(clock.tempo, clock.ppqn);
    return clock.elapsed_ticks;
}

inline double beat_phase(const SequencerClock& clock) { return clock.elapsed_ticks / clock.ppqn; }

enum class Scale { major, minor_nat, pentatonic };

inline std::span<const int> scale_intervals(Scale s)
{
    static constexpr int kMajor[] = {0, 2, 4, 5, 7, 9, 11};
    static constexpr int kMinor[] = {0, 2, 3, 5, 7, 8, 10};
    static constexpr int kPenta[] = {0, 2, 4, 7, 9};
    switch (s) {
    case Scale::major: return kMajor;
    case Scale::minor_nat: return kMinor;
    case Scale::pentatonic: return kPenta;
    }
    return kMajor;
}

// root_octave uses the MIDI convention where C4 = 60.
inline int scale_degree_to_pitch(int degree, int key, Scale scale, int root_octave = 4)
{
    const auto iv = scale_intervals(scale);
    const int n = static_cast<int>(iv.size());
    const int d = std::max(degree, 0);
    return 12 * (root_octave + 1) + key + iv[static_cast<std::size_t>(d % n)] + 12 * (d / n);
}

// The song's note matrices merged with the style pattern looped every four
// bars up to the song end, flattened into on/off events in tick order.
class Timeline {
public:
    Timeline() = default;

    Timeline(const SongScore& song, const StylePattern& style) : ppqn_(song.ppqn), end_(song.length_ticks())
    {
        auto add = [&](const Note& n, std::int64_t on, std::int64_t off) {
            events_.push_back({EventKind::note_on, n.track, n.pitch, n.velocity, on});
            events_.push_back({EventKind::note_off, n.track, n.pitch, 0, off});
        };
        for (const auto& n : song.notes) add(n, n.tick_on, n.tick_off);

        const auto rescale = [&](std::int64_t t) { return t * song.ppqn / style.ppqn; };
        const std::int64_t loop = rescale(style.length_ticks());
        for (std::int64_t base = 0; base < end_; base += loop)
            for (const auto& n : style.notes) {
                const auto on = base + rescale(n.tick_on);
                if (on >= end_) continue;
                add(n, on, std::min(base + rescale(n.tick_off), end_));
            }

        std::stable_sort(events_.begin(), events_.end(), [](const MusicEvent& a, const MusicEvent& b) {
            if (a.t_tick != b.t_tick) return a.t_tick < b.t_tick;
            if (a.kind != b.kind) return a.kind < b.kind;
            if (a.track != b.track) return a.track < b.track;
            return a.pitch < b.pitch;
        });
    }

    std::span<const MusicEvent> events() const { return events_; }
    std::int64_t end_ticks() const { return end_; }
    int ppqn() const { return ppqn_; }

    // Events with t_tick in (prev_ticks, now_ticks].
    std::span<const MusicEvent> due(double prev_ticks, double now_ticks) const
    {
        auto after = [](double t, const MusicEvent& e) { return t < static_cast<double>(e.t_tick); };
        auto first = std::upper_bound(events_.begin(), events_.end(), prev_ticks, after);
        auto last = std::upper_bound(first, events_.end(), now_ticks, after);
        return {first, last};
    }

private:
    int ppqn_ = kDefaultPpqn;
    std::int64_t end_ = 0;
    std::vector<MusicEvent> events_;
};

inline std::vector<MusicEvent> collect_due_events(const Timeline& timeline, double prev_ticks, double now_ticks)
{
    auto d = timeline.due(prev_ticks, now_ticks);
    return {d.begin(), d.end()};
}

// Playback state around a timeline. tick() is allocation-free: due events
// are handed to the sink one by one.
class Sequencer {
public:
    Sequencer() = default;
    explicit Sequencer(Timeline timeline) { load(std::move(timeline)); }

    void load(Timeline timeline)
    {
        timeline_ = std::move(timeline);
        clock_.ppqn = timeline_.ppqn();
        rewind();
    }

    void rewind()
    {
        clock_.elapsed_ticks = 0.0;
        collected_ = -1.0;  // so events at tick 0 are due on the first tick
        cursor_ = 0;
    }

    void play() { clock_.playing = true; }
    void pause() { clock_.playing = false; }
    bool playing() const { return clock_.playing; }

    void set_tempo(double bpm) { clock_.tempo = std::clamp(bpm, kMinTempo, kMaxTempo); }
    double tempo() const { return clock_.tempo; }

    template <typename Sink>
    std::size_t tick(double dt_ms, Sink&& sink)
    {
        if (!clock_.playing) return 0;
        advance_clock(clock_, dt_ms);
        const auto events = timeline_.events();
        std::size_t n = 0;
        while (cursor_ < events.size() && static_cast<double>(events[cursor_].t_tick) <= clock_.elapsed_ticks) {
            sink(events[cursor_++]);
            ++n;
        }
        collected_ = clock_.elapsed_ticks;
        return n;
    }

    const SequencerClock& clock() const { return clock_; }
    const Timeline& timeline() const { return timeline_; }
    double beat_phase() const { return seq::beat_phase(clock_); }
    bool finished() const { return cursor_ >= timeline_.events().size() && clock_.elapsed_ticks >= timeline_.end_ticks(); }

    double progress() const
    {
        const auto end = timeline_.end_ticks();
        return end > 0 ? clamp01(clock_.elapsed_ticks / static_cast<double>(end)) : 0.0;
    }

private:
    Timeline timeline_;
    SequencerClock clock_;
    double collected_ = -1.0;
    std::size_t cursor_ = 0;
};

}  // namespace mbf::seq
