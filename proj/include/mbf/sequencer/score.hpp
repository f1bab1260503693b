#pragma once

// Song and style note matrices and their plain-text file format.
//
//   # comment
//   key=C            song only: pitch class
//   bars=4           song: any length; style: exactly 4
//   ppqn=960
//   tracks=3         optional: number of distinct tracks with notes
//   name=rock        style only
//   role=kick:variant=0
//   <track>,<tick_on>,<tick_off>,<pitch>,<velocity>,<voice>
//
// <track> is a track name (kick, snare, hat, perc, bass, chord, melody, pad)
// or its index 0..7.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mbf/common.hpp"

namespace mbf::seq {

MBF_DEFINE_ERROR(ParseError);
MBF_DEFINE_ERROR(UnbalancedNotes);

inline constexpr int kTrackCount = 8;
inline constexpr int kMaxVoices = 4;
inline constexpr int kDefaultPpqn = 960;
inline constexpr int kStyleBars = 4;
inline constexpr int kBeatsPerBar = 4;

enum class Track : std::uint8_t { kick, snare, hat, perc, bass, chord, melody, pad };

inline constexpr std::array<std::string_view, kTrackCount> kTrackNames{"kick",  "snare", "hat",    "perc",
                                                                       "bass",  "chord", "melody", "pad"};

inline std::string_view to_string(Track t) { return kTrackNames[static_cast<std::size_t>(t)]; }

inline bool is_percussion(Track t) { return static_cast<int>(t) <= static_cast<int>(Track::perc); }

inline std::optional<Track> parse_track(std::string_view s)
{
    for (std::size_t i = 0; i < kTrackNames.size(); ++i)
        if (kTrackNames[i] == s) return static_cast<Track>(i);
    int idx = -1;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), idx);
    if (ec == std::errc() && p == s.data() + s.size() && idx >= 0 && idx < kTrackCount)
        return static_cast<Track>(idx);
    return std::nullopt;
}

// MIDI pitch register allowed per pitched track (inclusive).
struct Register {
    int lo;
    int hi;
};

inline Register track_register(Track t)
{
    switch (t) {
    case Track::bass: return {24, 48};    // C1..C3
    case Track::chord: return {48, 72};   // C3..C5
    case Track::pad: return {48, 72};
    case Track::melody: return {60, 84};  // C4..C6
    default: return {0, 127};
    }
}

struct Note {
    Track track = Track::melody;
    std::int64_t tick_on = 0;
    std::int64_t tick_off = 0;
    int pitch = 60;
    int velocity = 100;
    int voice = 0;
    bool operator==(const Note&) const = default;
};

struct SongScore {
    int key = 0;  // pitch class, 0 = C
    int length_bars = 4;
    int ppqn = kDefaultPpqn;
    std::vector<Note> notes;

    bool operator==(const SongScore&) const = default;

    std::int64_t length_ticks() const { return std::int64_t{length_bars} * kBeatsPerBar * ppqn; }

    int track_count() const
    {
        std::array<bool, kTrackCount> used{};
        for (const auto& n : notes) used[static_cast<std::size_t>(n.track)] = true;
        return static_cast<int>(std::count(used.begin(), used.end(), true));
    }
};

struct RoleVariant {
    Track track = Track::kick;
    int variant = 0;
    bool operator==(const RoleVariant&) const = default;
};

struct StylePattern {
    std::string name = "default";
    int ppqn = kDefaultPpqn;
    std::vector<Note> notes;  // within the four-bar loop
    std::vector<RoleVariant> roles;

    bool operator==(const StylePattern&) const = default;

    std::int64_t length_ticks() const { return std::int64_t{kStyleBars} * kBeatsPerBar * ppqn; }
};

inline constexpr std::array<std::string_view, 12> kPitchClassNames{"C",  "C#", "D",  "D#", "E",  "F",
                                                                   "F#", "G",  "G#", "A",  "A#", "B"};

inline std::optional<int> parse_pitch_class(std::string_view s)
{
    if (s.empty()) return std::nullopt;
    static constexpr std::array<int, 7> kBase{9, 11, 0, 2, 4, 5, 7};  // A..G
    int v = -1;
    if (auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v); ec == std::errc() && p == s.data() + s.size())
        return (v >= 0 && v < 12) ? std::optional(v) : std::nullopt;
    const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    if (letter < 'A' || letter > 'G') return std::nullopt;
    v = kBase[static_cast<std::size_t>(letter - 'A')];
    for (char c : s.substr(1)) {
        if (c == '#') ++v;
        else if (c == 'b') --v;
        else return std::nullopt;
    }
    return ((v % 12) + 12) % 12;
}

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

template <typename T>
T parse_number(std::string_view s, int line, const char* field)
{
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError("line " + std::to_string(line) + ": invalid " + field + " '" + std::string(s) + "'");
    return v;
}

struct RawFile {
    std::map<std::string, std::string, std::less<>> header;
    std::vector<std::pair<int, Note>> notes;  // (line, note)
    std::vector<std::pair<int, RoleVariant>> roles;
};

inline RawFile parse_raw(std::istream& in)
{
    RawFile raw;
    std::string line_buf;
    int line = 0;
    while (std::getline(in, line_buf)) {
        ++line;
        auto s = trim(line_buf);
        if (s.empty() || s.front() == '#') continue;
        if (s.starts_with("role=")) {
            // role=<track>:variant=<id>
            auto parts = split(s.substr(5), ':');
            if (parts.size() != 2 || !parts[1].starts_with("variant="))
                throw ParseError("line " + std::to_string(line) + ": expected role=<track>:variant=<id>");
            auto track = parse_track(parts[0]);
            if (!track) throw ParseError("line " + std::to_string(line) + ": unknown track '" + std::string(parts[0]) + "'");
            raw.roles.push_back({line, {*track, parse_number<int>(parts[1].substr(8), line, "variant")}});
            continue;
        }
        if (auto eq = s.find('='); eq != std::string_view::npos && s.find(',') == std::string_view::npos) {
            raw.header[std::string(trim(s.substr(0, eq)))] = std::string(trim(s.substr(eq + 1)));
            continue;
        }
        auto f = split(s, ',');
        if (f.size() != 6)
            throw ParseError("line " + std::to_string(line) + ": expected 6 comma-separated fields, got " +
                             std::to_string(f.size()));
        auto track = parse_track(f[0]);
        if (!track) throw ParseError("line " + std::to_string(line) + ": unknown track '" + std::string(f[0]) + "'");
        Note n;
        n.track = *track;
        n.tick_on = parse_number<std::int64_t>(f[1], line, "tick_on");
        n.tick_off = parse_number<std::int64_t>(f[2], line, "tick_off");
        n.pitch = parse_number<int>(f[3], line, "pitch");
        n.velocity = parse_number<int>(f[4], line, "velocity");
        n.voice = parse_number<int>(f[5], line, "voice");
        raw.notes.push_back({line, n});
    }
    return raw;
}

inline void validate_note(const Note& n, int line, std::int64_t length_ticks)
{
    const std::string at = "line " + std::to_string(line) + ": ";
    if (n.tick_on < 0) throw ParseError(at + "negative tick_on");
    if (n.tick_off <= n.tick_on) throw UnbalancedNotes(at + "note_off at or before note_on");
    if (n.tick_off > length_ticks) throw ParseError(at + "note extends past the end");
    if (n.pitch < 0 || n.pitch > 127) throw ParseError(at + "pitch outside 0..127");
    if (n.velocity < 1 || n.velocity > 127) throw ParseError(at + "velocity outside 1..127");
    if (n.voice < 0 || n.voice >= kMaxVoices) throw ParseError(at + "voice outside 0..3");
    const auto reg = track_register(n.track);
    if (n.pitch < reg.lo || n.pitch > reg.hi)
        throw ParseError(at + "pitch " + std::to_string(n.pitch) + " outside the " + std::string(to_string(n.track)) +
                         " register");
}

// At most kMaxVoices overlapping notes per track, and a voice slot is never
// reused while still sounding.
inline void validate_polyphony(const std::vector<Note>& notes)
{
    for (int t = 0; t < kTrackCount; ++t) {
        std::vector<std::pair<std::int64_t, int>> edges;  // (tick, +1/-1); offs sort before ons
        std::vector<const Note*> track_notes;
        for (const auto& n : notes) {
            if (static_cast<int>(n.track) != t) continue;
            edges.push_back({n.tick_on, +1});
            edges.push_back({n.tick_off, -1});
            track_notes.push_back(&n);
        }
        std::sort(edges.begin(), edges.end());
        int active = 0;
        for (const auto& [tick, d] : edges) {
            active += d;
            if (active > kMaxVoices)
                throw ParseError("track " + std::string(kTrackNames[static_cast<std::size_t>(t)]) + " exceeds " +
                                 std::to_string(kMaxVoices) + " voices at tick " + std::to_string(tick));
        }
        for (std::size_t i = 0; i < track_notes.size(); ++i)
            for (std::size_t j = i + 1; j < track_notes.size(); ++j) {
                const auto& a = *track_notes[i];
                const auto& b = *track_notes[j];
                if (a.voice == b.voice && a.tick_on < b.tick_off && b.tick_on < a.tick_off)
                    throw ParseError("track " + std::string(kTrackNames[static_cast<std::size_t>(t)]) +
                                     ": voice " + std::to_string(a.voice) + " overlaps itself at tick " +
                                     std::to_string(std::max(a.tick_on, b.tick_on)));
            }
    }
}

inline int header_int(const RawFile& raw, std::string_view key, std::optional<int> fallback)
{
    auto it = raw.header.find(key);
    if (it == raw.header.end()) {
        if (fallback) return *fallback;
        throw ParseError("missing header '" + std::string(key) + "'");
    }
    return parse_number<int>(it->second, 0, std::string(key).c_str());
}

inline std::ifstream open_or_throw(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return in;
}

inline void write_note(std::ostream& out, const Note& n)
{
    out << to_string(n.track) << ',' << n.tick_on << ',' << n.tick_off << ',' << n.pitch << ',' << n.velocity << ','
        << n.voice << '\n';
}

}  // namespace detail

inline SongScore parse_song(std::istream& in)
{
    const auto raw = detail::parse_raw(in);
    SongScore s;
    auto key_it = raw.header.find("key");
    if (key_it == raw.header.end()) throw ParseError("missing header 'key'");
    auto key = parse_pitch_class(key_it->second);
    if (!key) throw ParseError("invalid key '" + key_it->second + "'");
    s.key = *key;
    s.length_bars = detail::header_int(raw, "bars", std::nullopt);
    s.ppqn = detail::header_int(raw, "ppqn", kDefaultPpqn);
    if (s.length_bars < 1) throw ParseError("bars must be >= 1");
    if (s.ppqn < 1) throw ParseError("ppqn must be >= 1");
    if (!raw.roles.empty()) throw ParseError("line " + std::to_string(raw.roles.front().first) + ": role lines belong in style files");
    for (const auto& [line, n] : raw.notes) {
        if (is_percussion(n.track))
            throw ParseError("line " + std::to_string(line) + ": percussion notes belong in style files");
        detail::validate_note(n, line, s.length_ticks());
        s.notes.push_back(n);
    }
    detail::validate_polyphony(s.notes);
    if (raw.header.contains("tracks") && detail::header_int(raw, "tracks", std::nullopt) != s.track_count())
        throw ParseError("header tracks=" + raw.header.at("tracks") + " but file has " + std::to_string(s.track_count()));
    return s;
}

inline StylePattern parse_style(std::istream& in)
{
    const auto raw = detail::parse_raw(in);
    StylePattern p;
    if (auto it = raw.header.find("name"); it != raw.header.end()) p.name = it->second;
    p.ppqn = detail::header_int(raw, "ppqn", kDefaultPpqn);
    if (p.ppqn < 1) throw ParseError("ppqn must be >= 1");
    if (detail::header_int(raw, "bars", kStyleBars) != kStyleBars) throw ParseError("style patterns are exactly 4 bars");
    for (const auto& [line, r] : raw.roles) p.roles.push_back(r);
    for (const auto& [line, n] : raw.notes) {
        detail::validate_note(n, line, p.length_ticks());
        p.notes.push_back(n);
    }
    detail::validate_polyphony(p.notes);
    return p;
}

inline SongScore load_song_file(const std::filesystem::path& path)
{
    auto in = detail::open_or_throw(path);
    return parse_song(in);
}

inline StylePattern load_style_file(const std::filesystem::path& path)
{
    auto in = detail::open_or_throw(path);
    auto p = parse_style(in);
    if (p.name == "default") p.name = path.stem().string();
    return p;
}

inline void write_score(std::ostream& out, const SongScore& s)
{
    out << "key=" << kPitchClassNames[static_cast<std::size_t>(s.key)] << '\n'
        << "bars=" << s.length_bars << '\n'
        << "ppqn=" << s.ppqn << '\n'
        << "tracks=" << s.track_count() << '\n';
    for (const auto& n : s.notes) detail::write_note(out, n);
}

inline void write_style(std::ostream& out, const StylePattern& p)
{
    out << "name=" << p.name << '\n' << "bars=" << kStyleBars << '\n' << "ppqn=" << p.ppqn << '\n';
    for (const auto& r : p.roles) out << "role=" << to_string(r.track) << ":variant=" << r.variant << '\n';
    for (const auto& n : p.notes) detail::write_note(out, n);
}

// Styles available at startup: every *.style file in a directory, by name.
inline std::map<std::string, StylePattern> scan_style_directory(const std::filesystem::path& dir)
{
    std::map<std::string, StylePattern> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".style") continue;
        auto p = load_style_file(entry.path());
        out.emplace(p.name, std::move(p));
    }
    return out;
}

}  // namespace mbf::seq
