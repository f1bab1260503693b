#pragma once

// Session state, its parameter registry and JSON persistence. One field
// visitor drives all three, so config files, control paths and the state
// struct cannot drift apart.

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "mbf/mapping/geometry.hpp"
#include "mbf/motion/pipeline.hpp"
#include "mbf/sequencer/sequencer.hpp"
#include "mbf/session/mode.hpp"
#include "mbf/synth/renderer.hpp"
#include "mbf/transport/udp.hpp"

namespace mbf::session {

MBF_DEFINE_ERROR(SchemaMismatch);
MBF_DEFINE_ERROR(ParseError);
MBF_DEFINE_ERROR(InvalidState);
MBF_DEFINE_ERROR(UnknownPath);
MBF_DEFINE_ERROR(TypeMismatch);
MBF_DEFINE_ERROR(ReadOnlyPath);

inline constexpr int kConfigSchemaVersion = 1;

enum class Axis { ml, ap };

struct ModeSettings {
    synth::Strategy strategy = synth::Strategy::music_dissonance;
    bool secondary_enabled = false;
    synth::Strategy secondary = synth::Strategy::pitch_skew;
    mapping::MappingConfig mapping{};
    double gate_threshold = 0.5;  // track_mute / music_stop
    int track_mask = 0xF0;        // track_mute: pitched tracks
    synth::CueKind cue = synth::CueKind::bell;
    bool operator==(const ModeSettings&) const = default;
};

struct SensorConfig {
    int port = 8001;
    transport::BodyLocation location = transport::BodyLocation::unassigned;
    Vec3 gyro_bias{};
    Vec3 acc_bias{};
    bool operator==(const SensorConfig&) const = default;
};

struct ReachSettings {
    Axis axis = Axis::ap;
    double range_lo = 0.0;
    double range_hi = 30.0;
    int n_degrees = 8;
    seq::Scale scale = seq::Scale::major;
    int root_octave = 5;
    double rep_threshold = 15.0;
    double rep_hysteresis = 5.0;
    bool operator==(const ReachSettings&) const = default;
};

struct StsSettings {
    double sit_threshold = 20.0;
    double stand_threshold = 30.0;
    double hysteresis = 2.0;
    bool operator==(const StsSettings&) const = default;
};

struct GaitSettings {
    double dead_zone_ms = 50.0;
    double hold_beats = 1.0;  // step-duration feedback holds this long
    int hit_velocity = 110;
    motion::StepDetectorConfig detector{};
    bool operator==(const GaitSettings&) const = default;
};

struct FilterSettings {
    motion::FilterSpec tilt{5, 5.0};
    motion::FilterSpec jerk{3, 8.0};
    double alpha = motion::kDefaultComplementaryAlpha;
    bool operator==(const FilterSettings&) const = default;
};

struct SessionState {
    int schema_version = kConfigSchemaVersion;
    Mode mode = Mode::static_balance;
    bool standby = false;
    double tempo = 120.0;
    std::string song = "demo";
    std::string style = "pop";
    std::array<ModeSettings, kModeCount> modes = default_modes();
    mapping::ZoneLayout zones{};
    mapping::Trajectory trajectory{};
    mapping::SigmoidFeedbackConfig sigmoid{};
    ReachSettings reach{};
    StsSettings sts{};
    GaitSettings gait{};
    FilterSettings filters{};
    std::array<SensorConfig, transport::kSlotCount> sensors{
        SensorConfig{8001, transport::BodyLocation::trunk, {}, {}},
        SensorConfig{8002, transport::BodyLocation::left_leg, {}, {}},
        SensorConfig{8003, transport::BodyLocation::right_leg, {}, {}}};
    synth::MixerSettings mixer = synth::MixerSettings::defaults();
    double offline_timeout_ms = transport::kDefaultOfflineTimeoutMs;
    double snapshot_rate_hz = 15.0;
    int control_port = 9000;
    int rep_count = 0;
    double progress = 0.0;

    bool operator==(const SessionState&) const = default;

    ModeSettings& current() { return modes[static_cast<std::size_t>(mode)]; }
    const ModeSettings& current() const { return modes[static_cast<std::size_t>(mode)]; }
    ModeSettings& settings(Mode m) { return modes[static_cast<std::size_t>(m)]; }
    const ModeSettings& settings(Mode m) const { return modes[static_cast<std::size_t>(m)]; }

    static std::array<ModeSettings, kModeCount> default_modes()
    {
        using synth::Strategy;
        std::array<ModeSettings, kModeCount> m{};
        auto at = [&](Mode k) -> ModeSettings& { return m[static_cast<std::size_t>(k)]; };
        at(Mode::static_balance).strategy = Strategy::music_dissonance;
        at(Mode::reach).strategy = Strategy::melody_degree;
        auto& trunk = at(Mode::trunk_control);
        trunk.strategy = Strategy::ambulance_siren;
        trunk.secondary_enabled = true;
        trunk.secondary = Strategy::pitch_skew;
        auto& sts = at(Mode::sts);
        sts.strategy = Strategy::disturbance_tone;
        sts.secondary_enabled = true;
        sts.secondary = Strategy::cue_artifact;
        sts.mapping = {0.0, 500.0, -1.0, 20000.0, 1.0, 0, false, false};
        auto& gd = at(Mode::gait_duration);
        gd.strategy = Strategy::pitch_skew;
        gd.mapping = {0.0, 0.0, -0.5, 0.5, 1.0, 0, false, true};
        at(Mode::gait_phase).strategy = Strategy::drum_trigger;
        return m;
    }
};

// ---------------------------------------------------------------------------
// Field visitor

struct FieldMeta {
    double lo = -1e300;
    double hi = 1e300;
    bool read_only = false;
};

inline std::span<const std::string_view> enum_names(Mode) { return kModeNames; }
inline std::span<const std::string_view> enum_names(synth::Strategy) { return synth::kStrategyNames; }
inline std::span<const std::string_view> enum_names(synth::CueKind)
{
    static constexpr std::array<std::string_view, 2> n{"bell", "sweep"};
    return n;
}
inline std::span<const std::string_view> enum_names(mapping::TrajectoryShape)
{
    static constexpr std::array<std::string_view, 5> n{"linear", "diagonal", "circular", "square", "rhombic"};
    return n;
}
inline std::span<const std::string_view> enum_names(transport::BodyLocation)
{
    static constexpr std::array<std::string_view, 4> n{"trunk", "left_leg", "right_leg", "unassigned"};
    return n;
}
inline std::span<const std::string_view> enum_names(Axis)
{
    static constexpr std::array<std::string_view, 2> n{"ml", "ap"};
    return n;
}
inline std::span<const std::string_view> enum_names(seq::Scale)
{
    static constexpr std::array<std::string_view, 3> n{"major", "minor_nat", "pentatonic"};
    return n;
}

template <typename T>
concept StateEnum = std::is_enum_v<T> && requires(T t) { enum_names(t); };

namespace detail {

inline std::string join(std::string_view a, std::string_view b)
{
    std::string s(a);
    s += '.';
    s += b;
    return s;
}

template <typename S, typename V>
void visit_mapping(S& m, const std::string& p, V& v)
{
    v(join(p, "target_lo"), m.target_lo, FieldMeta{});
    v(join(p, "target_hi"), m.target_hi, FieldMeta{});
    v(join(p, "bound_lo"), m.bound_lo, FieldMeta{});
    v(join(p, "bound_hi"), m.bound_hi, FieldMeta{});
    v(join(p, "gamma"), m.gamma, FieldMeta{0.01, 10.0});
    v(join(p, "quant_levels"), m.quant_levels, FieldMeta{0, 100});
    v(join(p, "invert"), m.invert, FieldMeta{});
    v(join(p, "directional"), m.directional, FieldMeta{});
}

template <typename S, typename V>
void visit_point(S& pt, const std::string& p, V& v, FieldMeta meta = {})
{
    v(join(p, "ml"), pt.ml, meta);
    v(join(p, "ap"), pt.ap, meta);
}

template <typename S, typename V>
void visit_vec3(S& x, const std::string& p, V& v)
{
    v(join(p, "x"), x.x, FieldMeta{});
    v(join(p, "y"), x.y, FieldMeta{});
    v(join(p, "z"), x.z, FieldMeta{});
}

template <typename S, typename V>
void visit_filter(S& f, const std::string& p, V& v)
{
    v(join(p, "median_len"), f.median_len, FieldMeta{1, motion::kMaxMedianLen});
    v(join(p, "lp_cutoff"), f.lp_cutoff, FieldMeta{0.1, 49.0});
}

template <typename S, typename V>
void visit_band(S& b, const std::string& p, V& v)
{
    v(join(p, "freq"), b.freq, FieldMeta{20.0, 20000.0});
    v(join(p, "gain_db"), b.gain_db, FieldMeta{-24.0, 24.0});
    v(join(p, "q"), b.q, FieldMeta{0.1, 20.0});
}

}  // namespace detail

// Calls v(path, field, meta) for every persisted field. S is SessionState or
// const SessionState.
template <typename S, typename V>
void visit_fields(S& s, V&& v)
{
    using detail::join;
    v(std::string("schema_version"), s.schema_version, FieldMeta{kConfigSchemaVersion, kConfigSchemaVersion, true});
    v(std::string("mode"), s.mode, FieldMeta{});
    v(std::string("standby"), s.standby, FieldMeta{});
    v(std::string("tempo"), s.tempo, FieldMeta{seq::kMinTempo, seq::kMaxTempo});
    v(std::string("song"), s.song, FieldMeta{});
    v(std::string("style"), s.style, FieldMeta{});
    for (std::size_t i = 0; i < kModeCount; ++i) {
        auto& m = s.modes[i];
        const std::string p = join("modes", kModeNames[i]);
        v(join(p, "strategy"), m.strategy, FieldMeta{});
        v(join(p, "secondary_enabled"), m.secondary_enabled, FieldMeta{});
        v(join(p, "secondary"), m.secondary, FieldMeta{});
        detail::visit_mapping(m.mapping, join(p, "mapping"), v);
        v(join(p, "gate_threshold"), m.gate_threshold, FieldMeta{0.0, 1.0});
        v(join(p, "track_mask"), m.track_mask, FieldMeta{0, 255});
        v(join(p, "cue"), m.cue, FieldMeta{});
    }
    detail::visit_point(s.zones.center, "zones.center", v, FieldMeta{-60.0, 60.0});
    for (std::size_t i = 0; i < s.zones.radii.size(); ++i)
        detail::visit_point(s.zones.radii[i], join("zones.radii", std::to_string(i)), v, FieldMeta{0.1, 60.0});
    v(std::string("zones.rect_ml_bound"), s.zones.rect_ml_bound, FieldMeta{0.1, 90.0});
    v(std::string("trajectory.shape"), s.trajectory.shape, FieldMeta{});
    detail::visit_point(s.trajectory.amp, "trajectory.amp", v, FieldMeta{0.1, 60.0});
    v(std::string("trajectory.tempo_divisor"), s.trajectory.tempo_divisor, FieldMeta{1, 64});
    detail::visit_point(s.trajectory.center, "trajectory.center", v, FieldMeta{-60.0, 60.0});
    v(std::string("sigmoid.lead_beats"), s.sigmoid.lead_beats, FieldMeta{0.0, 4.0});
    v(std::string("sigmoid.slope"), s.sigmoid.slope, FieldMeta{0.01, 100.0});
    v(std::string("sigmoid.dead_half_width"), s.sigmoid.dead_half_width, FieldMeta{0.0, 30.0});
    v(std::string("reach.axis"), s.reach.axis, FieldMeta{});
    v(std::string("reach.range_lo"), s.reach.range_lo, FieldMeta{-90.0, 90.0});
    v(std::string("reach.range_hi"), s.reach.range_hi, FieldMeta{-90.0, 90.0});
    v(std::string("reach.n_degrees"), s.reach.n_degrees, FieldMeta{2, 24});
    v(std::string("reach.scale"), s.reach.scale, FieldMeta{});
    v(std::string("reach.root_octave"), s.reach.root_octave, FieldMeta{1, 7});
    v(std::string("reach.rep_threshold"), s.reach.rep_threshold, FieldMeta{-90.0, 90.0});
    v(std::string("reach.rep_hysteresis"), s.reach.rep_hysteresis, FieldMeta{0.0, 45.0});
    v(std::string("sts.sit_threshold"), s.sts.sit_threshold, FieldMeta{-90.0, 90.0});
    v(std::string("sts.stand_threshold"), s.sts.stand_threshold, FieldMeta{-90.0, 90.0});
    v(std::string("sts.hysteresis"), s.sts.hysteresis, FieldMeta{0.0, 45.0});
    v(std::string("gait.dead_zone_ms"), s.gait.dead_zone_ms, FieldMeta{0.0, 1000.0});
    v(std::string("gait.hold_beats"), s.gait.hold_beats, FieldMeta{0.0, 8.0});
    v(std::string("gait.hit_velocity"), s.gait.hit_velocity, FieldMeta{1, 127});
    detail::visit_filter(s.gait.detector.filter, "gait.detector.filter", v);
    v(std::string("gait.detector.threshold_g"), s.gait.detector.threshold_g, FieldMeta{1.0, 8.0});
    v(std::string("gait.detector.refractory_ms"), s.gait.detector.refractory_ms, FieldMeta{0.0, 2000.0});
    detail::visit_filter(s.filters.tilt, "filters.tilt", v);
    detail::visit_filter(s.filters.jerk, "filters.jerk", v);
    v(std::string("filters.alpha"), s.filters.alpha, FieldMeta{0.0, 1.0});
    for (std::size_t i = 0; i < s.sensors.size(); ++i) {
        const std::string p = join("sensors", std::to_string(i));
        v(join(p, "port"), s.sensors[i].port, FieldMeta{0, 65535});
        v(join(p, "location"), s.sensors[i].location, FieldMeta{});
        detail::visit_vec3(s.sensors[i].gyro_bias, join(p, "gyro_bias"), v);
        detail::visit_vec3(s.sensors[i].acc_bias, join(p, "acc_bias"), v);
    }
    for (std::size_t i = 0; i < s.mixer.tracks.size(); ++i) {
        auto& t = s.mixer.tracks[i];
        const std::string p = join("mixer.tracks", seq::kTrackNames[i]);
        v(join(p, "gain_db"), t.gain_db, FieldMeta{-60.0, 12.0});
        v(join(p, "pan"), t.pan, FieldMeta{-1.0, 1.0});
        v(join(p, "comp.threshold_db"), t.comp.threshold_db, FieldMeta{-60.0, 0.0});
        v(join(p, "comp.ratio"), t.comp.ratio, FieldMeta{1.0, 40.0});
        v(join(p, "comp.attack_ms"), t.comp.attack_ms, FieldMeta{0.0, 500.0});
        v(join(p, "comp.release_ms"), t.comp.release_ms, FieldMeta{0.0, 5000.0});
        for (std::size_t b = 0; b < t.eq.size(); ++b)
            detail::visit_band(t.eq[b], join(join(p, "eq"), std::to_string(b)), v);
    }
    for (std::size_t b = 0; b < s.mixer.master_eq.size(); ++b)
        detail::visit_band(s.mixer.master_eq[b], join("mixer.master_eq", std::to_string(b)), v);
    v(std::string("mixer.limiter_ceiling"), s.mixer.limiter_ceiling, FieldMeta{0.1, 1.0});
    v(std::string("mixer.disturbance_freq"), s.mixer.disturbance_freq, FieldMeta{50.0, 20000.0});
    v(std::string("mixer.disturbance_max_db"), s.mixer.disturbance_max_db, FieldMeta{-60.0, 0.0});
    v(std::string("mixer.siren_lo"), s.mixer.siren_lo, FieldMeta{50.0, 5000.0});
    v(std::string("mixer.siren_hi"), s.mixer.siren_hi, FieldMeta{50.0, 5000.0});
    v(std::string("mixer.siren_rate"), s.mixer.siren_rate, FieldMeta{0.1, 20.0});
    v(std::string("mixer.siren_gain"), s.mixer.siren_gain, FieldMeta{0.0, 1.0});
    v(std::string("mixer.max_detune_cents"), s.mixer.max_detune_cents, FieldMeta{0.0, 200.0});
    v(std::string("mixer.max_skew_semitones"), s.mixer.max_skew_semitones, FieldMeta{0.0, 12.0});
    v(std::string("mixer.echo_beats"), s.mixer.echo_beats, FieldMeta{0.0, 2.0});
    v(std::string("mixer.echo_feedback"), s.mixer.echo_feedback, FieldMeta{0.0, 0.95});
    v(std::string("mixer.echo_mix"), s.mixer.echo_mix, FieldMeta{0.0, 1.0});
    v(std::string("mixer.solo_mask"), s.mixer.solo_mask, FieldMeta{0, 255});
    v(std::string("offline_timeout_ms"), s.offline_timeout_ms, FieldMeta{50.0, 10000.0});
    v(std::string("snapshot_rate_hz"), s.snapshot_rate_hz, FieldMeta{1.0, 60.0});
    v(std::string("control_port"), s.control_port, FieldMeta{0, 65535});
    v(std::string("rep_count"), s.rep_count, FieldMeta{0, 1e9, true});
    v(std::string("progress"), s.progress, FieldMeta{0.0, 1.0, true});
}

// Cross-field invariants; throws InvalidState.
inline void validate_state(const SessionState& s)
{
    try {
        if (s.schema_version != kConfigSchemaVersion) throw InvalidState("schema_version mismatch");
        if (!(s.tempo >= seq::kMinTempo && s.tempo <= seq::kMaxTempo)) throw InvalidState("tempo out of range");
        for (const auto& m : s.modes) m.mapping.validate();
        s.zones.validate();
        s.trajectory.validate();
        if (!(s.sigmoid.slope > 0.0 && s.sigmoid.dead_half_width >= 0.0)) throw InvalidState("bad sigmoid config");
        if (!(s.reach.range_lo < s.reach.range_hi)) throw InvalidState("reach range must be ascending");
        if (s.reach.n_degrees < 2) throw InvalidState("reach needs >= 2 degrees");
        s.filters.tilt.validate();
        s.filters.jerk.validate();
        s.gait.detector.filter.validate();
        s.mixer.validate();
        for (std::size_t i = 0; i < s.sensors.size(); ++i)
            for (std::size_t j = i + 1; j < s.sensors.size(); ++j)
                if (s.sensors[i].port != 0 && s.sensors[i].port == s.sensors[j].port)
                    throw InvalidState("sensor ports must be unique");
    } catch (const InvalidState&) {
        throw;
    } catch (const Error& e) {
        throw InvalidState(e.what());
    }
}

// ---------------------------------------------------------------------------
// Parameter registry

enum class ParamType { number, integer, boolean, string, enumeration };

inline std::string_view to_string(ParamType t)
{
    switch (t) {
    case ParamType::number: return "number";
    case ParamType::integer: return "integer";
    case ParamType::boolean: return "boolean";
    case ParamType::string: return "string";
    case ParamType::enumeration: return "enum";
    }
    return "number";
}

struct ParamInfo {
    std::string path;
    ParamType type = ParamType::number;
    FieldMeta meta;
    std::vector<std::string> options;  // enum names
};

template <typename T>
constexpr ParamType param_type_of()
{
    if constexpr (std::is_same_v<T, bool>) return ParamType::boolean;
    else if constexpr (std::is_same_v<T, std::string>) return ParamType::string;
    else if constexpr (std::is_enum_v<T>) return ParamType::enumeration;
    else if constexpr (std::is_integral_v<T>) return ParamType::integer;
    else return ParamType::number;
}

inline const std::vector<ParamInfo>& param_registry()
{
    static const std::vector<ParamInfo> reg = [] {
        std::vector<ParamInfo> out;
        const SessionState s;
        visit_fields(s, [&](const std::string& path, const auto& field, const FieldMeta& meta) {
            using T = std::decay_t<decltype(field)>;
            ParamInfo info{path, param_type_of<T>(), meta, {}};
            if constexpr (StateEnum<T>)
                for (auto n : enum_names(field)) info.options.emplace_back(n);
            out.push_back(std::move(info));
        });
        return out;
    }();
    return reg;
}

inline const ParamInfo* find_param(std::string_view path)
{
    for (const auto& p : param_registry())
        if (p.path == path) return &p;
    return nullptr;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json::json_pointer to_pointer(std::string_view path)
{
    std::string p = "/";
    for (char c : path) p += (c == '.') ? '/' : c;
    return nlohmann::json::json_pointer(p);
}

template <typename T>
nlohmann::json field_to_json(const T& v)
{
    if constexpr (StateEnum<T>) return std::string(enum_names(v)[static_cast<std::size_t>(v)]);
    else return v;
}

// Converts a JSON value to the field's type. Returns false on a type mismatch.
template <typename T>
bool field_from_json(const nlohmann::json& j, T& out)
{
    if constexpr (std::is_same_v<T, bool>) {
        if (!j.is_boolean()) return false;
        out = j.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!j.is_string()) return false;
        out = j.get<std::string>();
    } else if constexpr (StateEnum<T>) {
        if (!j.is_string()) return false;
        const auto names = enum_names(out);
        const auto s = j.get<std::string>();
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == s) {
                out = static_cast<T>(i);
                return true;
            }
        return false;
    } else if constexpr (std::is_integral_v<T>) {
        if (!j.is_number_integer() && !j.is_number_unsigned()) {
            if (!j.is_number_float()) return false;
            const double d = j.get<double>();
            if (d != std::floor(d)) return false;
            out = static_cast<T>(d);
            return true;
        }
        out = static_cast<T>(j.get<long long>());
    } else {
        if (!j.is_number()) return false;
        out = j.get<double>();
    }
    return true;
}

inline nlohmann::json state_to_json(const SessionState& s)
{
    nlohmann::json j = nlohmann::json::object();
    visit_fields(s, [&](const std::string& path, const auto& field, const FieldMeta&) {
        j[to_pointer(path)] = field_to_json(field);
    });
    return j;
}

struct LoadResult {
    SessionState state;
    std::vector<std::string> warnings;
};

namespace detail {

inline void collect_leaves(const nlohmann::json& j, const std::string& prefix, std::vector<std::string>& out)
{
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            collect_leaves(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i)
            collect_leaves(j[i], prefix + "." + std::to_string(i), out);
    } else {
        out.push_back(prefix);
    }
}

}  // namespace detail

// Missing fields keep defaults; unknown fields are ignored with a warning.
inline LoadResult state_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) throw SchemaMismatch("config root must be an object");
    if (!j.contains("schema_version")) throw SchemaMismatch("missing schema_version");
    if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kConfigSchemaVersion)
        throw SchemaMismatch("unsupported schema_version " + j["schema_version"].dump());
    LoadResult r;
    visit_fields(r.state, [&](const std::string& path, auto& field, const FieldMeta&) {
        const auto ptr = to_pointer(path);
        if (!j.contains(ptr)) return;
        if (!field_from_json(j.at(ptr), field))
            throw SchemaMismatch("field '" + path + "' has the wrong type or value: " + j.at(ptr).dump());
    });
    std::vector<std::string> leaves;
    detail::collect_leaves(j, "", leaves);
    for (const auto& l : leaves)
        if (!find_param(l)) r.warnings.push_back("unknown field '" + l + "' ignored");
    try {
        validate_state(r.state);
    } catch (const InvalidState& e) {
        throw SchemaMismatch(std::string("invalid config: ") + e.what());
    }
    return r;
}

inline void save_config(const SessionState& s, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << state_to_json(s).dump(2) << '\n';
    if (!out) throw ParseError("write failed: " + path.string());
}

inline LoadResult load_config_with_warnings(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return state_from_json(j);
}

// Warnings go to the optional sink.
inline SessionState load_config(const std::filesystem::path& path,
                                const std::function<void(const std::string&)>& warn = {})
{
    auto r = load_config_with_warnings(path);
    if (warn)
        for (const auto& w : r.warnings) warn(w);
    return std::move(r.state);
}

// ---------------------------------------------------------------------------
// Access by dotted path

// "mapping.gamma" and the other per-mode shorthands address the current mode.
inline std::string resolve_path(std::string_view path, Mode mode)
{
    static constexpr std::array<std::string_view, 6> kPerMode{"strategy", "secondary", "secondary_enabled",
                                                              "gate_threshold", "track_mask", "cue"};
    const std::string prefix = "modes." + std::string(kModeNames[static_cast<std::size_t>(mode)]) + ".";
    if (path.starts_with("mapping.")) return prefix + std::string(path);
    for (auto k : kPerMode)
        if (path == k) return prefix + std::string(path);
    return std::string(path);
}

struct SetOutcome {
    std::string path;        // resolved
    nlohmann::json applied;  // value after clamping
    std::string warning;     // empty when applied as given
};

// Writes one field. Numbers outside the parameter bounds are clamped with a
// warning. Throws UnknownPath, TypeMismatch or ReadOnlyPath; cross-field
// validation is left to the caller.
inline SetOutcome set_field(SessionState& s, std::string_view path, const nlohmann::json& value)
{
    SetOutcome out;
    out.path = resolve_path(path, s.mode);
    bool found = false;
    visit_fields(s, [&](const std::string& p, auto& field, const FieldMeta& meta) {
        if (found || p != out.path) return;
        found = true;
        using T = std::decay_t<decltype(field)>;
        if (meta.read_only) throw ReadOnlyPath("'" + p + "' is read-only");
        T v = field;
        nlohmann::json in = value;
        if constexpr (std::is_arithmetic_v<T> && !std::is_same_v<T, bool>) {
            if (in.is_number()) {
                const double d = in.get<double>();
                if (!std::isfinite(d)) throw TypeMismatch("'" + p + "' needs a finite number");
                const double c = std::clamp(d, meta.lo, meta.hi);
                if (c != d) {
                    out.warning = fmt::format("{} = {} is outside [{}, {}]; clamped to {}", p, d, meta.lo, meta.hi, c);
                    in = c;
                }
            }
        }
        if (!field_from_json(in, v))
            throw TypeMismatch("'" + p + "' expects " + std::string(to_string(param_type_of<T>())) + ", got " +
                               value.dump());
        field = v;
        out.applied = field_to_json(field);
    });
    if (!found) throw UnknownPath("no parameter '" + std::string(path) + "'");
    return out;
}

inline nlohmann::json get_field(const SessionState& s, std::string_view path)
{
    const std::string resolved = resolve_path(path, s.mode);
    std::optional<nlohmann::json> out;
    visit_fields(s, [&](const std::string& p, const auto& field, const FieldMeta&) {
        if (!out && p == resolved) out = field_to_json(field);
    });
    if (!out) throw UnknownPath("no parameter '" + std::string(path) + "'");
    return *out;
}

inline nlohmann::json registry_to_json()
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : param_registry()) {
        nlohmann::json j{{"path", p.path}, {"type", to_string(p.type)}, {"read_only", p.meta.read_only}};
        if (p.type == ParamType::number || p.type == ParamType::integer) {
            if (p.meta.lo > -1e299) j["min"] = p.meta.lo;
            if (p.meta.hi < 1e299) j["max"] = p.meta.hi;
        }
        if (!p.options.empty()) j["options"] = p.options;
        arr.push_back(std::move(j));
    }
    return arr;
}

}  // namespace mbf::session
