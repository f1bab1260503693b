#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "mbf/session/state.hpp"

using namespace mbf;
using namespace mbf::session;
using nlohmann::json;

namespace {

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("defaults are valid and round-trip through a file")
{
    SessionState s;
    REQUIRE_NOTHROW(validate_state(s));
    s.mode = Mode::gait_phase;
    s.tempo = 96.5;
    s.style = "slow_rock";
    s.settings(Mode::reach).mapping.gamma = 2.5;
    s.zones.center = {1.5, -2.25};
    s.sensors[1].gyro_bias = {0.1, -0.2, 0.3};
    s.mixer.tracks[2].eq[1].gain_db = -4.0;
    const auto path = temp_file("mbf_state_roundtrip.json");
    save_config(s, path);
    std::vector<std::string> warnings;
    const auto back = load_config(path, [&](const std::string& w) { warnings.push_back(w); });
    REQUIRE(back == s);
    REQUIRE(warnings.empty());
    std::filesystem::remove(path);
}

TEST_CASE("random field edits survive serialization")
{
    std::mt19937 rng(5);
    const auto& reg = param_registry();
    for (int trial = 0; trial < 200; ++trial) {
        SessionState s;
        const auto& p = reg[rng() % reg.size()];
        if (p.meta.read_only || p.type != ParamType::number) continue;
        const double lo = std::max(p.meta.lo, -1e3), hi = std::min(p.meta.hi, 1e3);
        try {
            set_field(s, p.path, lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng));
            validate_state(s);
        } catch (const InvalidState&) {
            continue;  // cross-field constraint
        } catch (const Error&) {
            continue;
        }
        REQUIRE(state_from_json(state_to_json(s)).state == s);
    }
}

TEST_CASE("unknown fields are ignored with a warning")
{
    json j = state_to_json(SessionState{});
    j["colour"] = "blue";
    j["mixer"]["wobble"] = 3;
    const auto r = state_from_json(j);
    REQUIRE(r.state == SessionState{});
    REQUIRE(r.warnings.size() == 2);
}

TEST_CASE("missing fields keep their defaults")
{
    const auto r = state_from_json(json{{"schema_version", 1}, {"tempo", 80.0}});
    SessionState expect;
    expect.tempo = 80.0;
    REQUIRE(r.state == expect);
}

TEST_CASE("schema mismatches")
{
    REQUIRE_THROWS_AS(state_from_json(json{{"tempo", 80.0}}), SchemaMismatch);
    REQUIRE_THROWS_AS(state_from_json(json{{"schema_version", 2}}), SchemaMismatch);
    REQUIRE_THROWS_AS(state_from_json(json::array()), SchemaMismatch);
    REQUIRE_THROWS_AS(state_from_json(json{{"schema_version", 1}, {"tempo", "fast"}}), SchemaMismatch);
    REQUIRE_THROWS_AS(state_from_json(json{{"schema_version", 1}, {"mode", "juggling"}}), SchemaMismatch);
    // Cross-field violation.
    json j{{"schema_version", 1}};
    j["modes"]["reach"]["mapping"]["target_lo"] = 5.0;
    j["modes"]["reach"]["mapping"]["target_hi"] = 1.0;
    REQUIRE_THROWS_AS(state_from_json(j), SchemaMismatch);

    const auto bad = temp_file("mbf_state_bad.json");
    std::ofstream(bad) << "{ not json";
    REQUIRE_THROWS_AS(load_config(bad), ParseError);
    std::filesystem::remove(bad);
    REQUIRE_THROWS_AS(load_config(temp_file("mbf_state_missing.json")), ParseError);
}

TEST_CASE("set and get by path")
{
    SessionState s;
    s.mode = Mode::reach;
    SECTION("per-mode shorthand addresses the current mode")
    {
        const auto out = set_field(s, "mapping.gamma", 2.5);
        REQUIRE(out.path == "modes.reach.mapping.gamma");
        REQUIRE(out.applied == 2.5);
        REQUIRE(out.warning.empty());
        REQUIRE(s.settings(Mode::reach).mapping.gamma == 2.5);
        REQUIRE(s.settings(Mode::static_balance).mapping.gamma == 1.0);
        REQUIRE(get_field(s, "mapping.gamma") == 2.5);
        set_field(s, "strategy", "music_stop");
        REQUIRE(s.current().strategy == synth::Strategy::music_stop);
    }
    SECTION("out of range numbers are clamped with a warning")
    {
        const auto out = set_field(s, "tempo", 999);
        REQUIRE(out.applied == seq::kMaxTempo);
        REQUIRE(s.tempo == seq::kMaxTempo);
        REQUIRE_FALSE(out.warning.empty());
        REQUIRE(set_field(s, "tempo", 1).applied == seq::kMinTempo);
    }
    SECTION("errors")
    {
        const SessionState before = s;
        REQUIRE_THROWS_AS(set_field(s, "foo.bar", 1), UnknownPath);
        REQUIRE_THROWS_AS(get_field(s, "foo.bar"), UnknownPath);
        REQUIRE_THROWS_AS(set_field(s, "tempo", "fast"), TypeMismatch);
        REQUIRE_THROWS_AS(set_field(s, "standby", 1), TypeMismatch);
        REQUIRE_THROWS_AS(set_field(s, "mode", "juggling"), TypeMismatch);
        REQUIRE_THROWS_AS(set_field(s, "reach.n_degrees", 2.5), TypeMismatch);
        REQUIRE_THROWS_AS(set_field(s, "tempo", std::nan("")), TypeMismatch);
        REQUIRE_THROWS_AS(set_field(s, "rep_count", 3), ReadOnlyPath);
        REQUIRE_THROWS_AS(set_field(s, "schema_version", 1), ReadOnlyPath);
        REQUIRE(s == before);
    }
}

TEST_CASE("every registered path is readable and typed")
{
    const SessionState s;
    const auto reg = registry_to_json();
    REQUIRE(reg.size() == param_registry().size());
    for (const auto& p : param_registry()) {
        const auto v = get_field(s, p.path);
        switch (p.type) {
        case ParamType::boolean: REQUIRE(v.is_boolean()); break;
        case ParamType::string:
        case ParamType::enumeration: REQUIRE(v.is_string()); break;
        default: REQUIRE(v.is_number()); break;
        }
        if (p.type == ParamType::enumeration)
            REQUIRE(std::find(p.options.begin(), p.options.end(), v.get<std::string>()) != p.options.end());
    }
}

TEST_CASE("duplicate sensor ports are invalid")
{
    SessionState s;
    s.sensors[2].port = s.sensors[0].port;
    REQUIRE_THROWS_AS(validate_state(s), InvalidState);
}
