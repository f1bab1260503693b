#pragma once

// JSON control protocol, one object per WebSocket message.
//
// request  {"v":1, "id":"42", "kind":"set_param", "path":"mapping.gamma", "value":2.0}
// reply    {"v":1, "id":"42", "kind":"set_param", "ok":true, "path":"modes.static_balance.mapping.gamma",
//           "value":2.0}                      plus "warning" when the value was clamped
// error    {"v":1, "id":"42", "ok":false, "error":"UnknownPath", "message":"..."}
// push     {"v":1, "kind":"snapshot", ...}    at the configured snapshot rate

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>

#include <fmt/format.h>
#include <json.hpp>

#include "mbf/session/realtime.hpp"

namespace mbf::control {

using nlohmann::json;

MBF_DEFINE_ERROR(BadMessage);

inline constexpr int kProtocolVersion = 1;

// Every mutation request with its request id and outcome, one line each.
class MutationLog {
public:
    MutationLog() = default;
    explicit MutationLog(const std::filesystem::path& path) : out_(path, std::ios::app)
    {
        if (!out_) throw BadMessage("cannot open mutation log " + path.string());
    }

    void record(std::string_view id, std::string_view kind, std::string_view path, const json& value,
                std::string_view outcome)
    {
        std::lock_guard lk(m_);
        auto line = fmt::format("{:.3f} id={} kind={} path={} value={} {}\n", monotonic_now_ms(), id, kind,
                                path.empty() ? "-" : path, value.dump(), outcome);
        lines_.push_back(line);
        if (out_.is_open()) out_ << line << std::flush;
    }

    std::vector<std::string> lines() const
    {
        std::lock_guard lk(m_);
        return lines_;
    }

private:
    mutable std::mutex m_;
    std::ofstream out_;
    std::vector<std::string> lines_;
};

inline std::string_view to_string(session::CalibrationStatus s)
{
    switch (s) {
    case session::CalibrationStatus::idle: return "idle";
    case session::CalibrationStatus::running: return "running";
    case session::CalibrationStatus::done: return "done";
    case session::CalibrationStatus::failed: return "failed";
    }
    return "idle";
}

// Full state plus the latest movement data.
inline json make_snapshot(const session::RealtimeEngine& engine)
{
    const auto state = engine.state_snapshot();
    const auto live = engine.live();
    const auto& t = live.telemetry;
    json j{{"v", kProtocolVersion}, {"kind", "snapshot"}, {"t_ms", t.t}};
    j["state"] = session::state_to_json(*state);
    j["state"]["rep_count"] = t.rep_count;
    j["state"]["progress"] = t.progress;
    j["state"]["mode"] = std::string(session::to_string(t.mode));
    j["state"]["standby"] = t.standby;
    j["movement"] = {{"tilt_ml", t.tilt_ml}, {"tilt_ap", t.tilt_ap}, {"pos_ml", t.pos.ml},
                     {"pos_ap", t.pos.ap},   {"zone", t.zone},       {"jerk_sq", t.jerk_sq},
                     {"flexion", t.flexion}, {"target_ml", t.target.ml}, {"target_ap", t.target.ap}};
    j["fv"] = t.fv;
    j["fv2"] = t.fv2;
    j["rep_count"] = t.rep_count;
    j["progress"] = t.progress;
    j["playing"] = t.playing;
    j["tempo"] = t.tempo;
    j["beat"] = t.beat;
    j["sensors"] = json::array();
    for (std::size_t s = 0; s < t.online.size(); ++s)
        j["sensors"].push_back({{"slot", s + 1},
                                {"location", session::field_to_json(state->sensors[s].location)},
                                {"online", t.online[s]}});
    j["calibration"] = std::string(to_string(live.calibration));
    j["counters"] = {{"mbf_ticks", live.counters.mbf_ticks},
                     {"missed_ticks", live.sched.missed_ticks},
                     {"late_ticks", live.sched.late_ticks},
                     {"max_lateness_ms", live.sched.max_lateness_ms},
                     {"stale_samples", live.counters.stale_samples},
                     {"freeze_events", live.counters.freeze_events},
                     {"log_rows", live.counters.log_rows}};
    return j;
}

namespace detail {

inline json error_reply(const json& id, std::string_view code, std::string_view message)
{
    return {{"v", kProtocolVersion}, {"id", id}, {"ok", false}, {"error", code}, {"message", message}};
}

inline session::CommandKind mutation_kind(std::string_view kind)
{
    if (kind == "set_param") return session::CommandKind::set_param;
    if (kind == "set_mode") return session::CommandKind::set_mode;
    if (kind == "transport") return session::CommandKind::transport;
    if (kind == "standby") return session::CommandKind::standby;
    if (kind == "calibrate") return session::CommandKind::calibrate;
    throw BadMessage("unknown kind '" + std::string(kind) + "'");
}

}  // namespace detail

// Handles one request on an IO thread. Mutations are queued for the engine's
// scheduler and the reply waits for them to be applied.
inline json handle_control_message(session::RealtimeEngine& engine, const json& msg, MutationLog* log = nullptr)
{
    const json id = msg.is_object() && msg.contains("id") ? msg["id"] : json(nullptr);
    try {
        if (!msg.is_object()) throw BadMessage("message must be a JSON object");
        if (msg.contains("v") && msg["v"] != kProtocolVersion)
            throw BadMessage("unsupported protocol version " + msg["v"].dump());
        if (!msg.contains("kind") || !msg["kind"].is_string()) throw BadMessage("missing 'kind'");
        const std::string kind = msg["kind"].get<std::string>();
        const std::string path = msg.contains("path") && msg["path"].is_string() ? msg["path"].get<std::string>() : "";
        const json value = msg.contains("value") ? msg["value"] : json(nullptr);
        json reply{{"v", kProtocolVersion}, {"id", id}, {"kind", kind}, {"ok", true}};

        if (!engine.running()) throw session::EngineStopped("engine is not running");

        if (kind == "snapshot_request") {
            reply["snapshot"] = make_snapshot(engine);
            reply["registry"] = session::registry_to_json();
            return reply;
        }
        if (kind == "get_param") {
            if (path.empty()) throw BadMessage("get_param needs 'path'");
            engine.sync();
            const auto state = engine.state_snapshot();
            reply["path"] = session::resolve_path(path, state->mode);
            reply["value"] = session::get_field(*state, path);
            return reply;
        }

        const auto ck = detail::mutation_kind(kind);
        if (ck == session::CommandKind::set_param) {
            if (path.empty()) throw BadMessage("set_param needs 'path'");
            // Reject unknown paths and wrong types here, on the IO thread.
            auto probe = *engine.state_snapshot();
            session::set_field(probe, path, value);
        }
        const auto seq = engine.submit({0, ck, path, value});
        const auto result = engine.wait_applied(seq);
        if (!result) throw session::EngineStopped("engine did not apply the request");
        const std::string rid = id.is_string() ? id.get<std::string>() : id.dump();
        if (!result->ok) {
            if (log) log->record(rid, kind, path, value, "rejected " + result->error);
            return detail::error_reply(id, result->error, result->message);
        }
        if (ck == session::CommandKind::set_param) reply["path"] = session::resolve_path(path, engine.state_snapshot()->mode);
        reply["value"] = result->applied;
        if (!result->warning.empty()) reply["warning"] = result->warning;
        if (log) log->record(rid, kind, path, result->applied, result->warning.empty() ? "applied" : "clamped");
        return reply;
    } catch (const Error& e) {
        if (log && msg.is_object() && msg.contains("kind") && msg["kind"] != "get_param" && msg["kind"] != "snapshot_request")
            log->record(id.is_string() ? id.get<std::string>() : id.dump(), msg["kind"].is_string() ? msg["kind"].get<std::string>() : "?",
                        msg.contains("path") && msg["path"].is_string() ? msg["path"].get<std::string>() : "",
                        msg.contains("value") ? msg["value"] : json(nullptr), "rejected " + e.code());
        return detail::error_reply(id, e.code(), e.what());
    } catch (const json::exception& e) {
        return detail::error_reply(id, "BadMessage", e.what());
    }
}

inline std::string handle_control_text(session::RealtimeEngine& engine, std::string_view text, MutationLog* log = nullptr)
{
    json msg;
    try {
        msg = json::parse(text);
    } catch (const json::parse_error& e) {
        return detail::error_reply(nullptr, "BadMessage", e.what()).dump();
    }
    return handle_control_message(engine, msg, log).dump();
}

}  // namespace mbf::control
