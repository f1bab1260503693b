// engine: run the biofeedback engine in real time, render a motion profile
// offline, measure the loop delay, or write a default config.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mbf/control/server.hpp"
#include "mbf/session/loop_delay.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

using namespace mbf;

session::SessionState load_state(const std::string& config)
{
    if (config.empty()) return {};
    return session::load_config(config, [](const std::string& w) { fmt::print(stderr, "config: {}\n", w); });
}

std::shared_ptr<const session::MusicLibrary> load_library(const std::string& data)
{
    const std::filesystem::path dir = data.empty() ? session::default_data_dir() : std::filesystem::path(data);
    return std::make_shared<const session::MusicLibrary>(session::MusicLibrary::load(dir));
}

struct RunArgs {
    std::string config, render_out, log, data, web_root, mutation_log, host = "127.0.0.1";
    bool headless = false;
    double duration = 0.0;
    int port = -1;
};

int cmd_run(const RunArgs& a)
{
    auto state = load_state(a.config);
    if (a.port >= 0) state.control_port = a.port;
    session::RealtimeOptions ro;
    if (!a.log.empty()) ro.log_path = a.log;
    if (!a.render_out.empty()) ro.wav_path = a.render_out;
    auto engine = std::make_unique<session::RealtimeEngine>(state, load_library(a.data), ro);

    std::unique_ptr<control::MutationLog> mlog;
    if (!a.mutation_log.empty()) mlog = std::make_unique<control::MutationLog>(a.mutation_log);
    std::unique_ptr<control::ControlServer> server;
    engine->start();
    if (!a.headless) {
        server = std::make_unique<control::ControlServer>(
            *engine, control::ServerOptions{a.host, state.control_port, a.web_root, mlog.get()});
        server->start();
        fmt::print("control: ws://{}:{}/  log: http://{}:{}/log.csv\n", a.host, server->port(), a.host, server->port());
    }
    fmt::print("sensors: udp ports {} {} {}\n", engine->sensor_port(0), engine->sensor_port(1), engine->sensor_port(2));
    std::fflush(stdout);

    const auto t0 = std::chrono::steady_clock::now();
    while (!g_stop.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        if (a.duration > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= a.duration)
            break;
    }
    if (server) server->stop();
    engine->stop();
    const auto live = engine->live();
    fmt::print("frames {}  missed ticks {}  late ticks {}  max lateness {:.2f} ms  log rows {}  freeze events {}\n",
               live.sched.frames, live.sched.missed_ticks, live.sched.late_ticks, live.sched.max_lateness_ms,
               live.counters.log_rows, live.counters.freeze_events);
    return 0;
}

struct RenderArgs {
    std::string config, profile, render_out, log, data;
    double duration = 0.0;
    double drop = 0.0;
};

int cmd_render(const RenderArgs& a)
{
    const auto state = load_state(a.config);
    const auto gen = sim::generate_profile(sim::load_profile(a.profile));
    session::EngineCore core(state, load_library(a.data));
    std::unique_ptr<session::LogWriter> log;
    if (!a.log.empty()) {
        log = std::make_unique<session::LogWriter>(a.log);
        core.set_log_writer(log.get());
    }
    std::unique_ptr<synth::WavWriter> wav;
    if (!a.render_out.empty()) wav = std::make_unique<synth::WavWriter>(a.render_out);
    session::OfflineOptions opt;
    opt.duration_ms = a.duration * 1000.0;
    opt.drop_fraction = a.drop;
    opt.render = wav != nullptr;
    opt.on_block = [&](const synth::AudioBlock& b, const synth::BlockSnapshot&) { wav->write(b); };
    const auto res = session::run_offline(core, gen.frames, opt);
    if (wav) wav->close();
    if (log) log->close();
    const double audio_ms = static_cast<double>(res.frames) * session::kFrameMs;
    fmt::print("rendered {:.2f} s in {:.3f} s ({:.1f}x real time), {} datagrams, {} dropped, reps {}\n",
               audio_ms / 1000.0, res.wall_ms / 1000.0, audio_ms / std::max(res.wall_ms, 1e-9), res.datagrams,
               res.dropped, core.state().rep_count);
    return 0;
}

int cmd_loop_delay(int trials, const std::string& data)
{
    const auto r = session::measure_loop_delay(trials, load_library(data));
    fmt::print("trials {}  detected {}  mean {:.1f} ms  std {:.1f} ms  min {:.1f}  max {:.1f}  missed ticks {}  "
               "wall {:.1f} s\n",
               r.trials, r.detected, r.mean_ms, r.std_ms, r.min_ms, r.max_ms, r.missed_ticks, r.wall_s);
    return r.detected == r.trials ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Musical biofeedback engine"};
    app.require_subcommand(1);

    RunArgs run;
    auto* sc_run = app.add_subcommand("run", "Run in real time with UDP sensors and the control server");
    sc_run->add_option("--config", run.config, "Session config (JSON)");
    sc_run->add_option("--render-out", run.render_out, "Write the audio output to a WAV file");
    sc_run->add_option("--log", run.log, "Write the 100 Hz session log (CSV)");
    sc_run->add_flag("--headless", run.headless, "No control server");
    sc_run->add_option("--duration", run.duration, "Stop after this many seconds (0 = until SIGINT)");
    sc_run->add_option("--data", run.data, "Directory with songs/ and styles/");
    sc_run->add_option("--web-root", run.web_root, "Serve static console files from here");
    sc_run->add_option("--port", run.port, "Control port (overrides the config)");
    sc_run->add_option("--host", run.host, "Control server address");
    sc_run->add_option("--mutation-log", run.mutation_log, "Append every control mutation to this file");

    RenderArgs render;
    auto* sc_render = app.add_subcommand("render", "Render a motion profile offline (simulated time)");
    sc_render->add_option("--config", render.config, "Session config (JSON)");
    sc_render->add_option("--profile", render.profile, "Motion profile (JSON)")->required();
    sc_render->add_option("--render-out", render.render_out, "WAV output");
    sc_render->add_option("--log", render.log, "CSV log output");
    sc_render->add_option("--duration", render.duration, "Seconds (0 = profile length)");
    sc_render->add_option("--drop", render.drop, "Simulated datagram loss fraction");
    sc_render->add_option("--data", render.data, "Directory with songs/ and styles/");

    int trials = 30;
    std::string ld_data;
    auto* sc_ld = app.add_subcommand("loop-delay", "Measure the movement-to-sound delay over UDP loopback");
    sc_ld->add_option("--trials", trials, "Number of step changes");
    sc_ld->add_option("--data", ld_data, "Directory with songs/ and styles/");

    std::string cfg_out;
    auto* sc_cfg = app.add_subcommand("default-config", "Write the default session config");
    sc_cfg->add_option("file", cfg_out, "Output path")->required();

    CLI11_PARSE(app, argc, argv);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    try {
        if (*sc_run) return cmd_run(run);
        if (*sc_render) return cmd_render(render);
        if (*sc_ld) return cmd_loop_delay(trials, ld_data);
        if (*sc_cfg) {
            session::save_config(session::SessionState{}, cfg_out);
            return 0;
        }
    } catch (const mbf::Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
