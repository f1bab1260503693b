// sensor-sim: stream a synthetic or replayed motion profile as OSC over UDP,
// one port per sensor slot.

#include <atomic>
#include <csignal>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mbf/sim/stream.hpp"

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop.store(true); }
}  // namespace

int main(int argc, char** argv)
{
    using namespace mbf;
    CLI::App app{"Sensor simulator"};
    std::string profile_path;
    sim::StreamOptions opt;
    int port = 8001;
    std::vector<int> ports;
    bool truth = false;
    app.add_option("--profile", profile_path, "Motion profile (JSON)")->required();
    app.add_option("--port", port, "UDP port of slot 1; slots 2 and 3 use the next two ports");
    app.add_option("--ports", ports, "Explicit port per slot (trunk left right)")->expected(3);
    app.add_option("--host", opt.host, "Destination address");
    app.add_option("--rate-scale", opt.rate_scale, "Playback speed factor");
    app.add_option("--drop", opt.drop_fraction, "Fraction of datagrams withheld")->check(CLI::Range(0.0, 0.999));
    app.add_option("--seed", opt.seed, "Seed for the drop pattern");
    app.add_flag("--truth", truth, "Print the ground-truth events before streaming");
    CLI11_PARSE(app, argc, argv);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    try {
        const auto gen = sim::generate_profile(sim::load_profile(profile_path));
        for (std::size_t s = 0; s < sim::kSlots; ++s)
            opt.ports[s] = ports.empty() ? port + static_cast<int>(s) : ports[s];
        opt.stop = &g_stop;
        if (truth) {
            for (const auto& f : gen.truth.footfalls) fmt::print("footfall {} {:.1f}\n", motion::to_string(f.foot), f.t);
            for (double t : gen.truth.crossings) fmt::print("crossing {:.1f}\n", t);
            for (double t : gen.truth.onsets) fmt::print("onset {:.1f}\n", t);
            fmt::print("repetitions {}\n", gen.truth.repetitions);
        }
        const auto st = sim::stream_profile(gen.frames, opt);
        fmt::print("sent {} datagrams, dropped {}, {:.3f} s\n", st.sent, st.dropped, st.wall_ms / 1000.0);
    } catch (const mbf::Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
