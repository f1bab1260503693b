// acceptance: runs every end-to-end acceptance check at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit status is nonzero if any
// check fails.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <unistd.h>
#include <random>
#include <set>

#include <CLI11.hpp>
#include <fftw3.h>
#include <fmt/format.h>

#include "mbf/session/loop_delay.hpp"

namespace {

using namespace mbf;
using namespace mbf::session;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::shared_ptr<const MusicLibrary> g_library;

std::filesystem::path scratch(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("mbf_acceptance_" + name);
}

SessionState ephemeral_ports(SessionState s)
{
    for (auto& c : s.sensors) c.port = 0;
    return s;
}

// Hypervisor steal time so far, in ms, or -1 when /proc/stat is unavailable.
// Reported next to the real-time results: a stolen vCPU delays every thread.
double steal_ms()
{
    std::ifstream in("/proc/stat");
    std::string cpu;
    std::array<double, 8> f{};
    if (!(in >> cpu) || cpu != "cpu") return -1.0;
    for (auto& v : f)
        if (!(in >> v)) return -1.0;
    return f[7] * 1000.0 / static_cast<double>(sysconf(_SC_CLK_TCK));
}

// ---------------------------------------------------------------------------

Outcome loop_delay()
{
    const auto r = measure_loop_delay(30, g_library);
    const bool pass = r.detected == r.trials && r.trials == 30 && r.mean_ms <= 100.0 && r.wall_s < 120.0;
    return {pass, fmt::format("{}/{} detected, mean {:.1f} ms (sd {:.1f}, min {:.1f}, max {:.1f}), limit 100 ms; "
                              "runtime {:.1f} s, limit 120 s; budget {:.0f} ms, reference 90 ms",
                              r.detected, r.trials, r.mean_ms, r.std_ms, r.min_ms, r.max_ms, r.wall_s,
                              kLoopBudgetMs)};
}

Outcome real_time_factor()
{
    SessionState st;
    st.mode = Mode::trunk_control;
    st.style = "slow_rock";
    st.tempo = 60.0;
    EngineCore e(st, g_library);
    const auto log = scratch("rtf.csv");
    LogWriter writer(log);
    e.set_log_writer(&writer);
    sim::MotionProfile p;
    p.sway_amp = 8.0;
    p.sway_freq = 0.2;
    p.acc_noise = 0.01;
    p.gyro_noise = 0.3;
    p.duration = 60.0;
    const auto g = sim::generate_profile(p);
    std::uint64_t nonsilent = 0;
    OfflineOptions opt;
    opt.on_block = [&](const synth::AudioBlock& b, const synth::BlockSnapshot&) { nonsilent += !b.silent(); };
    const auto r = run_offline(e, g.frames, opt);
    writer.close();
    std::filesystem::remove(log);
    const double audio_ms = static_cast<double>(r.frames) * kFrameMs;
    const double rtf = audio_ms / r.wall_ms;
    return {rtf >= 3.0 && nonsilent > 0 && e.counters().log_rows == static_cast<std::uint64_t>(r.frames),
            fmt::format("{:.1f} s rendered in {:.2f} s: {:.1f}x real time, limit 3x", audio_ms / 1000.0,
                        r.wall_ms / 1000.0, rtf)};
}

// Brute-force evaluator written from the definition: distance from the
// target interval over the width of the band on that side, raised to gamma,
// snapped to the nearest grid level, folded around 0.5 when directional.
double oracle_fv(double x, const mapping::MappingConfig& c)
{
    double err;
    if (x >= c.target_lo && x <= c.target_hi) err = 0.0;
    else {
        const bool above = x > c.target_hi;
        const double dist = above ? x - c.target_hi : c.target_lo - x;
        const double band = above ? c.bound_hi - c.target_hi : c.target_lo - c.bound_lo;
        err = std::min(1.0, dist / band);
    }
    double v = std::pow(err, c.gamma);
    if (c.quant_levels > 0) v = std::floor(v * c.quant_levels + 0.5) / c.quant_levels;
    if (c.directional) {
        const double mid = (c.target_lo + c.target_hi) / 2.0;
        if (x > mid) v = 0.5 + v / 2.0;
        else if (x < mid) v = 0.5 - v / 2.0;
        else v = 0.5;
    }
    if (c.invert) v = 1.0 - v;
    return std::max(0.0, std::min(1.0, v));
}

Outcome mapping_oracle()
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-100.0, 100.0), w(0.0, 30.0), g(0.05, 5.0);
    double worst = 0.0;
    int n = 0;
    for (; n < 100000; ++n) {
        mapping::MappingConfig c;
        c.target_lo = u(rng);
        c.target_hi = c.target_lo + (n % 7 == 0 ? 0.0 : w(rng));
        c.bound_lo = c.target_lo - 0.01 - w(rng);
        c.bound_hi = c.target_hi + 0.01 + w(rng);
        c.gamma = n % 5 == 0 ? 1.0 : g(rng);
        c.quant_levels = n % 3 == 0 ? 1 + static_cast<int>(rng() % 12) : 0;
        c.invert = rng() % 2;
        c.directional = rng() % 2;
        const double x = c.target_lo - 40.0 + 80.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        worst = std::max(worst, std::abs(mapping::map_feedback_variable(x, c).value - oracle_fv(x, c)));
    }
    // Exact cases with gamma = 1 on the default range [-2, 2] in [-20, 20].
    const mapping::MappingConfig d;
    bool exact = true;
    for (double x : {-2.0, 0.0, 1.5, 2.0}) exact = exact && mapping::map_feedback_variable(x, d).value == 0.0;
    exact = exact && mapping::map_feedback_variable(11.0, d).value == 0.5;
    exact = exact && mapping::map_feedback_variable(-11.0, d).value == 0.5;
    exact = exact && mapping::map_feedback_variable(20.0, d).value == 1.0;
    exact = exact && mapping::map_feedback_variable(-25.0, d).value == 1.0;
    return {worst <= 1e-9 && exact,
            fmt::format("{} pairs, max |diff| {:.2e}, limit 1e-9; gamma=1 exact cases {}", n, worst, exact ? "ok" : "wrong")};
}

int polar_zone(Point2 p, const mapping::ZoneLayout& l)
{
    const double x = p.ml - l.center.ml, y = p.ap - l.center.ap;
    if (x > l.rect_ml_bound) return mapping::kZoneRight;
    if (x < -l.rect_ml_bound) return mapping::kZoneLeft;
    const double r = std::hypot(x, y), phi = std::atan2(y, x);
    for (int i = 0; i < 3; ++i) {
        const double a = l.radii[static_cast<std::size_t>(i)].ml, b = l.radii[static_cast<std::size_t>(i)].ap;
        if (r <= a * b / std::hypot(b * std::cos(phi), a * std::sin(phi)) * (1.0 + 1e-12)) return i;
    }
    return 3;
}

Outcome zone_oracle()
{
    std::vector<mapping::ZoneLayout> presets(5);
    presets[1] = {{0, 0}, {Point2{2, 3}, Point2{4, 6}, Point2{6, 9}}, 8.0};
    presets[2].center = {3.0, -2.0};
    presets[3] = {{0, 0}, {Point2{1, 0.5}, Point2{1.5, 1}, Point2{3, 5}}, 4.0};
    presets[4] = {{-1, 2}, {Point2{5, 5}, Point2{10, 10}, Point2{15, 15}}, 25.0};
    int total = 0, agree = 0;
    for (const auto& l : presets) {
        const double span = l.rect_ml_bound * 1.3;
        for (int i = 0; i < 100; ++i)
            for (int j = 0; j < 100; ++j) {
                const Point2 p{l.center.ml - span + 2.0 * span * (i + 0.5) / 100.0,
                               l.center.ap - span + 2.0 * span * (j + 0.5) / 100.0};
                ++total;
                agree += mapping::allocate_zone(p, l) == polar_zone(p, l);
            }
    }
    return {agree == total, fmt::format("{}/{} grid points agree", agree, total)};
}

Outcome filters()
{
    struct Ref {
        double fc;
        std::vector<std::pair<double, double>> sos;  // (a1, a2)
        double b0;
    };
    // Reference second-order sections from an independent Butterworth design at fs = 100 Hz.
    const std::vector<Ref> refs{
        {5.0, {{-1.4648681939512453, 0.54025356942786973}, {-1.5610180758007182, 0.64135153805756306}, {-1.7612492291001696, 0.85188703186759773}}, 8.5765570732594045e-06},
        {8.0, {{-1.1960469069023136, 0.36487252024878503}, {-1.3072850288493236, 0.49181223722257528}, {-1.5583120634617988, 0.77827249175345503}}, 0.00010706889742140336},
        {30.0, {{0.32211918391007993, 0.04239957598977552}, {0.36952737735124108, 0.19581571265583297}, {0.49595411891429331, 0.6049412425276679}}, 0.070115413492453552}};
    bool pass = true;
    std::string detail;
    for (const auto& ref : refs) {
        const auto c = motion::design_butterworth({1, ref.fc});
        double coef_err = 0.0, b0 = 1.0;
        for (const auto& s : c) {
            b0 *= s.b0;
            double best = 1e9;
            for (const auto& [a1, a2] : ref.sos) best = std::min(best, std::max(std::abs(s.a1 - a1), std::abs(s.a2 - a2)));
            coef_err = std::max(coef_err, best);
        }
        coef_err = std::max(coef_err, std::abs(b0 - ref.b0) / ref.b0);
        const double dc = std::abs(motion::cascade_response(c, 0.0, 100.0));
        const double at_fc = 20.0 * std::log10(std::abs(motion::cascade_response(c, ref.fc, 100.0)));
        const bool has_stop = 4.0 * ref.fc < 50.0;
        const double stop = has_stop ? -20.0 * std::log10(std::abs(motion::cascade_response(c, 4.0 * ref.fc, 100.0))) : 0.0;
        const bool ok = coef_err <= 1e-6 && std::abs(dc - 1.0) <= 1e-6 && std::abs(at_fc + 3.0103) <= 0.1 &&
                        (!has_stop || stop >= 48.0);
        pass = pass && ok;
        detail += fmt::format("{}{:.0f} Hz: coef err {:.1e}, DC {:.9f}, fc {:.3f} dB", detail.empty() ? "" : "; ", ref.fc,
                              coef_err, dc, at_fc);
        if (has_stop) detail += fmt::format(", 4fc -{:.1f} dB", stop);
    }
    return {pass, detail};
}

Outcome sequencer()
{
    const auto tl = g_library->timeline("demo", "pop");
    auto play = [&](std::vector<std::pair<seq::MusicEvent, double>>& out) {
        seq::Sequencer s(tl);
        s.play();
        int ms = 0;
        std::array<int, seq::kTrackCount> voices{};
        int max_voices = 0;
        while (!s.finished()) {
            s.tick(1.0, [&](const seq::MusicEvent& e) {
                out.emplace_back(e, s.clock().elapsed_ticks);
                auto& v = voices[static_cast<std::size_t>(e.track)];
                v += e.kind == seq::EventKind::note_on ? 1 : -1;
                max_voices = std::max(max_voices, v);
            });
            ++ms;
        }
        return std::pair{ms, max_voices};
    };
    std::vector<std::pair<seq::MusicEvent, double>> a, b;
    const auto [ms_a, voices_a] = play(a);
    const auto [ms_b, voices_b] = play(b);
    const bool same = a == b;
    const bool pass = same && std::abs(ms_a - 8000) <= 10 && voices_a <= seq::kMaxVoices && voices_b <= seq::kMaxVoices;
    return {pass, fmt::format("{} events, runs {}; 4 bars at 120 BPM last {} ms, limit 8000 +- 10; max voices per track {}",
                              a.size(), same ? "identical" : "differ", ms_a, voices_a)};
}

struct GaitRun {
    std::vector<motion::StepEvent> steps;
    std::vector<LogRow> rows;
    sim::GeneratedProfile profile;
};

GaitRun run_gait(double cadence)
{
    SessionState st;
    st.mode = Mode::gait_duration;
    st.tempo = 100.0;
    EngineCore e(st, g_library);
    GaitRun r;
    e.set_row_sink(&r.rows);
    sim::MotionProfile p;
    p.kind = sim::ProfileKind::gait;
    p.duration = 12.0;
    p.cadence = cadence;
    r.profile = sim::generate_profile(p);
    OfflineOptions opt;
    opt.render = false;
    opt.before_frame = [&](EngineCore& eng, std::int64_t k) {
        if (k > 0 && eng.movement().step_event) r.steps.push_back(*eng.movement().step_event);
    };
    run_offline(e, r.profile.frames, opt);
    if (e.movement().step_event) r.steps.push_back(*e.movement().step_event);
    return r;
}

Outcome step_pipeline()
{
    const auto on = run_gait(100.0);
    const auto& truth = on.profile.truth.footfalls;
    int matched = 0;
    double worst = 0.0;
    for (const auto& ff : truth) {
        const auto it = std::min_element(on.steps.begin(), on.steps.end(), [&](const auto& x, const auto& y) {
            return std::abs(x.t - ff.t) < std::abs(y.t - ff.t);
        });
        if (it != on.steps.end() && it->foot == ff.foot && std::abs(it->t - ff.t) <= 20.0) {
            ++matched;
            worst = std::max(worst, std::abs(it->t - ff.t));
        }
    }
    const bool count_ok = matched == 20 && truth.size() == 20 && on.steps.size() == 20;

    // Timing error per detected interval against the 600 ms beat.
    const double beat_ms = 600.0, dead = SessionState{}.gait.dead_zone_ms;
    auto errors = [&](const GaitRun& r) {
        std::vector<double> e;
        for (const auto& w : r.rows)
            if (w.step_interval_ms > 0.0) e.push_back(mapping::step_timing_error(w.step_interval_ms, beat_ms, dead));
        return e;
    };
    const auto e0 = errors(on);
    const bool zero_ok = !e0.empty() && std::all_of(e0.begin(), e0.end(), [](double x) { return x == 0.0; });

    auto sign_ok = [&](double cadence, double sign) {
        const auto r = run_gait(cadence);
        const auto e = errors(r);
        double mean_interval = 0.0;
        for (const auto& w : r.rows) mean_interval += w.step_interval_ms;
        const auto n = std::count_if(r.rows.begin(), r.rows.end(), [](const LogRow& w) { return w.step_interval_ms > 0.0; });
        mean_interval /= static_cast<double>(std::max<long>(n, 1));
        const bool none_wrong = !e.empty() && std::none_of(e.begin(), e.end(), [&](double x) { return x * sign < 0.0; });
        const bool mean_strict = mapping::step_timing_error(mean_interval, beat_ms, dead) * sign > 0.0;
        // The feedback itself leans the same way while held.
        const bool fv_side = std::any_of(r.rows.begin(), r.rows.end(), [&](const LogRow& w) { return (w.fv - 0.5) * sign > 0.0; }) &&
                             std::none_of(r.rows.begin(), r.rows.end(), [&](const LogRow& w) { return (w.fv - 0.5) * sign < 0.0; });
        return none_wrong && mean_strict && fv_side;
    };
    const bool slow_ok = sign_ok(90.0, 1.0);
    const bool fast_ok = sign_ok(110.0, -1.0);
    return {count_ok && zero_ok && slow_ok && fast_ok,
            fmt::format("{}/{} steps within 20 ms (worst {:.1f} ms, {} detected); error at matched cadence {}; "
                        "-10% cadence {}, +10% cadence {}",
                        matched, truth.size(), worst, on.steps.size(), zero_ok ? "0" : "nonzero",
                        slow_ok ? "positive" : "wrong sign", fast_ok ? "negative" : "wrong sign")};
}

Outcome standby_equivalence()
{
    int identical = 0;
    std::string bad;
    for (std::size_t m = 0; m < kModeCount; ++m) {
        SessionState st;
        st.mode = static_cast<Mode>(m);
        st.standby = true;
        EngineCore e(st, g_library);
        sim::MotionProfile p;
        p.kind = is_gait(st.mode) ? sim::ProfileKind::gait : sim::ProfileKind::static_sway;
        p.sway_amp = 25.0;
        p.sway_freq = 0.7;
        p.duration = 9.0;
        const auto g = sim::generate_profile(p);
        synth::Renderer bare(st.mixer);
        synth::AudioBlock ref;
        bool same = true;
        std::uint64_t blocks = 0;
        OfflineOptions opt;
        opt.duration_ms = 8000.0;  // the whole 4-bar song at 120 BPM
        opt.on_block = [&](const synth::AudioBlock& b, const synth::BlockSnapshot& snap) {
            bare.render_block(snap.event_span(), {}, snap.tempo, ref);
            same = same && b == ref;
            ++blocks;
        };
        run_offline(e, g.frames, opt);
        if (same && blocks == 800 && e.sequencer().finished()) ++identical;
        else bad += fmt::format(" {}", kModeNames[m]);
    }
    return {identical == static_cast<int>(kModeCount),
            fmt::format("{}/{} modes bit-identical over 800 blocks{}", identical, kModeCount,
                        bad.empty() ? "" : "; differ:" + bad)};
}

double rms(const std::vector<synth::AudioBlock>& blocks, bool left)
{
    double acc = 0.0;
    for (const auto& b : blocks)
        for (int i = 0; i < synth::kBlockFrames; ++i) {
            const double v = left ? b.left[static_cast<std::size_t>(i)] : b.right[static_cast<std::size_t>(i)];
            acc += v * v;
        }
    return std::sqrt(acc / static_cast<double>(blocks.size() * synth::kBlockFrames));
}

Outcome audibility()
{
    const auto mixer = synth::MixerSettings::defaults();
    // Disturbance tone over the demo song.
    seq::Sequencer s(g_library->timeline("demo", "pop"));
    s.play();
    synth::Renderer r(mixer);
    synth::StrategyControl tone;
    tone.strategy = synth::Strategy::disturbance_tone;
    tone.fv = 1.0;
    std::vector<synth::AudioBlock> audio;
    for (int b = 0; b < 110; ++b) {
        synth::BlockSnapshot snap;
        snap.tempo = 120.0;
        for (int i = 0; i < 10; ++i) s.tick(1.0, [&](const seq::MusicEvent& e) { snap.push_event({e, i * 48}); });
        snap.push_control(tone);
        audio.push_back(r.render_block(snap.event_span(), snap.control_span(), 120.0));
    }
    constexpr int n = 4800;
    std::vector<double> in(n);
    for (int i = 0; i < n; ++i)
        in[static_cast<std::size_t>(i)] = (0.5 - 0.5 * std::cos(2.0 * kPi * i / (n - 1))) *
                                          audio[100 + static_cast<std::size_t>(i / synth::kBlockFrames)]
                                              .left[static_cast<std::size_t>(i % synth::kBlockFrames)];
    std::vector<fftw_complex> out(n / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    auto mag = [&](int k) { return std::hypot(out[static_cast<std::size_t>(k)][0], out[static_cast<std::size_t>(k)][1]); };
    const int bin = static_cast<int>(std::lround(mixer.disturbance_freq * n / synth::kSampleRate));
    double neighbor = 0.0;
    for (int k = bin - 20; k <= bin + 20; ++k)
        if (std::abs(k - bin) > 3) neighbor = std::max(neighbor, mag(k));
    const double peak_db = 20.0 * std::log10(mag(bin) / neighbor);

    // Siren alone.
    auto siren = [&](double fv) {
        synth::Renderer sr(mixer);
        synth::StrategyControl c;
        c.strategy = synth::Strategy::ambulance_siren;
        c.level = 1.0;
        c.fv = fv;
        std::vector<synth::AudioBlock> blocks;
        for (int b = 0; b < 150; ++b) {
            auto blk = sr.render_block({}, std::span(&c, 1), 120.0);
            if (b >= 5) blocks.push_back(blk);
        }
        return std::pair{rms(blocks, true), rms(blocks, false)};
    };
    const auto [cl, cr] = siren(0.5);
    const double balance = 20.0 * std::log10(cl / cr);
    const auto [rl, rr] = siren(1.0);
    const double right_margin = 20.0 * std::log10(rr / std::max(rl, 1e-30));
    const bool pass = peak_db >= 20.0 && std::abs(balance) <= 0.1 && right_margin >= 20.0;
    return {pass, fmt::format("tone peak {:.1f} dB above neighbours at {:.0f} Hz, limit 20 dB; siren fv=0.5 L-R {:+.3f} dB, "
                              "limit 0.1 dB; fv=1 R-L {} dB, limit 20 dB",
                              peak_db, mixer.disturbance_freq, balance,
                              rl == 0.0 ? std::string("inf") : fmt::format("{:.1f}", right_margin))};
}

Outcome logging_and_persistence()
{
    // Real-time 10 s reach session with the simulator on loopback.
    const auto log = scratch("session.csv");
    SessionState st = ephemeral_ports(SessionState{});
    st.mode = Mode::reach;
    RealtimeOptions ro;
    ro.sensor_host = "127.0.0.1";
    ro.log_path = log;
    sim::MotionProfile p;
    p.kind = sim::ProfileKind::reach;
    p.duration = 12.0;
    p.reach_start = 0.5;
    p.reach_period = 2.5;
    p.reach_angle = 25.0;
    p.acc_noise = 0.01;
    p.gyro_noise = 0.5;
    const auto g = sim::generate_profile(p);
    std::uint64_t rows_logged = 0;
    {
        RealtimeEngine e(st, g_library, ro);
        e.start();
        sim::StreamOptions so;
        for (std::size_t s = 0; s < sim::kSlots; ++s) so.ports[s] = e.sensor_port(s);
        std::atomic<bool> stop{false};
        so.stop = &stop;
        std::thread streamer([&] { sim::stream_profile(g.frames, so); });
        std::this_thread::sleep_until(std::chrono::steady_clock::time_point(
            std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double, std::milli>(e.origin_ms() + 10000.0))));
        e.stop();
        stop = true;
        streamer.join();
        rows_logged = e.live().counters.log_rows;
    }
    const auto rows = read_log(log);
    const long n_rows = static_cast<long>(rows.size());
    const bool rows_ok = std::abs(n_rows - 1000) <= 2 && rows_logged == rows.size();

    // Config round trip with non-default values in every section.
    SessionState cfg;
    cfg.mode = Mode::sts;
    cfg.tempo = 87.25;
    cfg.style = "slow_rock";
    cfg.settings(Mode::reach).mapping.gamma = 2.5;
    cfg.settings(Mode::trunk_control).secondary_enabled = false;
    cfg.zones.center = {0.75, -1.25};
    cfg.trajectory.shape = mapping::TrajectoryShape::square;
    cfg.gait.detector.threshold_g = 1.45;
    cfg.filters.alpha = 0.97;
    cfg.sensors[0].gyro_bias = {0.125, -0.5, 1.0 / 3.0};
    cfg.mixer.tracks[3].eq[2].gain_db = -3.3;
    cfg.snapshot_rate_hz = 20.0;
    const auto cfg_path = scratch("config.json");
    save_config(cfg, cfg_path);
    const bool config_ok = load_config(cfg_path) == cfg;
    std::filesystem::remove(cfg_path);

    // Replay the logged raw samples through the simulator into the offline engine.
    sim::MotionProfile replay;
    replay.kind = sim::ProfileKind::replay;
    replay.replay_path = log.string();
    const auto frames = sim::generate_profile(replay).frames;
    SessionState offline_state;
    offline_state.mode = Mode::reach;
    EngineCore e(offline_state, g_library);
    std::vector<LogRow> again;
    e.set_row_sink(&again);
    OfflineOptions opt;
    opt.render = false;
    opt.duration_ms = frames.empty() ? 0.0 : frames.back().t + 1.0;
    run_offline(e, frames, opt);
    double worst = 0.0;
    std::size_t compared = 0;
    for (std::size_t i = 100; i < std::min(rows.size(), again.size()); ++i) {
        if (rows[i].sensor_offline) continue;
        worst = std::max(worst, std::abs(rows[i].fv - again[i].fv));
        ++compared;
    }
    const bool replay_ok = compared >= 800 && worst <= 0.01;
    std::filesystem::remove(log);
    return {rows_ok && config_ok && replay_ok,
            fmt::format("{} rows in 10 s, limit 1000 +- 2; config round trip {}; replay max |dfv| {:.2e} over {} rows, limit 0.01",
                        n_rows, config_ok ? "exact" : "differs", worst, compared)};
}

Outcome packet_robustness()
{
    SessionState st = ephemeral_ports(SessionState{});
    st.mode = Mode::static_balance;
    RealtimeOptions ro;
    ro.sensor_host = "127.0.0.1";
    RealtimeEngine e(st, g_library, ro);
    e.start();
    sim::MotionProfile p;
    p.sway_amp = 6.0;
    p.duration = 10.0;
    const auto g = sim::generate_profile(p);
    sim::StreamOptions so;
    for (std::size_t s = 0; s < sim::kSlots; ++s) so.ports[s] = e.sensor_port(s);
    so.drop_fraction = 0.2;
    so.seed = 7;
    const double steal0 = steal_ms();
    const auto stats = sim::stream_profile(g.frames, so);
    const auto live = e.live();
    e.stop();
    const double stolen = steal0 < 0.0 ? -1.0 : steal_ms() - steal0;
    const double loss = static_cast<double>(stats.dropped) / static_cast<double>(stats.dropped + stats.sent);
    return {live.sched.missed_ticks == 0 && live.counters.freeze_events == 0,
            fmt::format("{:.1f}% datagrams dropped; {} mapping ticks, {} missed (max lateness {:.1f} ms), "
                        "{} freeze events, {} stale; vCPU steal during run {:.0f} ms",
                        100.0 * loss, live.sched.frames, live.sched.missed_ticks, live.sched.max_lateness_ms,
                        live.counters.freeze_events, live.counters.stale_samples, stolen)};
}

struct Criterion {
    std::string name;
    Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv)
{
    const std::vector<Criterion> all{
        {"loop_delay", loop_delay},
        {"real_time_factor", real_time_factor},
        {"mapping_oracle", mapping_oracle},
        {"zone_oracle", zone_oracle},
        {"filter_correctness", filters},
        {"sequencer_timing", sequencer},
        {"step_pipeline", step_pipeline},
        {"standby_equivalence", standby_equivalence},
        {"strategy_audibility", audibility},
        {"logging_persistence", logging_and_persistence},
        {"packet_robustness", packet_robustness},
    };

    CLI::App app{"Runs the acceptance checks"};
    std::vector<std::string> only;
    std::string data;
    app.add_option("criteria", only, "Subset of criteria to run (default: all)");
    app.add_option("--data", data, "Song/style directory");
    CLI11_PARSE(app, argc, argv);

    try {
        g_library = std::make_shared<const MusicLibrary>(
            MusicLibrary::load(data.empty() ? default_data_dir() : std::filesystem::path(data)));
    } catch (const std::exception& e) {
        fmt::print(stderr, "cannot load music library: {}\n", e.what());
        return 2;
    }

    const std::set<std::string> wanted(only.begin(), only.end());
    int failed = 0, ran = 0;
    for (const auto& c : all) {
        if (!wanted.empty() && !wanted.contains(c.name)) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        ++ran;
        failed += !o.pass;
        fmt::print("{} {:<22} {}\n", o.pass ? "PASS" : "FAIL", c.name, o.detail);
        std::fflush(stdout);
    }
    fmt::print("{} of {} criteria passed\n", ran - failed, ran);
    return failed == 0 && ran > 0 ? 0 : 1;
}
