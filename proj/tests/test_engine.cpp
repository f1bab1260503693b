#include <catch_amalgamated.hpp>

#include "mbf/session/engine.hpp"

using namespace mbf;
using namespace mbf::session;

namespace {

std::shared_ptr<const MusicLibrary> library()
{
    static const auto lib = std::make_shared<const MusicLibrary>(MusicLibrary::load(default_data_dir()));
    return lib;
}

struct Run {
    std::vector<LogRow> rows;
    EngineCounters counters;
    SessionState state;
};

Run run(SessionState st, const sim::MotionProfile& p, OfflineOptions opt = {},
        const std::function<void(EngineCore&)>& setup = {})
{
    Run r;
    EngineCore e(std::move(st), library());
    e.set_row_sink(&r.rows);
    if (setup) setup(e);
    const auto g = sim::generate_profile(p);
    opt.render = false;
    run_offline(e, g.frames, opt);
    r.counters = e.counters();
    r.state = e.state();
    return r;
}

OfflineOptions no_render()
{
    OfflineOptions o;
    o.render = false;
    return o;
}

SessionState in_mode(Mode m)
{
    SessionState s;
    s.mode = m;
    return s;
}

sim::MotionProfile sway(double amp, double duration)
{
    sim::MotionProfile p;
    p.sway_amp = amp;
    p.sway_freq = 0.25;
    p.duration = duration;
    return p;
}

}  // namespace

TEST_CASE("one log row every 10 ms")
{
    OfflineOptions opt;
    opt.duration_ms = 10000.0;
    const auto r = run(in_mode(Mode::static_balance), sway(5.0, 10.0), opt);
    REQUIRE(r.rows.size() == 1000);
    for (std::size_t i = 0; i < r.rows.size(); ++i) REQUIRE(r.rows[i].t == Catch::Approx(10.0 * static_cast<double>(i)));
    REQUIRE(r.counters.mbf_ticks == 1000);
    REQUIRE(r.counters.seq_ticks == 10000);
    REQUIRE(r.counters.blocks == 1000);
}

TEST_CASE("static balance on target is zone 0 with no feedback")
{
    const auto r = run(in_mode(Mode::static_balance), sway(0.0, 3.0));
    for (std::size_t i = 10; i < r.rows.size(); ++i) {
        REQUIRE(r.rows[i].zone == 0);
        REQUIRE(r.rows[i].fv == 0.0);
        REQUIRE_FALSE(r.rows[i].sensor_offline);
    }
}

TEST_CASE("static balance feedback follows the zone")
{
    auto p = sway(0.0, 3.0);
    p.offset_ml = 7.0;  // ring 3 of the default layout
    const auto r = run(in_mode(Mode::static_balance), p);
    const auto& last = r.rows.back();
    REQUIRE(last.zone == 3);
    REQUIRE(last.fv == Catch::Approx(mapping::zone_intensity(3)));
}

TEST_CASE("standby neutralizes every control")
{
    for (std::size_t m = 0; m < kModeCount; ++m) {
        auto st = in_mode(static_cast<Mode>(m));
        st.standby = true;
        EngineCore e(st, library());
        std::vector<LogRow> rows;
        e.set_row_sink(&rows);
        auto p = sway(20.0, 3.0);
        const auto g = sim::generate_profile(p);
        OfflineOptions opt;
        opt.render = false;
        bool all_neutral = true;
        opt.before_frame = [&](EngineCore& eng, std::int64_t k) {
            if (k == 0) return;
            for (const auto& c : eng.controls()) all_neutral = all_neutral && c == synth::StrategyControl::neutral(c.strategy);
        };
        run_offline(e, g.frames, opt);
        INFO(kModeNames[m]);
        REQUIRE(all_neutral);
        for (const auto& row : rows) REQUIRE(row.standby);
    }
}

TEST_CASE("toggling standby leaves no hidden state")
{
    const auto p = sway(12.0, 8.0);
    OfflineOptions toggled;
    toggled.before_frame = [](EngineCore& e, std::int64_t k) {
        if (k == 200) e.set_standby(true);
        if (k == 400) e.set_standby(false);
    };
    const auto a = run(in_mode(Mode::static_balance), p, toggled);
    const auto b = run(in_mode(Mode::static_balance), p);
    REQUIRE(a.rows.size() == b.rows.size());
    bool saw_feedback = false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        if (i >= 200 && i < 400) {
            REQUIRE(a.rows[i].fv == 0.0);
            continue;
        }
        REQUIRE(a.rows[i].fv == b.rows[i].fv);
        REQUIRE(a.rows[i].tilt_ml == b.rows[i].tilt_ml);
        saw_feedback = saw_feedback || a.rows[i].fv > 0.0;
    }
    REQUIRE(saw_feedback);
}

TEST_CASE("five reaches count five repetitions")
{
    sim::MotionProfile p;
    p.kind = sim::ProfileKind::reach;
    p.duration = 22.0;
    p.reach_count = 5;
    p.reach_angle = 25.0;
    p.acc_noise = 0.01;
    const auto r = run(in_mode(Mode::reach), p);
    REQUIRE(r.state.rep_count == 5);
    REQUIRE(r.rows.back().rep_count == 5);
    // The melody pitch rises with the reach.
    REQUIRE(std::any_of(r.rows.begin(), r.rows.end(), [](const LogRow& w) { return w.fv > 0.7; }));
}

TEST_CASE("oscillating inside the hysteresis band counts one repetition")
{
    auto p = sway(2.0, 10.0);
    p.sway_axis = sim::Axis::ap;
    p.sway_freq = 2.0;
    p.offset_ap = 15.0;
    const auto r = run(in_mode(Mode::reach), p);
    REQUIRE(r.state.rep_count <= 1);
}

TEST_CASE("sit-to-stand counts one repetition per stand cue")
{
    sim::MotionProfile p;
    p.kind = sim::ProfileKind::sts;
    p.duration = 20.0;
    const auto g = sim::generate_profile(p);
    const auto r = run(in_mode(Mode::sts), p);
    REQUIRE(r.state.rep_count == static_cast<int>(g.truth.crossings.size()));
    const auto stands = std::count_if(r.rows.begin(), r.rows.end(),
                                      [](const LogRow& w) { return w.cue == CueFlag::stand || w.cue == CueFlag::both; });
    REQUIRE(stands == r.state.rep_count);
}

TEST_CASE("gait counts footfalls")
{
    sim::MotionProfile p;
    p.kind = sim::ProfileKind::gait;
    p.duration = 12.0;
    for (Mode m : {Mode::gait_duration, Mode::gait_phase}) {
        const auto r = run(in_mode(m), p);
        REQUIRE(r.state.rep_count == 20);
        const auto steps = std::count_if(r.rows.begin(), r.rows.end(), [](const LogRow& w) { return w.step != StepFlag::none; });
        REQUIRE(steps == 20);
    }
}

TEST_CASE("bias calibration")
{
    auto p = sway(0.0, 3.0);
    p.gyro_offset = 1.5;
    p.gyro_noise = 0.05;
    EngineCore e(in_mode(Mode::static_balance), library());
    e.begin_calibration();
    REQUIRE(e.calibration_status() == CalibrationStatus::running);
    const auto g = sim::generate_profile(p);
    run_offline(e, g.frames, no_render());
    REQUIRE(e.calibration_status() == CalibrationStatus::done);
    for (std::size_t s = 0; s < 3; ++s) {
        REQUIRE(e.state().sensors[s].gyro_bias.x == Catch::Approx(1.5).margin(0.05));
        REQUIRE(e.state().sensors[s].gyro_bias.z == Catch::Approx(1.5).margin(0.05));
    }

    SECTION("moving sensors fail calibration")
    {
        EngineCore moving(in_mode(Mode::static_balance), library());
        moving.begin_calibration();
        const auto m = sim::generate_profile(sway(20.0, 3.0));
        run_offline(moving, m.frames, no_render());
        REQUIRE(moving.calibration_status() == CalibrationStatus::failed);
        REQUIRE_FALSE(moving.calibration_message().empty());
    }
}

TEST_CASE("a silent sensor freezes feedback once")
{
    auto p = sway(0.0, 3.0);
    p.offset_ml = 7.0;
    EngineCore e(in_mode(Mode::static_balance), library());
    std::vector<LogRow> rows;
    e.set_row_sink(&rows);
    const auto g = sim::generate_profile(p);
    OfflineOptions opt;
    opt.render = false;
    opt.duration_ms = 5000.0;
    run_offline(e, g.frames, opt);
    REQUIRE(e.counters().freeze_events == 1);
    REQUIRE(rows.size() == 500);
    REQUIRE_FALSE(rows[250].sensor_offline);
    REQUIRE(rows[250].fv > 0.0);
    const double timeout = e.state().offline_timeout_ms;
    for (const auto& w : rows)
        if (w.t >= 3000.0 + timeout) {
            REQUIRE(w.sensor_offline);
            REQUIRE(w.fv == 0.0);
        }
}

TEST_CASE("published blocks carry the sequencer events of their frame")
{
    EngineCore e(in_mode(Mode::static_balance), library());
    e.play();
    std::size_t events = 0;
    for (int k = 0; k < 900; ++k) {
        const auto& snap = e.run_frame(10.0 * k);
        REQUIRE(snap.index == k);
        for (const auto& ev : snap.event_span()) {
            REQUIRE(ev.offset % kFramesPerSeqTick == 0);
            ++events;
        }
    }
    REQUIRE(events == library()->timeline("demo", "pop").events().size());
}
