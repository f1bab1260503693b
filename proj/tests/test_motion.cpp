#include <catch_amalgamated.hpp>

#include <random>

#include "mbf/mapping/feedback.hpp"
#include "mbf/sim/profile.hpp"

using namespace mbf;
using namespace mbf::motion;

namespace {

// 100 Hz view of a 125 Hz stream: the newest sample at or before each tick.
std::vector<ImuSample> resample(const std::vector<sim::SimFrame>& frames, std::size_t slot)
{
    std::vector<ImuSample> out;
    std::size_t next = 0;
    const double end = frames.back().t;
    for (double t = 0.0; t <= end; t += 10.0) {
        while (next + 1 < frames.size() && frames[next + 1].t <= t) ++next;
        out.push_back(frames[next].sensors[slot]);
    }
    return out;
}

ImuSample still(Vec3 acc = {0, 0, 1}, Vec3 gyro = {})
{
    ImuSample s;
    s.acc = acc;
    s.gyro = gyro;
    return s;
}

}  // namespace

TEST_CASE("bias calibration")
{
    SECTION("zero-noise stationary stream gives zero biases")
    {
        std::vector<ImuSample> s(120, still());
        const auto b = calibrate_bias(s);
        REQUIRE(b.gyro_bias.norm() == 0.0);
        REQUIRE(b.acc_bias.norm() == 0.0);
    }
    SECTION("gyro offset is recovered from the sample mean")
    {
        std::mt19937 rng(5);
        std::normal_distribution<double> n(0.0, 0.3);
        std::vector<ImuSample> s;
        for (int i = 0; i < 200; ++i)
            s.push_back(still({0.01, 0, 1.02}, {1.0 + n(rng), 2.0 + n(rng), 3.0 + n(rng)}));
        double mean[3] = {};
        for (const auto& x : s)
            for (int a = 0; a < 3; ++a) mean[a] += x.gyro[a] / 200.0;
        const auto b = calibrate_bias(s);
        for (int a = 0; a < 3; ++a) {
            REQUIRE(b.gyro_bias[a] == Catch::Approx(mean[a]).margin(1e-12));
            REQUIRE(b.gyro_bias[a] == Catch::Approx(a + 1.0).margin(0.05));
        }
        REQUIRE(b.acc_bias.x == Catch::Approx(0.01));
        REQUIRE(b.acc_bias.z == Catch::Approx(0.02));
        const auto c = correct_bias(s[0], b);
        REQUIRE(c.acc.z == Catch::Approx(1.0));
    }
    SECTION("movement is rejected")
    {
        sim::MotionProfile p;
        p.sway_amp = 10.0;
        p.sway_freq = 0.5;
        p.duration = 2.0;
        const auto g = sim::generate_profile(p);
        std::vector<ImuSample> s;
        for (const auto& f : g.frames) s.push_back(f.sensors[sim::kTrunk]);
        REQUIRE_THROWS_AS(calibrate_bias(s), NotStationary);
    }
    SECTION("fewer than 1 s of samples")
    {
        std::vector<ImuSample> s(50, still());
        REQUIRE_THROWS_AS(calibrate_bias(s), InsufficientSamples);
    }
}

TEST_CASE("tilt from gravity")
{
    SECTION("level sensor settles to zero from any start")
    {
        Tilt t{40.0, -25.0};
        for (int i = 0; i < 1000; ++i) t = estimate_tilt(still(), t, 0.01);
        REQUIRE(t.ml == Catch::Approx(0.0).margin(1e-6));
        REQUIRE(t.ap == Catch::Approx(0.0).margin(1e-6));
    }
    SECTION("static 10 deg forward")
    {
        const double r = 10.0 / kDegPerRad;
        const auto s = still({std::sin(r), 0.0, std::cos(r)});
        Tilt t{};
        for (int i = 0; i < 1000; ++i) t = estimate_tilt(s, t, 0.01);
        REQUIRE(t.ap == Catch::Approx(10.0).margin(0.1));
        TiltEstimator est;
        Tilt e{};
        for (int i = 0; i < 500; ++i) e = est.update(s);
        REQUIRE(e.ap == Catch::Approx(10.0).margin(0.1));
        REQUIRE(e.ml == Catch::Approx(0.0).margin(1e-9));
    }
}

TEST_CASE("gyro rotation at 5 deg/s for 2 s reaches 10 deg")
{
    // Pure integration (alpha = 1) against the closed form.
    Tilt t{};
    for (int i = 0; i < 200; ++i) t = estimate_tilt(still({0, 0, 1}, {0, 5.0, 0}), t, 0.01, 1.0);
    REQUIRE(t.ap == Catch::Approx(10.0).margin(1e-9));

    // Blended estimator with the accelerometer following the same rotation.
    TiltEstimator est;
    Tilt e{};
    for (int i = 0; i <= 200; ++i) {
        const double ang = 5.0 * i * 0.01;
        ImuSample s = still(sim::gravity_for_tilt(0.0, ang), {0, i < 200 ? 5.0 : 0.0, 0});
        e = est.update(s);
    }
    REQUIRE(e.ap == Catch::Approx(10.0).margin(0.5));
}

TEST_CASE("tilt estimator holds a reach without drifting")
{
    sim::MotionProfile p;
    p.kind = sim::ProfileKind::reach;
    p.duration = 6.0;
    p.reach_angle = 20.0;
    p.reach_rise = 0.08;
    p.reach_hold = 1.0;
    p.reach_count = 1;
    const auto g = sim::generate_profile(p);
    const auto s = resample(g.frames, sim::kTrunk);
    TiltEstimator est;
    double max_err = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto t = est.update(s[i]);
        const double truth = sim::detail::analytic_tilt(p, s[i].t_rx / 1000.0).ap;
        if (s[i].t_rx > 1200.0 && s[i].t_rx < 2000.0) max_err = std::max(max_err, std::abs(t.ap - truth));
        if (s[i].t_rx > 2500.0) max_err = std::max(max_err, std::abs(t.ap - truth));
    }
    REQUIRE(max_err < 0.5);
}

TEST_CASE("tilt output stays within +-90 deg for any finite input")
{
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    TiltEstimator est;
    Tilt t{};
    for (int i = 0; i < 20000; ++i) {
        const auto s = still({u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)});
        t = estimate_tilt(s, t, 0.01);
        REQUIRE(std::abs(t.ml) <= 90.0);
        REQUIRE(std::abs(t.ap) <= 90.0);
        const auto e = est.update(s);
        REQUIRE(std::abs(e.ml) <= 90.0);
        REQUIRE(std::abs(e.ap) <= 90.0);
    }
}

TEST_CASE("squared jerk")
{
    SECTION("constant acceleration gives zero")
    {
        std::vector<Vec3> a(300, Vec3{0.1, 0.2, 1.0});
        const auto j = compute_jerk(a);
        REQUIRE(j.back() == Catch::Approx(0.0).margin(1e-12));
        for (double v : j) REQUIRE(v >= 0.0);
    }
    SECTION("ramp with slope c gives c squared")
    {
        const double c = 4.0;  // m/s^3
        std::vector<Vec3> a;
        for (int i = 0; i < 600; ++i) a.push_back({c * i * 0.01 / kGravity, 0.0, 1.0});
        const auto j = compute_jerk(a);
        REQUIRE(j.back() == Catch::Approx(c * c).epsilon(0.02));
    }
    SECTION("intermittency burst stands out of the smooth movement")
    {
        sim::MotionProfile p;
        p.kind = sim::ProfileKind::sts;
        p.duration = 5.0;
        p.burst_times = {2.0};
        const auto g = sim::generate_profile(p);
        const auto s = resample(g.frames, sim::kTrunk);
        JerkEstimator je;
        std::vector<double> smooth;
        double burst_peak = 0.0;
        for (const auto& x : s) {
            const double v = je.update(x.acc);
            if (x.t_rx >= 2000.0 && x.t_rx <= 2400.0)
                burst_peak = std::max(burst_peak, v);
            else if (x.t_rx > 1000.0 && x.t_rx < 3000.0 && (x.t_rx < 1800.0 || x.t_rx > 2600.0))
                smooth.push_back(v);
        }
        std::nth_element(smooth.begin(), smooth.begin() + static_cast<long>(smooth.size() / 2), smooth.end());
        const double median = smooth[smooth.size() / 2];
        REQUIRE(burst_peak >= 10.0 * median);
    }
}

TEST_CASE("step detection")
{
    SECTION("flat 1 g stream has no events")
    {
        std::vector<ImuSample> s(1000, still());
        for (std::size_t i = 0; i < s.size(); ++i) s[i].t_rx = 10.0 * static_cast<double>(i);
        REQUIRE(detect_step(s, Foot::left).empty());
    }
    SECTION("gait profile footfalls are found within 20 ms")
    {
        sim::MotionProfile p;
        p.kind = sim::ProfileKind::gait;
        p.cadence = 100.0;
        p.duration = 12.0;
        const auto g = sim::generate_profile(p);
        REQUIRE(g.truth.footfalls.size() == 20);
        for (auto foot : {Foot::left, Foot::right}) {
            const auto slot = foot == Foot::left ? sim::kLeftLeg : sim::kRightLeg;
            const auto ev = detect_step(resample(g.frames, slot), foot);
            std::vector<double> truth;
            for (const auto& f : g.truth.footfalls)
                if (f.foot == foot) truth.push_back(f.t);
            REQUIRE(ev.size() == truth.size());
            for (std::size_t i = 0; i < ev.size(); ++i) {
                REQUIRE(std::abs(ev[i].t - truth[i]) <= 20.0);
                if (i > 0) REQUIRE(ev[i].duration_since_prev == Catch::Approx(ev[i].t - ev[i - 1].t));
            }
        }
    }
    SECTION("two spikes 100 ms apart give one event")
    {
        std::vector<ImuSample> s(100, still());
        for (std::size_t i = 0; i < s.size(); ++i) s[i].t_rx = 10.0 * static_cast<double>(i);
        s[30].acc = s[40].acc = {0, 0, 1.8};
        REQUIRE(detect_step(s, Foot::right).size() == 1);
    }
    SECTION("events of one foot are never closer than the refractory period")
    {
        std::mt19937 rng(21);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<ImuSample> s(3000, still());
            for (std::size_t i = 0; i < s.size(); ++i) {
                s[i].t_rx = 10.0 * static_cast<double>(i);
                if (rng() % 12 == 0) s[i].acc = {0, 0, 1.0 + static_cast<double>(rng() % 100) / 50.0};
            }
            const auto ev = detect_step(s, Foot::left);
            for (std::size_t i = 1; i < ev.size(); ++i) REQUIRE(ev[i].t - ev[i - 1].t >= 300.0);
        }
    }
}

TEST_CASE("flexion cues match the profile crossings")
{
    sim::MotionProfile p;
    p.kind = sim::ProfileKind::sts;
    p.duration = 15.0;
    p.sts_peak = 45.0;
    p.crossing_deg = 30.0;
    const auto g = sim::generate_profile(p);
    const auto s = resample(g.frames, sim::kTrunk);
    TiltEstimator est;
    mapping::FlexionCueDetector cues(30.0, 30.0, 2.0);
    std::vector<double> stand;
    for (const auto& x : s)
        if (cues.update(est.update(x).ap).stand_cue) stand.push_back(x.t_rx);
    REQUIRE(stand.size() == g.truth.crossings.size());
    REQUIRE(stand.size() == 3);
    for (std::size_t i = 0; i < stand.size(); ++i) REQUIRE(std::abs(stand[i] - g.truth.crossings[i]) <= 30.0);
}
