#include <catch_amalgamated.hpp>

#include <thread>

#include "mbf/sim/stream.hpp"

using namespace mbf;
using namespace mbf::sim;

namespace {

double ml_deg(const Vec3& acc) { return std::atan2(acc.y, acc.z) * kDegPerRad; }
double ap_deg(const Vec3& acc) { return std::atan2(acc.x, acc.z) * kDegPerRad; }

struct Capture {
    std::array<transport::SensorInbox, kSlots> inboxes;
    std::unique_ptr<transport::SensorReceiver> rx;
    std::array<int, kSlots> ports{};

    Capture()
    {
        const std::array<int, kSlots> any{0, 0, 0};
        rx = std::make_unique<transport::SensorReceiver>(inboxes, any, "127.0.0.1");
        for (std::size_t i = 0; i < kSlots; ++i) ports[i] = rx->port(i);
    }

    std::uint64_t total() const
    {
        std::uint64_t n = 0;
        for (const auto& b : inboxes) n += b.received.load();
        return n;
    }

    void settle(std::uint64_t expected) const
    {
        for (int i = 0; i < 100 && total() < expected; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
    }
};

}  // namespace

TEST_CASE("zero sway is a level sensor")
{
    MotionProfile p;
    p.duration = 1.0;
    const auto g = generate_profile(p);
    REQUIRE(g.frames.size() == 125);
    for (const auto& f : g.frames) {
        REQUIRE(f.sensors[kTrunk].acc.x == 0.0);
        REQUIRE(f.sensors[kTrunk].acc.y == 0.0);
        REQUIRE(f.sensors[kTrunk].acc.z == 1.0);
        REQUIRE(f.sensors[kTrunk].gyro.norm() == 0.0);
    }
}

TEST_CASE("sinusoidal sway peaks at the quarter periods")
{
    MotionProfile p;
    p.sway_amp = 10.0;
    p.sway_freq = 0.25;
    p.duration = 4.0;
    const auto g = generate_profile(p);
    std::size_t hi = 0, lo = 0;
    for (std::size_t k = 0; k < g.frames.size(); ++k) {
        const double a = ml_deg(g.frames[k].sensors[kTrunk].acc);
        if (a > ml_deg(g.frames[hi].sensors[kTrunk].acc)) hi = k;
        if (a < ml_deg(g.frames[lo].sensors[kTrunk].acc)) lo = k;
        REQUIRE(std::abs(ap_deg(g.frames[k].sensors[kTrunk].acc)) < 1e-9);
        REQUIRE(g.frames[k].sensors[kTrunk].acc.norm() == Catch::Approx(1.0));
    }
    REQUIRE(g.frames[hi].t == Catch::Approx(1000.0).margin(kSamplePeriodMs));
    REQUIRE(g.frames[lo].t == Catch::Approx(3000.0).margin(kSamplePeriodMs));
    REQUIRE(ml_deg(g.frames[hi].sensors[kTrunk].acc) == Catch::Approx(10.0).margin(1e-3));
    // Gyro is the derivative: 2 pi f A cos(2 pi f t) deg/s at t = 0.
    REQUIRE(g.frames[0].sensors[kTrunk].gyro.x == Catch::Approx(2.0 * kPi * 0.25 * 10.0).margin(1e-4));
}

TEST_CASE("tilt offsets come out of the accelerometer")
{
    MotionProfile p;
    p.offset_ml = -7.0;
    p.offset_ap = 12.0;
    p.duration = 0.1;
    const auto acc = generate_profile(p).frames[0].sensors[kTrunk].acc;
    REQUIRE(ml_deg(acc) == Catch::Approx(-7.0));
    REQUIRE(ap_deg(acc) == Catch::Approx(12.0));
}

TEST_CASE("gait footfalls and spikes coincide")
{
    MotionProfile p;
    p.kind = ProfileKind::gait;
    p.duration = 12.0;
    p.cadence = 100.0;
    const auto g = generate_profile(p);
    REQUIRE(g.truth.footfalls.size() == 20);
    for (std::size_t i = 0; i < g.truth.footfalls.size(); ++i) {
        const auto& ff = g.truth.footfalls[i];
        REQUIRE(ff.foot == (i % 2 == 0 ? motion::Foot::left : motion::Foot::right));
        REQUIRE(std::abs(ff.t - (300.0 + 600.0 * static_cast<double>(i))) <= kSamplePeriodMs / 2.0);
    }
    // Every spike sample belongs to a footfall on the right leg.
    std::size_t spikes = 0;
    for (const auto& f : g.frames)
        for (auto slot : {kLeftLeg, kRightLeg})
            if (f.sensors[slot].acc.z > 1.5) {
                ++spikes;
                const auto foot = slot == kLeftLeg ? motion::Foot::left : motion::Foot::right;
                const bool matched = std::any_of(g.truth.footfalls.begin(), g.truth.footfalls.end(), [&](const Footfall& ff) {
                    return ff.foot == foot && f.t >= ff.t && f.t < ff.t + p.spike_samples * kSamplePeriodMs;
                });
                REQUIRE(matched);
            }
    REQUIRE(spikes == 20 * static_cast<std::size_t>(p.spike_samples));
}

TEST_CASE("generation is deterministic per seed")
{
    MotionProfile p;
    p.kind = ProfileKind::gait;
    p.jitter_ms = 40.0;
    p.acc_noise = 0.02;
    p.gyro_noise = 0.5;
    p.seed = 9;
    const auto a = generate_profile(p), b = generate_profile(p);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t k = 0; k < a.frames.size(); ++k)
        for (std::size_t s = 0; s < kSlots; ++s) REQUIRE(a.frames[k].sensors[s] == b.frames[k].sensors[s]);
    p.seed = 10;
    const auto c = generate_profile(p);
    REQUIRE_FALSE(c.frames[3].sensors[kTrunk] == a.frames[3].sensors[kTrunk]);
}

TEST_CASE("invalid profiles")
{
    MotionProfile p;
    p.sway_amp = 70.0;
    REQUIRE_THROWS_AS(generate_profile(p), InvalidProfile);
    p = {};
    p.kind = ProfileKind::gait;
    p.cadence = 200.0;
    REQUIRE_THROWS_AS(generate_profile(p), InvalidProfile);
    p = {};
    p.kind = ProfileKind::reach;
    p.reach_period = 1.0;
    REQUIRE_THROWS_AS(generate_profile(p), InvalidProfile);
}

TEST_CASE("reach and sts ground truth")
{
    MotionProfile p;
    p.kind = ProfileKind::reach;
    p.duration = 20.0;
    p.reach_count = 3;
    p.reach_angle = 40.0;
    const auto g = generate_profile(p);
    REQUIRE(g.truth.repetitions == 3);
    REQUIRE(g.truth.crossings.size() == 3);
    REQUIRE(g.truth.falling_crossings.size() == 3);
    // Raised cosine reaches 30 of 40 deg at u = rise * acos(-0.5) / pi = rise * 2/3.
    for (int k = 0; k < 3; ++k)
        REQUIRE(g.truth.crossings[static_cast<std::size_t>(k)] ==
                Catch::Approx(1000.0 * (1.0 + 4.0 * k + 0.5 * 2.0 / 3.0)).margin(1e-3));
}

TEST_CASE("one second of streaming sends 125 frames per sensor over loopback")
{
    MotionProfile p;
    p.duration = 1.0;
    const auto g = generate_profile(p);
    Capture cap;
    StreamOptions o;
    o.ports = cap.ports;
    o.slot_mask = 0b001;
    const auto st = stream_profile(g.frames, o);
    cap.settle(st.sent);
    REQUIRE(std::abs(static_cast<long>(cap.inboxes[kTrunk].received.load()) - 125) <= 1);
    REQUIRE(cap.inboxes[kTrunk].malformed.load() == 0);
    REQUIRE(st.wall_ms == Catch::Approx(992.0).margin(30.0));
}

TEST_CASE("rate scale compresses wall time")
{
    MotionProfile p;
    p.duration = 1.0;
    const auto g = generate_profile(p);
    Capture cap;
    StreamOptions o;
    o.ports = cap.ports;
    o.rate_scale = 10.0;
    const auto st = stream_profile(g.frames, o);
    REQUIRE(st.wall_ms <= 150.0);
    REQUIRE(st.sent == 375);
}

TEST_CASE("random drops thin the stream but keep the sensor online")
{
    MotionProfile p;
    p.duration = 2.0;
    const auto g = generate_profile(p);
    Capture cap;
    StreamOptions o;
    o.ports = cap.ports;
    o.slot_mask = 0b001;
    o.drop_fraction = 0.2;
    o.seed = 3;
    double max_gap = 0.0, last = -1.0;
    o.on_frame = [&](std::size_t, TimeMs now) {
        const double rx = cap.inboxes[kTrunk].last_rx.load();
        if (std::isfinite(rx)) {
            if (last >= 0.0) max_gap = std::max(max_gap, now - last);
            if (rx != last) last = rx;
        }
    };
    const auto st = stream_profile(g.frames, o);
    cap.settle(st.sent);
    const double rate = static_cast<double>(st.dropped) / 250.0;
    REQUIRE(rate == Catch::Approx(0.2).margin(0.06));
    REQUIRE(cap.inboxes[kTrunk].received.load() == st.sent);
    REQUIRE(max_gap < transport::kDefaultOfflineTimeoutMs);
}

TEST_CASE("stream options are validated")
{
    StreamOptions o;
    o.rate_scale = 0.0;
    REQUIRE_THROWS_AS(stream_profile({}, o), InvalidProfile);
    o.rate_scale = 1.0;
    o.drop_fraction = 1.0;
    REQUIRE_THROWS_AS(stream_profile({}, o), InvalidProfile);
}

TEST_CASE("replay plays one frame per logged tick")
{
    const auto path = std::filesystem::temp_directory_path() / "mbf_replay_test.csv";
    {
        session::LogWriter w(path);
        // Wall timestamps with a 17 ms stall and a catch-up tick.
        const std::array<double, 5> t{5000.3, 5010.2, 5027.4, 5030.1, 5040.2};
        for (std::size_t i = 0; i < t.size(); ++i) {
            session::LogRow r;
            r.t = t[i];
            r.raw[0].acc = {0.0, 0.01 * static_cast<double>(i), 1.0};
            w.push(r);
        }
    }
    MotionProfile p;
    p.kind = ProfileKind::replay;
    p.replay_path = path.string();
    const auto frames = generate_profile(p).frames;
    REQUIRE(frames.size() == 5);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        REQUIRE(frames[i].t == 10.0 * static_cast<double>(i));
        REQUIRE(frames[i].sensors[0].t_rx == frames[i].t);
        REQUIRE(frames[i].sensors[0].acc.y == Catch::Approx(0.01 * static_cast<double>(i)));
    }
    std::filesystem::remove(path);
}
