#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <thread>

#include "mbf/sim/profile.hpp"
#include "mbf/transport/udp.hpp"

namespace mbf::sim {

struct StreamOptions {
    std::string host = "127.0.0.1";
    std::array<int, kSlots> ports{8001, 8002, 8003};
    double rate_scale = 1.0;
    double drop_fraction = 0.0;
    std::uint64_t seed = 1;
    std::uint8_t slot_mask = 0b111;
    const std::atomic<bool>* stop = nullptr;
    // Called after each frame is sent with its index and the send time (monotonic ms).
    std::function<void(std::size_t, TimeMs)> on_frame;
};

struct StreamStats {
    std::size_t sent = 0;
    std::size_t dropped = 0;
    TimeMs wall_ms = 0.0;
    TimeMs origin_ms = 0.0;  // monotonic time at which profile t = 0 was due
};

// Frame k goes out at start + t_k / rate_scale. Same frames and seed give the
// same datagram sequence.
inline StreamStats stream_profile(std::span<const SimFrame> frames, const StreamOptions& opt)
{
    if (!(opt.rate_scale > 0.0)) throw InvalidProfile("rate_scale must be positive");
    if (opt.drop_fraction < 0.0 || opt.drop_fraction >= 1.0) throw InvalidProfile("drop fraction must be in [0, 1)");
    transport::UdpSocket sock;
    std::mt19937_64 rng(opt.seed ^ 0xD50Fu);
    std::bernoulli_distribution drop(opt.drop_fraction);
    StreamStats st;
    const TimeMs start = monotonic_now_ms();
    const TimeMs t0 = frames.empty() ? 0.0 : frames.front().t;
    using clock = std::chrono::steady_clock;
    const auto origin = clock::now();
    st.origin_ms = std::chrono::duration<double, std::milli>(origin.time_since_epoch()).count();
    for (std::size_t k = 0; k < frames.size(); ++k) {
        if (opt.stop && opt.stop->load(std::memory_order_relaxed)) break;
        const auto due = origin + std::chrono::duration_cast<clock::duration>(
                                      std::chrono::duration<double, std::milli>((frames[k].t - t0) / opt.rate_scale));
        std::this_thread::sleep_until(due);
        for (std::size_t s = 0; s < kSlots; ++s) {
            if (!(opt.slot_mask & (1u << s))) continue;
            if (opt.drop_fraction > 0.0 && drop(rng)) {
                ++st.dropped;
                continue;
            }
            const auto bytes = transport::encode_osc_message(frames[k].sensors[s]);
            sock.send_to(opt.host, opt.ports[s], bytes);
            ++st.sent;
        }
        if (opt.on_frame) opt.on_frame(k, monotonic_now_ms());
    }
    st.wall_ms = monotonic_now_ms() - start;
    return st;
}

}  // namespace mbf::sim
