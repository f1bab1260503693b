#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <limits>
#include <utility>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mbf/spsc.hpp"
#include "mbf/transport/osc.hpp"

namespace mbf::transport {

MBF_DEFINE_ERROR(SocketError);

inline constexpr int kSlotCount = 3;
inline constexpr TimeMs kDefaultOfflineTimeoutMs = 500.0;

enum class BodyLocation { trunk, left_leg, right_leg, unassigned };

inline const char* to_string(BodyLocation b)
{
    switch (b) {
    case BodyLocation::trunk: return "trunk";
    case BodyLocation::left_leg: return "left_leg";
    case BodyLocation::right_leg: return "right_leg";
    case BodyLocation::unassigned: return "unassigned";
    }
    return "unassigned";
}

struct SensorSlot {
    int slot_id = 1;
    int udp_port = 8001;
    BodyLocation body_location = BodyLocation::unassigned;
    bool online = false;
    TimeMs last_rx = -std::numeric_limits<double>::infinity();
    Vec3 gyro_bias{};
    Vec3 acc_bias{};
};

inline bool poll_sensor_status(SensorSlot& slot, TimeMs now,
                               TimeMs offline_timeout = kDefaultOfflineTimeoutMs)
{
    slot.online = (now - slot.last_rx) < offline_timeout;
    return slot.online;
}

// Per-slot handoff between the network receiver (writer) and the 100 Hz
// tick (reader). Counters only ever increase.
struct SensorInbox {
    LatestMailbox<ImuSample> mailbox;
    std::atomic<double> last_rx{-std::numeric_limits<double>::infinity()};
    std::atomic<std::uint64_t> received{0};
    std::atomic<std::uint64_t> malformed{0};

    void deliver(const ImuSample& s)
    {
        mailbox.write(s);
        last_rx.store(s.t_rx, std::memory_order_release);
        received.fetch_add(1, std::memory_order_relaxed);
    }

    void deliver_bytes(std::span<const std::uint8_t> bytes, TimeMs now)
    {
        try {
            deliver(decode_osc_message(bytes, now));
        } catch (const MalformedPacket&) {
            malformed.fetch_add(1, std::memory_order_relaxed);
        }
    }
};

class UdpSocket {
public:
    UdpSocket()
    {
        fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (fd_ < 0) throw SocketError(std::strerror(errno));
    }
    ~UdpSocket()
    {
        if (fd_ >= 0) ::close(fd_);
    }
    UdpSocket(UdpSocket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    UdpSocket& operator=(UdpSocket&& o) noexcept
    {
        if (this != &o) {
            if (fd_ >= 0) ::close(fd_);
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    UdpSocket(const UdpSocket&) = delete;
    UdpSocket& operator=(const UdpSocket&) = delete;

    void bind(const std::string& host, int port)
    {
        int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        int rcvbuf = 1 << 20;
        ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof(rcvbuf));
        sockaddr_in addr = make_addr(host, port);
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
            throw SocketError("bind " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    }

    int local_port() const
    {
        sockaddr_in addr{};
        socklen_t len = sizeof(addr);
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        return ntohs(addr.sin_port);
    }

    void send_to(const std::string& host, int port, std::span<const std::uint8_t> bytes)
    {
        sockaddr_in addr = make_addr(host, port);
        const auto n = ::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<sockaddr*>(&addr),
                                sizeof(addr));
        if (n < 0) throw SocketError(std::string("sendto: ") + std::strerror(errno));
    }

    // Non-blocking receive; returns the number of bytes or -1 when nothing is pending.
    long try_receive(std::span<std::uint8_t> buf)
    {
        const auto n = ::recv(fd_, buf.data(), buf.size(), MSG_DONTWAIT);
        return n < 0 ? -1 : static_cast<long>(n);
    }

    int fd() const { return fd_; }

private:
    static sockaddr_in make_addr(const std::string& host, int port)
    {
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<std::uint16_t>(port));
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
            throw SocketError("invalid IPv4 address: " + host);
        return addr;
    }

    int fd_ = -1;
};

// Listens on one UDP port per sensor slot and feeds the matching inbox.
// Runs on its own thread; stop() or destruction joins it.
class SensorReceiver {
public:
    SensorReceiver(std::span<SensorInbox> inboxes, std::span<const int> ports,
                   const std::string& host = "0.0.0.0")
        : inboxes_(inboxes)
    {
        if (inboxes.size() != ports.size()) throw SocketError("one port per inbox required");
        for (int port : ports) {
            UdpSocket s;
            s.bind(host, port);
            sockets_.push_back(std::move(s));
        }
        thread_ = std::thread([this] { run(); });
    }

    ~SensorReceiver() { stop(); }
    SensorReceiver(const SensorReceiver&) = delete;
    SensorReceiver& operator=(const SensorReceiver&) = delete;

    void stop()
    {
        stop_.store(true);
        if (thread_.joinable()) thread_.join();
    }

    int port(std::size_t i) const { return sockets_.at(i).local_port(); }

private:
    void run()
    {
        std::vector<pollfd> fds;
        for (const auto& s : sockets_) fds.push_back({s.fd(), POLLIN, 0});
        std::array<std::uint8_t, 2048> buf{};
        while (!stop_.load(std::memory_order_relaxed)) {
            if (::poll(fds.data(), fds.size(), 20) <= 0) continue;
            for (std::size_t i = 0; i < fds.size(); ++i) {
                if (!(fds[i].revents & POLLIN)) continue;
                long n;
                while ((n = sockets_[i].try_receive(buf)) >= 0)
                    inboxes_[i].deliver_bytes(std::span(buf.data(), static_cast<std::size_t>(n)),
                                              monotonic_now_ms());
            }
        }
    }

    std::span<SensorInbox> inboxes_;
    std::vector<UdpSocket> sockets_;
    std::atomic<bool> stop_{false};
    std::thread thread_;
};

}  // namespace mbf::transport
