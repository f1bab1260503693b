#pragma once

// OSC 1.0 encoding of the sensor wire message.
//
// Each sensor sends one message per sample to its own UDP port:
//
//   address  "/sensor/imu"   (null-terminated, padded to 4 bytes)
//   typetag  ",fffffff"      (null-terminated, padded to 4 bytes)
//   args     acc.x acc.y acc.z [g]  gyro.x gyro.y gyro.z [deg/s]  battery [0..1]
//            as big-endian float32
//
// Bundles are not accepted.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mbf/common.hpp"

namespace mbf::transport {

MBF_DEFINE_ERROR(MalformedPacket);

struct ImuSample {
    TimeMs t_rx = 0.0;
    Vec3 acc{0.0, 0.0, 1.0};
    Vec3 gyro{};
    double battery = 1.0;

    bool valid() const
    {
        return std::isfinite(t_rx) && acc.finite() && gyro.finite() && std::isfinite(battery) &&
               battery >= 0.0 && battery <= 1.0;
    }
    bool operator==(const ImuSample&) const = default;
};

inline constexpr std::string_view kImuAddress = "/sensor/imu";
inline constexpr std::string_view kImuTypeTag = ",fffffff";
inline constexpr std::size_t kImuArgCount = 7;

namespace detail {

constexpr std::size_t padded_string_size(std::size_t len) { return (len + 1 + 3) & ~std::size_t{3}; }

inline void put_padded_string(std::vector<std::uint8_t>& out, std::string_view s)
{
    out.insert(out.end(), s.begin(), s.end());
    out.resize(out.size() + padded_string_size(s.size()) - s.size(), 0);
}

inline void put_float_be(std::vector<std::uint8_t>& out, float f)
{
    const auto u = std::bit_cast<std::uint32_t>(f);
    out.push_back(static_cast<std::uint8_t>(u >> 24));
    out.push_back(static_cast<std::uint8_t>(u >> 16));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
    out.push_back(static_cast<std::uint8_t>(u));
}

inline float get_float_be(std::span<const std::uint8_t, 4> b)
{
    const std::uint32_t u = (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
                            (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
    return std::bit_cast<float>(u);
}

// Reads a padded OSC string starting at `pos`; advances pos past the padding.
inline std::string_view get_padded_string(std::span<const std::uint8_t> bytes, std::size_t& pos,
                                          const char* what)
{
    std::size_t end = pos;
    while (end < bytes.size() && bytes[end] != 0) ++end;
    if (end >= bytes.size()) throw MalformedPacket(std::string("unterminated ") + what);
    const std::size_t next = pos + padded_string_size(end - pos);
    if (next > bytes.size()) throw MalformedPacket(std::string("truncated ") + what);
    for (std::size_t i = end; i < next; ++i)
        if (bytes[i] != 0) throw MalformedPacket(std::string("bad padding after ") + what);
    std::string_view s(reinterpret_cast<const char*>(bytes.data() + pos), end - pos);
    pos = next;
    return s;
}

}  // namespace detail

inline constexpr std::size_t kImuMessageSize = detail::padded_string_size(kImuAddress.size()) +
                                               detail::padded_string_size(kImuTypeTag.size()) +
                                               4 * kImuArgCount;

inline std::vector<std::uint8_t> encode_osc_message(const ImuSample& s)
{
    std::vector<std::uint8_t> out;
    out.reserve(kImuMessageSize);
    detail::put_padded_string(out, kImuAddress);
    detail::put_padded_string(out, kImuTypeTag);
    for (int i = 0; i < 3; ++i) detail::put_float_be(out, static_cast<float>(s.acc[i]));
    for (int i = 0; i < 3; ++i) detail::put_float_be(out, static_cast<float>(s.gyro[i]));
    detail::put_float_be(out, static_cast<float>(s.battery));
    return out;
}

// Parses one datagram. The receive timestamp is supplied by the caller
// (the receiver stamps it at arrival).
inline ImuSample decode_osc_message(std::span<const std::uint8_t> bytes, TimeMs t_rx)
{
    if (bytes.size() % 4 != 0) throw MalformedPacket("payload length not a multiple of 4");
    if (!bytes.empty() && bytes[0] == '#') throw MalformedPacket("bundles are not supported");
    std::size_t pos = 0;
    if (detail::get_padded_string(bytes, pos, "address") != kImuAddress)
        throw MalformedPacket("unexpected address");
    if (detail::get_padded_string(bytes, pos, "typetag") != kImuTypeTag)
        throw MalformedPacket("unexpected typetag");
    if (bytes.size() - pos != 4 * kImuArgCount) throw MalformedPacket("argument payload size mismatch");

    double v[kImuArgCount];
    for (std::size_t i = 0; i < kImuArgCount; ++i, pos += 4)
        v[i] = detail::get_float_be(bytes.subspan(pos).first<4>());

    ImuSample s;
    s.t_rx = t_rx;
    s.acc = {v[0], v[1], v[2]};
    s.gyro = {v[3], v[4], v[5]};
    s.battery = v[6];
    if (!s.valid()) throw MalformedPacket("non-finite or out-of-range argument");
    return s;
}

inline ImuSample decode_osc_message(std::span<const std::uint8_t> bytes)
{
    return decode_osc_message(bytes, monotonic_now_ms());
}

}  // namespace mbf::transport
