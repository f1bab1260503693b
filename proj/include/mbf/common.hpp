#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mbf {

// Milliseconds on the engine's monotonic time base.
using TimeMs = double;

inline constexpr double kGravity = 9.81;  // m/s^2 per g
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDegPerRad = 180.0 / kPi;

inline TimeMs monotonic_now_ms()
{
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr bool operator==(const Vec3&) const = default;

    constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    constexpr double norm_sq() const { return x * x + y * y + z * z; }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

// 2-D point in the horizontal projection plane: (mediolateral, anteroposterior) degrees.
struct Point2 {
    double ml = 0.0;
    double ap = 0.0;
    constexpr bool operator==(const Point2&) const = default;
};

// Base for all recoverable errors raised by the library. `code()` is the
// stable error name used on the wire and in logs.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define MBF_DEFINE_ERROR(Name)                                                 \
    class Name : public ::mbf::Error {                                         \
    public:                                                                    \
        explicit Name(const std::string& what) : ::mbf::Error(#Name, what) {}  \
    }

template <typename T>
constexpr T clamp01(T v) { return v < T(0) ? T(0) : (v > T(1) ? T(1) : v); }

}  // namespace mbf
