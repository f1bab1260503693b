#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace mbf::session {

enum class Mode { static_balance, reach, trunk_control, sts, gait_duration, gait_phase };

inline constexpr std::size_t kModeCount = 6;

inline constexpr std::array<std::string_view, kModeCount> kModeNames{
    "static_balance", "reach", "trunk_control", "sts", "gait_duration", "gait_phase"};

inline std::string_view to_string(Mode m) { return kModeNames[static_cast<std::size_t>(m)]; }

inline std::optional<Mode> parse_mode(std::string_view s)
{
    for (std::size_t i = 0; i < kModeNames.size(); ++i)
        if (kModeNames[i] == s) return static_cast<Mode>(i);
    return std::nullopt;
}

inline bool is_gait(Mode m) { return m == Mode::gait_duration || m == Mode::gait_phase; }

}  // namespace mbf::session
