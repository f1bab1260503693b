#pragma once

// 100 Hz session log as CSV. The first line carries the schema version, the
// second the column names. Raw sensor values are kept so a log can be
// replayed through the simulator.

#include <array>
#include <atomic>
#include <charconv>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "mbf/common.hpp"
#include "mbf/session/mode.hpp"
#include "mbf/spsc.hpp"
#include "mbf/transport/osc.hpp"

namespace mbf::session {

MBF_DEFINE_ERROR(LogFormatError);

inline constexpr int kLogSchemaVersion = 1;
inline constexpr std::string_view kLogSchemaLine = "# mbf-session-log schema=1";
inline constexpr TimeMs kLogPeriodMs = 10.0;  // one row per mapping tick

enum class CueFlag : std::uint8_t { none = 0, sit = 1, stand = 2, both = 3 };
enum class StepFlag : std::uint8_t { none, left, right };

struct RawSensor {
    Vec3 acc{0.0, 0.0, 1.0};
    Vec3 gyro{};
    bool operator==(const RawSensor&) const = default;
};

struct LogRow {
    TimeMs t = 0.0;
    Mode mode = Mode::static_balance;
    bool standby = false;
    bool sensor_offline = false;
    std::array<RawSensor, 3> raw{};
    double tilt_ml = 0.0, tilt_ap = 0.0;
    double pos_ml = 0.0, pos_ap = 0.0;
    double jerk_sq = 0.0;
    double flexion = 0.0;
    double fv = 0.0;   // primary feedback variable (ML axis in trunk control)
    double fv2 = 0.0;  // secondary (AP axis in trunk control), else equal to fv
    int zone = 0;
    double target_ml = 0.0, target_ap = 0.0;
    StepFlag step = StepFlag::none;
    double step_interval_ms = 0.0;
    CueFlag cue = CueFlag::none;
    int rep_count = 0;
    double tempo = 120.0;
    double beat = 0.0;
};

inline constexpr std::array<std::string_view, 39> kLogColumns{
    "t_ms",     "mode",      "standby",   "sensor_offline",
    "trunk_ax", "trunk_ay",  "trunk_az",  "trunk_gx",  "trunk_gy",  "trunk_gz",
    "left_ax",  "left_ay",   "left_az",   "left_gx",   "left_gy",   "left_gz",
    "right_ax", "right_ay",  "right_az",  "right_gx",  "right_gy",  "right_gz",
    "tilt_ml",  "tilt_ap",   "pos_ml",    "pos_ap",    "jerk_sq",   "flexion",
    "fv",       "fv2",       "zone",      "target_ml", "target_ap", "step",
    "step_interval_ms",      "cue",       "rep_count", "tempo",     "beat"};

inline std::string_view to_string(StepFlag s)
{
    switch (s) {
    case StepFlag::left: return "left";
    case StepFlag::right: return "right";
    default: return "";
    }
}

inline std::string_view to_string(CueFlag c)
{
    switch (c) {
    case CueFlag::sit: return "sit";
    case CueFlag::stand: return "stand";
    case CueFlag::both: return "sit+stand";
    default: return "";
    }
}

inline std::string log_header()
{
    std::string h(kLogSchemaLine);
    h += '\n';
    for (std::size_t i = 0; i < kLogColumns.size(); ++i) {
        if (i) h += ',';
        h += kLogColumns[i];
    }
    h += '\n';
    return h;
}

inline void format_row(std::string& out, const LogRow& r)
{
    auto it = std::back_inserter(out);
    fmt::format_to(it, "{:.3f},{},{:d},{:d}", r.t, to_string(r.mode), r.standby ? 1 : 0, r.sensor_offline ? 1 : 0);
    for (const auto& s : r.raw)
        fmt::format_to(it, ",{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}", s.acc.x, s.acc.y, s.acc.z, s.gyro.x, s.gyro.y,
                       s.gyro.z);
    fmt::format_to(it, ",{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{},{:.9g},{:.9g},{},{:.3f},{},{},{:.9g},{:.9g}\n",
                   r.tilt_ml, r.tilt_ap, r.pos_ml, r.pos_ap, r.jerk_sq, r.flexion, r.fv, r.fv2, r.zone, r.target_ml,
                   r.target_ap, to_string(r.step), r.step_interval_ms, to_string(r.cue), r.rep_count, r.tempo, r.beat);
}

namespace detail {

inline double to_double(std::string_view s, int line)
{
    if (s.empty()) return 0.0;
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw LogFormatError("line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    return out;
}

}  // namespace detail

inline LogRow parse_row(std::string_view line, int line_no)
{
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto f = detail::split_csv(line);
    if (f.size() != kLogColumns.size())
        throw LogFormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(kLogColumns.size()) +
                             " columns, got " + std::to_string(f.size()));
    auto num = [&](std::size_t i) { return detail::to_double(f[i], line_no); };
    LogRow r;
    r.t = num(0);
    const auto m = parse_mode(f[1]);
    if (!m) throw LogFormatError("line " + std::to_string(line_no) + ": unknown mode");
    r.mode = *m;
    r.standby = num(2) != 0.0;
    r.sensor_offline = num(3) != 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
        const std::size_t b = 4 + 6 * s;
        r.raw[s].acc = {num(b), num(b + 1), num(b + 2)};
        r.raw[s].gyro = {num(b + 3), num(b + 4), num(b + 5)};
    }
    r.tilt_ml = num(22);
    r.tilt_ap = num(23);
    r.pos_ml = num(24);
    r.pos_ap = num(25);
    r.jerk_sq = num(26);
    r.flexion = num(27);
    r.fv = num(28);
    r.fv2 = num(29);
    r.zone = static_cast<int>(num(30));
    r.target_ml = num(31);
    r.target_ap = num(32);
    r.step = f[33] == "left" ? StepFlag::left : f[33] == "right" ? StepFlag::right : StepFlag::none;
    r.step_interval_ms = num(34);
    r.cue = f[35] == "sit" ? CueFlag::sit : f[35] == "stand" ? CueFlag::stand
          : f[35] == "sit+stand" ? CueFlag::both : CueFlag::none;
    r.rep_count = static_cast<int>(num(36));
    r.tempo = num(37);
    r.beat = num(38);
    return r;
}

inline std::vector<LogRow> read_log(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw LogFormatError("cannot open log " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("# mbf-session-log", 0) != 0)
        throw LogFormatError("missing schema header");
    if (line.find("schema=" + std::to_string(kLogSchemaVersion)) == std::string::npos)
        throw LogFormatError("unsupported log schema: " + line);
    if (!std::getline(in, line)) throw LogFormatError("missing column header");
    std::vector<LogRow> rows;
    int n = 2;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        rows.push_back(parse_row(line, n));
    }
    return rows;
}

// Rows are queued from the 100 Hz tick without blocking and written by a
// background thread.
class LogWriter {
public:
    explicit LogWriter(const std::filesystem::path& path) : out_(path)
    {
        if (!out_) throw LogFormatError("cannot open " + path.string());
        out_ << log_header();
        thread_ = std::thread([this] { run(); });
    }
    LogWriter(const LogWriter&) = delete;
    LogWriter& operator=(const LogWriter&) = delete;
    ~LogWriter() { close(); }

    // Real-time safe; returns false if the queue overflowed (row dropped).
    bool push(const LogRow& r)
    {
        if (!queue_.push(r)) {
            dropped_.fetch_add(1, std::memory_order_relaxed);
            return false;
        }
        return true;
    }

    void close()
    {
        if (!thread_.joinable()) return;
        {
            std::lock_guard lk(m_);
            stop_ = true;
        }
        cv_.notify_one();
        thread_.join();
        out_.flush();
    }

    std::uint64_t written() const { return written_.load(); }
    std::uint64_t dropped() const { return dropped_.load(); }

private:
    void drain(std::string& buf)
    {
        while (auto r = queue_.pop()) {
            format_row(buf, *r);
            written_.fetch_add(1, std::memory_order_relaxed);
        }
        if (!buf.empty()) {
            out_ << buf;
            out_.flush();  // /log.csv may be downloaded mid-session
            buf.clear();
        }
    }

    void run()
    {
        std::string buf;
        for (;;) {
            {
                std::unique_lock lk(m_);
                cv_.wait_for(lk, std::chrono::milliseconds(20), [&] { return stop_ || !queue_.empty(); });
                if (stop_) break;
            }
            drain(buf);
        }
        drain(buf);
    }

    std::ofstream out_;
    SpscQueue<LogRow, 4096> queue_;
    std::mutex m_;
    std::condition_variable cv_;
    bool stop_ = false;
    std::atomic<std::uint64_t> written_{0};
    std::atomic<std::uint64_t> dropped_{0};
    std::thread thread_;
};

}  // namespace mbf::session
