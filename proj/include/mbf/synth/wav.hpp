#pragma once

// 16-bit PCM stereo WAV at 48 kHz. Sizes are patched into the header on close.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mbf/synth/renderer.hpp"

namespace mbf::synth {

MBF_DEFINE_ERROR(WavError);

class WavWriter {
public:
    explicit WavWriter(const std::filesystem::path& path) : out_(path, std::ios::binary)
    {
        if (!out_) throw WavError("cannot open " + path.string());
        write_header(0);
        buf_.reserve(static_cast<std::size_t>(kBlockFrames) * 2);
    }

    WavWriter(const WavWriter&) = delete;
    WavWriter& operator=(const WavWriter&) = delete;
    ~WavWriter() { close(); }

    void write(const AudioBlock& b)
    {
        buf_.clear();
        for (std::size_t i = 0; i < static_cast<std::size_t>(kBlockFrames); ++i) {
            buf_.push_back(to_pcm(b.left[i]));
            buf_.push_back(to_pcm(b.right[i]));
        }
        out_.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size() * 2));
        frames_ += static_cast<std::uint32_t>(kBlockFrames);
    }

    void close()
    {
        if (!out_.is_open()) return;
        out_.seekp(0);
        write_header(frames_);
        out_.close();
    }

    std::uint32_t frames() const { return frames_; }

    static std::int16_t to_pcm(float x)
    {
        const double v = std::clamp(static_cast<double>(x), -1.0, 1.0) * 32767.0;
        return static_cast<std::int16_t>(std::lround(v));
    }

private:
    template <typename T>
    void put(T v)
    {
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
    }

    void write_header(std::uint32_t frames)
    {
        const std::uint32_t data_bytes = frames * 4;
        out_.write("RIFF", 4);
        put<std::uint32_t>(36 + data_bytes);
        out_.write("WAVEfmt ", 8);
        put<std::uint32_t>(16);
        put<std::uint16_t>(1);  // PCM
        put<std::uint16_t>(2);
        put<std::uint32_t>(static_cast<std::uint32_t>(kSampleRate));
        put<std::uint32_t>(static_cast<std::uint32_t>(kSampleRate) * 4);
        put<std::uint16_t>(4);
        put<std::uint16_t>(16);
        out_.write("data", 4);
        put<std::uint32_t>(data_bytes);
    }

    std::ofstream out_;
    std::vector<std::int16_t> buf_;
    std::uint32_t frames_ = 0;
};

}  // namespace mbf::synth
