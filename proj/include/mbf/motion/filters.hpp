#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "mbf/biquad.hpp"

namespace mbf::motion {

MBF_DEFINE_ERROR(InvalidCutoff);
MBF_DEFINE_ERROR(InvalidFilterSpec);

inline constexpr int kButterworthOrder = 6;
inline constexpr int kMaxMedianLen = 31;

struct FilterSpec {
    int median_len = 5;
    double lp_cutoff = 5.0;  // Hz
    int lp_order = kButterworthOrder;
    double rate = 100.0;     // Hz

    bool operator==(const FilterSpec&) const = default;

    void validate() const
    {
        if (median_len < 1 || median_len % 2 == 0 || median_len > kMaxMedianLen)
            throw InvalidFilterSpec("median_len must be odd in [1, " + std::to_string(kMaxMedianLen) + "]");
        if (lp_order != kButterworthOrder) throw InvalidFilterSpec("only 6th-order lowpass is supported");
        if (!(rate > 0.0)) throw InvalidFilterSpec("rate must be positive");
        if (!(lp_cutoff > 0.0 && lp_cutoff < rate / 2.0))
            throw InvalidCutoff("cutoff must lie strictly between 0 and rate/2");
    }
};

using ButterworthCascade = std::array<Biquad, kButterworthOrder / 2>;

// 6th-order Butterworth lowpass as three second-order sections: analog
// prototype poles, cutoff prewarped, bilinear transform per conjugate pair.
inline ButterworthCascade design_butterworth(const FilterSpec& spec)
{
    spec.validate();
    const int n = spec.lp_order;
    const double k = std::tan(kPi * spec.lp_cutoff / spec.rate);
    const double k2 = k * k;
    ButterworthCascade out;
    for (int i = 0; i < n / 2; ++i) {
        // Pole pair at angle pi*(2i+1)/(2n) from the negative real axis; damping 2*zeta = 2 sin(theta).
        const double two_zeta = 2.0 * std::sin(kPi * (2 * i + 1) / (2.0 * n));
        const double a0 = 1.0 + two_zeta * k + k2;
        Biquad& s = out[static_cast<std::size_t>(i)];
        s.b0 = k2 / a0;
        s.b1 = 2.0 * k2 / a0;
        s.b2 = k2 / a0;
        s.a1 = 2.0 * (k2 - 1.0) / a0;
        s.a2 = (1.0 - two_zeta * k + k2) / a0;
        if (!s.stable()) throw InvalidCutoff("unstable section for cutoff " + std::to_string(spec.lp_cutoff));
    }
    return out;
}

inline std::complex<double> cascade_response(const ButterworthCascade& c, double freq, double fs)
{
    std::complex<double> h = 1.0;
    for (const auto& s : c) h *= s.response(freq, fs);
    return h;
}

class MedianFilter {
public:
    explicit MedianFilter(int len = 1) : len_(len)
    {
        if (len < 1 || len % 2 == 0 || len > kMaxMedianLen) throw InvalidFilterSpec("median_len must be odd");
    }

    double process(double x)
    {
        if (len_ == 1) return x;
        if (!primed_) {
            window_.fill(x);
            primed_ = true;
        }
        window_[static_cast<std::size_t>(head_)] = x;
        head_ = (head_ + 1) % len_;
        std::array<double, kMaxMedianLen> tmp;
        std::copy_n(window_.begin(), len_, tmp.begin());
        const auto mid = tmp.begin() + len_ / 2;
        std::nth_element(tmp.begin(), mid, tmp.begin() + len_);
        return *mid;
    }

    void reset() { primed_ = false; head_ = 0; }

private:
    int len_;
    int head_ = 0;
    bool primed_ = false;
    std::array<double, kMaxMedianLen> window_{};
};

// Median filter followed by the Butterworth cascade. Stateful, one sample
// per call; the first sample primes both stages to steady state.
class SignalConditioner {
public:
    explicit SignalConditioner(const FilterSpec& spec = {})
        : spec_(spec), median_(spec.median_len), lowpass_(design_butterworth(spec)) {}

    double process(double x)
    {
        const double m = median_.process(x);
        if (!primed_) {
            for (auto& s : lowpass_) s.prime(m);
            primed_ = true;
        }
        double y = m;
        for (auto& s : lowpass_) y = s.process(y);
        return y;
    }

    void process(std::span<const double> in, std::span<double> out)
    {
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = process(in[i]);
    }

    void reset()
    {
        median_.reset();
        for (auto& s : lowpass_) s.reset();
        primed_ = false;
    }

    const FilterSpec& spec() const { return spec_; }
    const ButterworthCascade& cascade() const { return lowpass_; }

private:
    FilterSpec spec_;
    MedianFilter median_;
    ButterworthCascade lowpass_;
    bool primed_ = false;
};

inline std::vector<double> condition_signal(std::span<const double> x, const FilterSpec& spec)
{
    SignalConditioner c(spec);
    std::vector<double> y(x.size());
    c.process(x, y);
    return y;
}

}  // namespace mbf::motion
