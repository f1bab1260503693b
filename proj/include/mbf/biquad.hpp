#pragma once

#include <cmath>
#include <complex>

#include "mbf/common.hpp"

namespace mbf {

// Second-order section, transposed direct form II, a0 normalized to 1.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
    double s1 = 0.0, s2 = 0.0;

    double process(double x)
    {
        const double y = b0 * x + s1;
        s1 = b1 * x - a1 * y + s2;
        s2 = b2 * x - a2 * y;
        return y;
    }

    // Steady state for a constant input `v` (valid for any DC gain).
    void prime(double v)
    {
        const double y = v * dc_gain();
        s2 = b2 * v - a2 * y;
        s1 = b1 * v - a1 * y + s2;
    }

    void reset() { s1 = s2 = 0.0; }

    double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }

    std::complex<double> response(double freq, double fs) const
    {
        const auto z1 = std::polar(1.0, -2.0 * kPi * freq / fs);
        const auto z2 = z1 * z1;
        return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
    }

    bool stable() const { return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2; }
};

}  // namespace mbf
