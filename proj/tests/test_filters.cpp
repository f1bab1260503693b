#include <catch_amalgamated.hpp>

#include <complex>
#include <random>

#include "mbf/motion/filters.hpp"

using namespace mbf;
using namespace mbf::motion;
using cd = std::complex<double>;

namespace {

// Direct analog-prototype design: poles of the 6th-order Butterworth on the
// prewarped circle, mapped one by one through the bilinear transform.
std::vector<cd> oracle_poles(double fc, double fs)
{
    const double wc = 2.0 * fs * std::tan(kPi * fc / fs);
    std::vector<cd> z;
    for (int k = 0; k < 6; ++k) {
        const cd s = wc * std::exp(cd(0.0, kPi * (2.0 * k + 6 + 1) / 12.0));
        z.push_back((1.0 + s / (2.0 * fs)) / (1.0 - s / (2.0 * fs)));
    }
    return z;
}

cd oracle_response(double fc, double fs, double f)
{
    const auto poles = oracle_poles(fc, fs);
    auto raw = [&](cd z) {
        cd h = std::pow(z + 1.0, 6);
        for (const auto& p : poles) h /= (z - p);
        return h;
    };
    const cd z = std::exp(cd(0.0, 2.0 * kPi * f / fs));
    return raw(z) / raw(1.0);
}

double db(double v) { return 20.0 * std::log10(v); }

}  // namespace

TEST_CASE("Butterworth cascade: unit DC gain, -3.01 dB at cutoff, stable over the valid range")
{
    for (double fc = 0.5; fc < 50.0; fc += 0.5) {
        const auto c = design_butterworth({1, fc});
        INFO("fc = " << fc);
        REQUIRE(std::abs(cascade_response(c, 0.0, 100.0) - 1.0) < 1e-9);
        REQUIRE(db(std::abs(cascade_response(c, fc, 100.0))) == Catch::Approx(-3.0103).margin(0.1));
        for (const auto& s : c) REQUIRE(s.stable());
    }
}

TEST_CASE("Butterworth cascade matches the direct pole-by-pole design")
{
    for (double fc : {1.0, 5.0, 8.0, 10.0, 30.0, 45.0}) {
        const auto c = design_butterworth({1, fc});
        // Pole pairs: a1 = -2 Re p, a2 = |p|^2, compared as sorted sets.
        std::vector<std::pair<double, double>> got, want;
        for (const auto& s : c) got.emplace_back(s.a2, s.a1);
        for (const auto& p : oracle_poles(fc, 100.0))
            if (p.imag() > 0.0) want.emplace_back(std::norm(p), -2.0 * p.real());
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            REQUIRE(got[i].first == Catch::Approx(want[i].first).margin(1e-9));
            REQUIRE(got[i].second == Catch::Approx(want[i].second).margin(1e-9));
        }
        for (double f = 0.0; f < 50.0; f += 0.73)
            REQUIRE(std::abs(cascade_response(c, f, 100.0) - oracle_response(fc, 100.0, f)) < 1e-9);
    }
}

TEST_CASE("5 Hz design agrees with reference SOS coefficients")
{
    // Reference: 6th-order Butterworth lowpass, 5 Hz at 100 Hz, second-order sections.
    const std::vector<std::pair<double, double>> ref{{-1.4648681939512453, 0.54025356942786973},
                                                     {-1.5610180758007182, 0.64135153805756306},
                                                     {-1.7612492291001696, 0.85188703186759773}};
    const auto c = design_butterworth({1, 5.0});
    double b0 = 1.0;
    for (const auto& s : c) {
        b0 *= s.b0;
        REQUIRE(s.b1 == Catch::Approx(2.0 * s.b0).epsilon(1e-12));
        REQUIRE(s.b2 == Catch::Approx(s.b0).epsilon(1e-12));
        const auto it = std::min_element(ref.begin(), ref.end(),
                                         [&](auto x, auto y) { return std::abs(x.second - s.a2) < std::abs(y.second - s.a2); });
        REQUIRE(std::abs(s.a1 - it->first) < 1e-6);
        REQUIRE(std::abs(s.a2 - it->second) < 1e-6);
    }
    REQUIRE(std::abs(b0 - 8.5765570732594045e-06) < 1e-6 * 8.5765570732594045e-06);
}

TEST_CASE("invalid specs are rejected")
{
    REQUIRE_THROWS_AS(design_butterworth({1, 0.0}), InvalidCutoff);
    REQUIRE_THROWS_AS(design_butterworth({1, 50.0}), InvalidCutoff);
    REQUIRE_THROWS_AS(design_butterworth({1, -3.0}), InvalidCutoff);
    REQUIRE_THROWS_AS(design_butterworth({4, 5.0}), InvalidFilterSpec);
    REQUIRE_THROWS_AS(design_butterworth({0, 5.0}), InvalidFilterSpec);
    FilterSpec wrong_order;
    wrong_order.lp_order = 4;
    REQUIRE_THROWS_AS(wrong_order.validate(), InvalidFilterSpec);
}

TEST_CASE("constant input settles to the same constant")
{
    std::vector<double> x(300, 3.25);
    const auto y = condition_signal(x, {5, 5.0});
    REQUIRE(y.back() == Catch::Approx(3.25).margin(1e-12));
    // A step also settles.
    std::vector<double> step(400, 0.0);
    std::fill(step.begin() + 100, step.end(), -2.0);
    REQUIRE(condition_signal(step, {5, 5.0}).back() == Catch::Approx(-2.0).margin(1e-9));
}

TEST_CASE("median stage removes a single-sample spike before the lowpass")
{
    std::vector<double> x(200, 1.0);
    x[100] = 50.0;
    const auto y = condition_signal(x, {5, 5.0});
    for (double v : y) REQUIRE(v == Catch::Approx(1.0).margin(1e-12));

    MedianFilter m(5);
    std::vector<double> two(20, 0.0);
    two[8] = two[9] = 7.0;
    for (double v : two) REQUIRE(m.process(v) == 0.0);
}

TEST_CASE("20 Hz sinusoid through the 5 Hz filter is at least 48 dB down")
{
    std::vector<double> x(3000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * kPi * 20.0 * static_cast<double>(i) / 100.0);
    const auto y = condition_signal(x, {1, 5.0});
    double peak = 0.0;
    for (std::size_t i = 1000; i < y.size(); ++i) peak = std::max(peak, std::abs(y[i]));
    REQUIRE(db(peak) <= -48.0);
}

TEST_CASE("conditioning a stream in two chunks equals conditioning it whole")
{
    std::mt19937 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(257);
        for (auto& v : x) v = n(rng);
        const FilterSpec spec{static_cast<int>(1 + 2 * (rng() % 4)), 1.0 + static_cast<double>(rng() % 40)};
        const auto whole = condition_signal(x, spec);
        const std::size_t cut = rng() % x.size();
        SignalConditioner c(spec);
        std::vector<double> parts(x.size());
        c.process(std::span(x).first(cut), std::span(parts).first(cut));
        c.process(std::span(x).subspan(cut), std::span(parts).subspan(cut));
        REQUIRE(parts == whole);
    }
}
