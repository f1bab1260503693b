#include <catch_amalgamated.hpp>

#include <random>

#include "mbf/mapping/feedback.hpp"

using namespace mbf;
using namespace mbf::mapping;

namespace {

MappingConfig random_config(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-50.0, 50.0), w(0.0, 20.0), g(0.1, 4.0);
    MappingConfig c;
    c.target_lo = u(rng);
    c.target_hi = c.target_lo + (rng() % 5 == 0 ? 0.0 : w(rng));
    c.bound_lo = c.target_lo - 0.5 - w(rng);
    c.bound_hi = c.target_hi + 0.5 + w(rng);
    c.gamma = g(rng);
    c.quant_levels = rng() % 3 == 0 ? static_cast<int>(rng() % 10) : 0;
    c.invert = rng() % 4 == 0;
    c.directional = rng() % 4 == 0;
    return c;
}

}  // namespace

TEST_CASE("inside the target range gives zero feedback for any gamma")
{
    for (double gamma : {0.5, 1.0, 2.0, 3.0})
        for (double x : {-2.0, -1.0, 0.0, 1.999, 2.0}) {
            MappingConfig c;
            c.gamma = gamma;
            REQUIRE(map_feedback_variable(x, c).value == 0.0);
        }
}

TEST_CASE("normalization endpoints and the gamma 2 example")
{
    MappingConfig c;
    REQUIRE(map_feedback_variable(20.0, c).value == 1.0);
    REQUIRE(map_feedback_variable(-20.0, c).value == 1.0);
    REQUIRE(map_feedback_variable(500.0, c).value == 1.0);
    c.gamma = 2.0;
    REQUIRE(compliance_error(11.0, c) == 0.5);
    REQUIRE(map_feedback_variable(11.0, c).value == 0.25);
}

TEST_CASE("invalid configs are rejected")
{
    MappingConfig c;
    c.gamma = 0.0;
    REQUIRE_THROWS_AS(map_feedback_variable(0.0, c), ConfigInvalid);
    c = {};
    c.target_lo = 3.0;
    REQUIRE_THROWS_AS(map_feedback_variable(0.0, c), ConfigInvalid);
    c = {};
    c.bound_hi = 2.0;
    REQUIRE_THROWS_AS(map_feedback_variable(0.0, c), ConfigInvalid);
    c = {};
    c.quant_levels = -1;
    REQUIRE_THROWS_AS(map_feedback_variable(0.0, c), ConfigInvalid);
}

TEST_CASE("output is in [0, 1] and monotone in distance outside the target")
{
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 2000; ++trial) {
        auto c = random_config(rng);
        c.invert = false;
        c.directional = false;
        double prev_hi = -1.0, prev_lo = -1.0;
        for (int i = 0; i <= 60; ++i) {
            const double d = (c.bound_hi - c.target_hi) * 1.2 * i / 60.0;
            const double up = map_feedback_variable(c.target_hi + d, c).value;
            const double down = map_feedback_variable(c.target_lo - d * (c.target_lo - c.bound_lo) /
                                                                       (c.bound_hi - c.target_hi), c).value;
            REQUIRE(up >= 0.0);
            REQUIRE(up <= 1.0);
            REQUIRE(up >= prev_hi);
            REQUIRE(down >= prev_lo);
            prev_hi = up;
            prev_lo = down;
        }
    }
}

TEST_CASE("inverted and plain outputs sum to one")
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> x(-100.0, 100.0);
    for (int i = 0; i < 20000; ++i) {
        auto c = random_config(rng);
        c.quant_levels = 0;
        c.invert = false;
        const double v = x(rng);
        const double a = map_feedback_variable(v, c).value;
        c.invert = true;
        REQUIRE(a + map_feedback_variable(v, c).value == Catch::Approx(1.0).margin(1e-15));
    }
}

TEST_CASE("quantized output only takes grid values")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> x(-100.0, 100.0);
    for (int i = 0; i < 20000; ++i) {
        auto c = random_config(rng);
        c.quant_levels = 1 + static_cast<int>(rng() % 9);
        c.directional = false;
        const double v = map_feedback_variable(x(rng), c).value * c.quant_levels;
        REQUIRE(std::abs(v - std::round(v)) < 1e-9);
    }
}

TEST_CASE("directional output is exactly neutral at the target center")
{
    std::mt19937_64 rng(4);
    for (int i = 0; i < 5000; ++i) {
        auto c = random_config(rng);
        c.directional = true;
        c.invert = false;
        const auto fv = map_feedback_variable(c.target_center(), c);
        REQUIRE(fv.value == 0.5);
        REQUIRE(fv.is_neutral());
        REQUIRE(map_feedback_variable(c.bound_hi, c).value > 0.5);
        REQUIRE(map_feedback_variable(c.bound_lo, c).value < 0.5);
    }
}

TEST_CASE("sigmoid pair")
{
    REQUIRE(sigmoid_pair(0.0, 1.0, 2.0) == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(sigmoid_pair(2.0, 1.0, 2.0) == Catch::Approx(0.7410).margin(1e-4));
    REQUIRE(sigmoid_pair(2.0, 1.0, 2.0) == Catch::Approx(0.5 * (0.5 + 1.0 / (1.0 + std::exp(-4.0)))).margin(1e-15));
    REQUIRE(sigmoid_pair(1e3, 1.0, 2.0) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(sigmoid_pair(-1e3, 1.0, 2.0) == Catch::Approx(0.0).margin(1e-12));
    for (double d = -10.0; d <= 10.0; d += 0.25)
        REQUIRE(sigmoid_pair(d, 1.3, 1.5) + sigmoid_pair(-d, 1.3, 1.5) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("step timing error")
{
    REQUIRE(step_timing_error(1000.0, 1000.0, 50.0) == 0.0);
    REQUIRE(step_timing_error(960.0, 1000.0, 50.0) == 0.0);
    REQUIRE(step_timing_error(1100.0, 1000.0, 50.0) == Catch::Approx(0.05).margin(1e-15));
    REQUIRE(step_timing_error(900.0, 1000.0, 50.0) == Catch::Approx(-0.05).margin(1e-15));
    REQUIRE(step_timing_error(5000.0, 1000.0, 50.0) == 1.0);
    REQUIRE(step_timing_error(1.0, 1000.0, 0.0) == Catch::Approx(-0.999));
}

TEST_CASE("reach scale degree")
{
    REQUIRE(reach_scale_degree(0.0, {0.0, 30.0}, 8) == 0);
    REQUIRE(reach_scale_degree(30.0, {0.0, 30.0}, 8) == 7);
    REQUIRE(reach_scale_degree(14.0, {0.0, 30.0}, 8) == 3);
    REQUIRE(reach_scale_degree(-5.0, {0.0, 30.0}, 8) == 0);
    REQUIRE(reach_scale_degree(99.0, {0.0, 30.0}, 8) == 7);
    REQUIRE_THROWS_AS(reach_scale_degree(1.0, {3.0, 3.0}, 8), ConfigInvalid);
    REQUIRE_THROWS_AS(reach_scale_degree(1.0, {0.0, 3.0}, 1), ConfigInvalid);
}

TEST_CASE("hysteresis trigger and flexion cues")
{
    SECTION("monotone rise gives one cue")
    {
        FlexionCueDetector d(20.0, 30.0, 2.0);
        int sit = 0, stand = 0;
        for (double a = 0.0; a <= 60.0; a += 0.5) {
            const auto c = d.update(a);
            sit += c.sit_cue;
            stand += c.stand_cue;
        }
        REQUIRE(stand == 1);
        REQUIRE(sit == 1);
    }
    SECTION("oscillation inside the hysteresis band gives one cue")
    {
        FlexionCueDetector d(30.0, 30.0, 2.0);
        int stand = 0;
        for (int i = 0; i < 400; ++i) stand += d.update(30.0 + std::sin(i * 0.3)).stand_cue;
        REQUIRE(stand == 1);
    }
    SECTION("leaving the band re-arms")
    {
        HysteresisTrigger t(15.0, 5.0);
        int n = 0;
        for (int rep = 0; rep < 4; ++rep) {
            for (double a = 0.0; a <= 20.0; a += 1.0) n += t.update(a);
            for (double a = 20.0; a >= 0.0; a -= 1.0) n += t.update(a);
        }
        REQUIRE(n == 4);
    }
}
