#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nkiso/profiles.hpp"
#include "support.hpp"

using namespace nkiso;
using testsupport::code_of;
using testsupport::uniform;

namespace {

constexpr double pi = std::numbers::pi;
const double rt2 = std::sqrt(2.0);

// Trapezoid mean over one period; exact for trig polynomials of degree < m.
double mean(const TrigPoly& p) {
    const int m = 256;
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += p.eval(2 * pi * i / m);
    return s / m;
}

// Central difference with Richardson extrapolation, independent of the
// symbolic derivative.
double numeric_derivative(const TrigPoly& p, double t) {
    auto d = [&](double h) { return (p.eval(t + h) - p.eval(t - h)) / (2 * h); };
    return (4 * d(1e-3) - d(2e-3)) / 3;
}

}  // namespace

TEST_CASE("level zero matches the defining formulas") {
    for (int trial = 0; trial < 200; ++trial) {
        const double t = uniform(-10, 10);
        CHECK(profile_base(ProfileKind::nash_gamma).eval(t) == doctest::Approx(std::sin(t)).epsilon(1e-15));
        CHECK(profile_base(ProfileKind::nash_gammabar).eval(t) == doctest::Approx(std::cos(t)).epsilon(1e-15));
        CHECK(std::abs(profile_base(ProfileKind::kuiper_gamma).eval(t) - rt2 * std::sin(t)) <= 1e-15);
        CHECK(std::abs(profile_base(ProfileKind::kuiper_gammabar).eval(t) + 0.25 * std::sin(2 * t)) <= 1e-15);
        const double G = rt2 * std::sin(t);
        CHECK(std::abs(profile_base(ProfileKind::kuiper_ddbar).eval(t) - (G * G - 1)) <= 1e-14);
        CHECK(std::abs(profile_base(ProfileKind::product_gammagammaprime).eval(t) - G * rt2 * std::cos(t)) <= 1e-14);
    }
}

TEST_CASE("tower examples") {
    const auto kg = build_tower(ProfileKind::kuiper_gamma, 1);
    CHECK(kg.level(1) == TrigPoly{0.0, {{1, 0.0, -rt2}}});

    const auto dd = build_tower(ProfileKind::kuiper_ddbar, 2);
    CHECK(dd.level(1) == TrigPoly{0.0, {{2, -0.5, 0.0}}});
    CHECK(dd.level(2) == TrigPoly{0.0, {{2, 0.0, 0.25}}});

    const auto pg = build_tower(ProfileKind::product_gammagammaprime, 3);
    CHECK(pg.level(1) == TrigPoly{0.0, {{2, 0.0, -0.5}}});
    CHECK(pg.level(2) == TrigPoly{0.0, {{2, -0.25, 0.0}}});
    CHECK(pg.level(3) == TrigPoly{0.0, {{2, 0.0, 0.125}}});
}

TEST_CASE("towers satisfy the primitive recursion and have zero mean") {
    const ProfileKind kinds[] = {ProfileKind::nash_gamma,      ProfileKind::nash_gammabar, ProfileKind::kuiper_gamma,
                                 ProfileKind::kuiper_gammabar, ProfileKind::kuiper_ddbar,  ProfileKind::product_gammagammaprime};
    for (auto k : kinds) {
        const auto tw = build_tower(k, 8);
        CAPTURE(profile_name(k));
        for (int i = 0; i <= 8; ++i) {
            CHECK(tw.level(i).constant == 0.0);
            CHECK(std::abs(mean(tw.level(i))) <= 1e-15);
            if (i >= 1) CHECK(tw.level(i).derivative() == tw.level(i - 1));
        }
        for (int trial = 0; trial < 20; ++trial) {
            const double t = uniform(0, 2 * pi);
            for (int i = 1; i <= 4; ++i)
                CHECK(std::abs(numeric_derivative(tw.level(i), t) - tw.eval(i - 1, t)) <= 1e-8);
            CHECK(std::abs(numeric_derivative(tw.level(0), t) - tw.eval(-1, t)) <= 1e-8);
        }
    }
}

TEST_CASE("tower errors") {
    TrigPoly shifted = profile_base(ProfileKind::nash_gamma);
    shifted.constant = 0.1;
    CHECK(code_of([&] { build_tower("shifted", shifted, 1); }) == "unbounded-primitive");
    CHECK(code_of([&] { shifted.antiderivative(); }) == "unbounded-primitive");
    CHECK(code_of([] { build_tower(ProfileKind::nash_gamma, 65); }) == "invalid-depth");
    const auto tw = build_tower(ProfileKind::nash_gamma, 2);
    CHECK(code_of([&] { tw.level(3); }) == "level-out-of-range");
    CHECK_NOTHROW(tw.level(-6));
}

TEST_CASE("eval examples") {
    const auto kg = build_tower(ProfileKind::kuiper_gamma, 0);
    CHECK(kg.eval(0, pi / 2) == doctest::Approx(rt2).epsilon(1e-15));
    const auto kb = build_tower(ProfileKind::kuiper_gammabar, 0);
    CHECK(kb.eval(-1, 0.0) == doctest::Approx(-0.5).epsilon(1e-15));
    const double gp = kg.eval(-1, 0.0);
    CHECK(gp * gp + 2 * kb.eval(-1, 0.0) == doctest::Approx(1.0).epsilon(1e-15));

    const auto g = GridSpec::make(17);
    const Field t = Field::scalar(g, [](double x, double y) { return x + 2 * y; });
    const Field v = kb.eval(-1, 3.0, t);
    for (int j = 0; j < g.n; j += 4)
        for (int i = 0; i < g.n; i += 4)
            CHECK(v(0, i, j) == doctest::Approx(-0.5 * std::cos(2 * 3.0 * (g.x(i) + 2 * g.x(j)))).epsilon(1e-14));
}

TEST_CASE("step identities at random phases") {
    const auto ng = build_tower(ProfileKind::nash_gamma, 0), nb = build_tower(ProfileKind::nash_gammabar, 0);
    const auto kg = build_tower(ProfileKind::kuiper_gamma, 0), kb = build_tower(ProfileKind::kuiper_gammabar, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double t = uniform(-50, 50);
        const double G = ng.eval(0, t), Gp = ng.eval(-1, t), B = nb.eval(0, t), Bp = nb.eval(-1, t);
        worst = std::max(worst, std::abs(Gp * Gp + Bp * Bp - 1));
        worst = std::max(worst, std::abs(G * Gp + B * Bp));
        worst = std::max(worst, std::abs(Gp * B - G * Bp - 1));
        const double Kp = kg.eval(-1, t);
        worst = std::max(worst, std::abs(Kp * Kp + 2 * kb.eval(-1, t) - 1));
    }
    CHECK(worst <= 1e-14);
}

TEST_CASE("tower json lists every level") {
    const auto tw = build_tower(ProfileKind::kuiper_ddbar, 3);
    const auto j = tw.to_json();
    CHECK(j.dump().find("kuiper_ddbar") != std::string::npos);
    CHECK(j.contains("levels"));
    CHECK(j["levels"].size() == 4);
}
