#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "nkiso/kallen.hpp"
#include "nkiso/metric.hpp"
#include "support.hpp"

using namespace nkiso;
using testsupport::code_of;
using testsupport::max_diff;
using testsupport::uniform;

namespace {

constexpr double pi = std::numbers::pi;

Field wavy_H(const GridSpec& g, double amp) {
    Field H = constant_sym(g, H0());
    H += scaled_sym(Field::scalar(g, [&](double x, double) { return amp * std::sin(2 * pi * x); }), outer(eta(1)));
    return H;
}

// Final ‖F‖₀ for the wavy input; the oscillation scale of H is fixed, so
// doubling λ and κ shrinks the ratio (λ/μ)^{-2N} by 2^{2N}.
double final_residual(const GridSpec& g, double lambda, int N) {
    return kallen_decompose(wavy_H(g, 0.1), lambda, 2 * lambda, N).residual_history.back();
}

}  // namespace

TEST_CASE("constant inputs") {
    const auto g = GridSpec::make(33);
    const auto r = kallen_decompose(constant_sym(g, H0()), 10, 20, 1);
    CHECK(r.iterations == 1);
    CHECK(max_diff(r.a1, Field(g, Arity::scalar, 1.0)) == 0.0);
    CHECK(max_diff(r.a3, Field(g, Arity::scalar, 1.0)) == 0.0);
    CHECK(max_abs(r.F) <= 1e-20);

    const auto s = kallen_decompose(constant_sym(g, H0() + outer(eta(1)) * 0.1), 10, 20, 2);
    CHECK(max_diff(s.a1, Field(g, Arity::scalar, std::sqrt(1.1))) <= 1e-15);
    CHECK(max_diff(s.a2, Field(g, Arity::scalar, 1.0)) <= 1e-15);
    CHECK(max_diff(s.a3, Field(g, Arity::scalar, 1.0)) <= 1e-15);
    CHECK(max_abs(s.F) <= 1e-20);
}

TEST_CASE("oscillating input reconstructs and the residual contracts") {
    const auto g = GridSpec::make(257);
    const Field H = wavy_H(g, 0.1);
    const double lambda = 40 * pi, kappa = 80 * pi;
    const auto r = kallen_decompose(H, lambda, kappa, 3);
    CHECK(max_abs(kallen_residual(H, r, lambda, kappa)) <= 1e-9 * max_abs(H));
    REQUIRE(r.residual_history.size() == 3);
    CHECK(r.residual_history[1] < r.residual_history[0]);
    CHECK(r.residual_history[2] < r.residual_history[1]);
    CHECK(r.min_a2 >= 0.5);
    CHECK(r.max_a2 <= 1.5);

    // independent oracle for the first iterate: a_{1,1} = sqrt(1 + 0.1 sin 2πx)
    const auto one = kallen_decompose(H, lambda, kappa, 1);
    CHECK(max_diff(one.a1, Field::scalar(g, [](double x, double) { return std::sqrt(1 + 0.1 * std::sin(2 * pi * x)); })) <=
          1e-15);
}

TEST_CASE("reconstruction holds at every iteration") {
    const auto g = GridSpec::make(129);
    for (int trial = 0; trial < 3; ++trial) {
        const double amp = uniform(0.02, 0.1);
        Field H = wavy_H(g, amp);
        H += scaled_sym(Field::scalar(g, [&](double, double y) { return amp * std::cos(2 * pi * y); }), outer(eta(3)));
        const double lambda = uniform(20, 60), kappa = lambda * uniform(1.5, 3);
        for (int N = 1; N <= 4; ++N) {
            const auto r = kallen_decompose(H, lambda, kappa, N);
            CHECK(max_abs(kallen_residual(H, r, lambda, kappa)) <= 1e-14);
            for (std::size_t j = 1; j < r.residual_history.size(); ++j)
                CHECK(r.residual_history[j] < r.residual_history[j - 1]);
        }
    }
}

TEST_CASE("residual decay under frequency doubling") {
    const auto g = GridSpec::make(257);
    for (int N : {1, 2}) {
        const double a = final_residual(g, 20 * pi, N), b = final_residual(g, 40 * pi, N);
        const double expect = std::pow(2.0, 2 * N);
        MESSAGE("N=" << N << " ratio " << a / b << " vs " << expect);
        CHECK(std::abs(a / b - expect) <= 0.3 * expect);
    }
}

TEST_CASE("preconditions and guards") {
    const auto g = GridSpec::make(33);
    const Field H = constant_sym(g, H0());
    CHECK_THROWS_AS(kallen_decompose(H, 10, 5, 1), GateError);
    CHECK(code_of([&] { kallen_decompose(H, 0.5, 5, 1); }) == "kallen-precondition");
    CHECK(code_of([&] { kallen_decompose(constant_sym(g, H0() + SymMat2{0.2, 0, 0}), 10, 20, 1); }) ==
          "decomposition-left-ball");
    try {
        kallen_decompose(constant_sym(g, H0() + SymMat2{0.2, 0, 0}), 10, 20, 1);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("(ass_H0)") != std::string::npos);
    }
    // inside the r0/2 ball, but at λ ≈ 1 the gradient term is O(1) and pushes a square root below 1/2
    Field fast = constant_sym(g, H0());
    fast += scaled_sym(Field::scalar(g, [](double x, double) { return 0.12 * std::sin(6 * pi * x); }), outer(eta(1)));
    CHECK(code_of([&] { kallen_decompose(fast, 1.01, 1.02, 2); }) == "decomposition-left-ball");
    // a milder one stays in the ball but its residual grows twice in a row
    CHECK(code_of([&] { kallen_decompose(wavy_H(g, 0.12), 1.01, 1.02, 3); }) == "kallen-diverging");
    CHECK(code_of([&] { kallen_decompose(H, 10, 20, 0); }) == "invalid-depth");
}

TEST_CASE("history export") {
    const auto g = GridSpec::make(65);
    const auto r = kallen_decompose(wavy_H(g, 0.1), 30, 60, 3);
    const auto path = std::filesystem::temp_directory_path() / "nkiso_kallen_history.csv";
    r.write_history_csv(path);
    std::ifstream is(path);
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 4);
    std::filesystem::remove(path);
    CHECK(r.to_json()["iterations"] == 3);
}
