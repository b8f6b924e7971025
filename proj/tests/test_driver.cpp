#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "nkiso/driver.hpp"
#include "support.hpp"

using namespace nkiso;
using testsupport::code_of;
using testsupport::max_diff;

namespace {

Field flat_u(const GridSpec& g, double s) {
    return Field::sample(g, Arity::vec4, [&](double x, double y, double* o) {
        o[0] = s * x;
        o[1] = s * y;
        o[2] = o[3] = 0.0;
    });
}

bool any_failed(const FeasibilityReport& r, const std::string& name) {
    for (const auto& c : r.checks)
        if (!c.ok && c.name == name) return true;
    return false;
}

// Schedule that reproduces the small exploratory stage: δ₀ = 0.01, μ₀ = 5,
// σ₁ = 2 with S = NK = 2.
Schedule exploratory_schedule() {
    Schedule s;
    s.a = 100;
    s.tau = std::log(5.0) / std::log(100.0);
    s.b = 1 + 2 * std::log(2.0) / std::log(100.0);
    return stage_rates(s, 2, 1);
}

RunOptions exploratory_options() {
    RunOptions o;
    o.schedule = exploratory_schedule();
    o.n_iters = 1;
    o.alpha = 0.05;
    o.stage.N = 2;
    o.stage.K = 1;
    o.stage.enforce_gates = false;
    o.stage.mollify = false;
    o.stage.rho = 1.0;
    return o;
}

Checkpoint flat_checkpoint(const GridSpec& g) {
    Checkpoint c;
    c.state.u = flat_u(g, 1.0);
    c.state.du = gradient(c.state.u);
    c.state.E = initial_normal_frame(c.state.du);
    c.state.delta = 0.01;
    c.state.mu = 5;
    return c;
}

}  // namespace

TEST_CASE("schedule examples") {
    Schedule s;
    s.a = 10;
    s.b = 1.1;
    s.S = 16;
    CHECK(s.sigma(1) == doctest::Approx(std::pow(10.0, 0.1 / 16)).epsilon(1e-14));
    CHECK(s.sigma(1) == doctest::Approx(1.0145).epsilon(1e-4));
    const auto rep = validate_schedule(s, 3, 1.0, 1.5);
    CHECK_FALSE(rep.feasible);
    CHECK(any_failed(rep, "(ko61)"));
    CHECK(rep.first_failure.find("σ_{n+1} ≥ σ̲") != std::string::npos);

    Schedule big = s;
    big.a = 1e6;
    big.b = 1.2;
    CHECK(big.sigma(1) == doctest::Approx(std::pow(10.0, 0.075)).epsilon(1e-13));
    const auto r2 = validate_schedule(big, 3, 1.0, 1.0);
    int per_n = 0;
    for (const auto& c : r2.checks)
        if (c.n == 2) ++per_n;
    CHECK(per_n == 5);

    // b → 1 collapses σ to 1
    Schedule flat = s;
    flat.b = 1 + 1e-9;
    CHECK(flat.sigma(1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_FALSE(validate_schedule(flat, 2, 1.0, 1.01).feasible);

    Schedule bad = s;
    bad.b = 0.9;
    const auto r3 = validate_schedule(bad, 2, 1.0, 1.0);
    CHECK_FALSE(r3.feasible);
    CHECK(r3.first_failure.find("(ko2)") == 0);
    CHECK(code_of([&] { s.sigma(0); }) == "invalid-index");
}

TEST_CASE("schedule closed forms and identities") {
    Schedule s;
    s.a = 1e4;
    s.b = 1.05;
    s.theta = 0.2;
    s.tau = 3.0;
    s = stage_rates(s, 4, 4);
    CHECK(s.S == 16);
    CHECK(s.J == 12);
    CHECK(s.p == 7.5);
    CHECK(s.delta(0) == 1.0 / s.a);
    CHECK(s.mu(0) == std::pow(s.a, s.tau));
    const ScheduleTable t = schedule_table(s, 6);
    for (int n = 0; n < 6; ++n) {
        CHECK(t.delta[n + 1] == doctest::Approx(t.delta[n] / std::pow(t.sigma[n + 1], s.S)).epsilon(1e-14));
        CHECK(t.delta[n] == doctest::Approx(std::pow(s.a, -std::pow(s.b, n))).epsilon(1e-14));
        CHECK(t.mu[n] == doctest::Approx(std::pow(s.a, s.tau + (std::pow(s.b, n) - 1) / (2 * s.theta))).epsilon(1e-14));
        CHECK(t.sigma[n + 1] == s.sigma(n + 1));
    }
    CHECK(default_tau(3, 2.0) == doctest::Approx(5.5));
}

TEST_CASE("alpha range gate") {
    Schedule s = stage_rates(Schedule{}, 4, 4);
    s.r_beta = 2.0;
    const double c = s.alpha_ceiling();
    CHECK(c == doctest::Approx(1.0 / (1.0 + 2.0 * 12 / 16)));
    s.theta = 0.3;
    CHECK(alpha_violations(s, 0.1).empty());
    const auto v = alpha_violations(s, c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("(ran_NK)") == 0);
    CHECK(alpha_violations(s, 0.0).size() == 1);
    // θ must sit strictly between α and the ceiling
    CHECK(alpha_violations(s, 0.35).front().find("(th_t)") == 0);
}

TEST_CASE("convergence report corner cases") {
    const auto g = GridSpec::make(33);
    const Field gm = constant_sym(g, {1, 0, 1});
    ImmersionState s;
    s.u = flat_u(g, 0.5);
    s.du = gradient(s.u);
    s.delta = 0.01;
    CHECK(convergence_report({s}, gm, 0.1).status == "insufficient");
    const auto r = convergence_report({s, s, s}, gm, 0.1);
    CHECK(r.status == "stationary");
    REQUIRE(r.increments.size() == 2);
    CHECK(r.increments[0] == 0.0);
    // 𝒟(Id, u/2) = (3/4)Id
    CHECK(r.defect[0] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("zero outer iterations return the initial stage") {
    const auto g = GridSpec::make(129);
    const Field ub = flat_u(g, 0.5), gm = constant_sym(g, {1, 0, 1});
    RunOptions o;
    o.n_iters = 0;
    o.schedule.a = 100;
    // the initial stage's low-frequency spirals bend the sheet by O(1)
    o.epsilon = 0.5;
    CHECK(code_of([&] { run(gm, ub, o); }) == "c0-proximity");
    o.epsilon = 1.0;
    const RunResult r = run(gm, ub, o);
    CHECK(r.metrics[0].c0_proximity == doctest::Approx(r.initial.c0_distance));
    CHECK(r.metrics[0].c0_proximity <= o.epsilon);
    REQUIRE(r.iterates.size() == 1);
    CHECK(r.status == "complete");
    REQUIRE(r.metrics.size() == 1);
    CHECK(r.metrics[0].delta == doctest::Approx(0.01));
    CHECK(r.metrics[0].defect_shifted <= r0_constant() / 4 * 0.01);
    CHECK(r.metrics[0].defect_shifted == doctest::Approx(r.initial.defect));
    CHECK(r.convergence.status == "insufficient");
    CHECK(r.to_json()["metrics"].size() == 1);
}

TEST_CASE("infeasible schedules stop before any stage") {
    const auto g = GridSpec::make(65);
    const Field ub = flat_u(g, 0.5), gm = constant_sym(g, {1, 0, 1});
    RunOptions o;
    o.n_iters = 1;
    o.sigma_floor = 1.5;
    CHECK(code_of([&] { run(gm, ub, o); }) == "assumption-violated");
    o.alpha = 0.9;
    CHECK(code_of([&] { run(gm, ub, o); }) == "assumption-violated");

    // with the gates relaxed, the default schedule asks for far more than 65 nodes resolve
    o.alpha = 0.01;
    o.stage.enforce_gates = false;
    o.schedule.a = 100;
    const RunResult r = run(gm, ub, o);
    CHECK(r.status == "truncated-by-resolution");
    CHECK(r.iterates.size() == 1);
    CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("snapshot round trip and resumed runs") {
    const auto g = GridSpec::make(513);
    const Checkpoint start = flat_checkpoint(g);
    const Field gm = pullback(start.state.du) + constant_sym(g, H0() * (0.01 * 1.25));
    const RunOptions o = exploratory_options();

    const RunResult a = run(gm, start.state.u, o, &start);
    const RunResult b = run(gm, start.state.u, o, &start);
    REQUIRE(a.metrics.size() == 1);
    REQUIRE(a.iterates.size() == 2);
    CHECK(a.status == "complete");
    CHECK(a.metrics[0].sigma == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(a.metrics[0].delta == doctest::Approx(0.0025).epsilon(1e-12));
    // bitwise determinism
    CHECK(a.metrics[0].to_json().dump() == b.metrics[0].to_json().dump());
    CHECK(max_diff(a.iterates[1].u, b.iterates[1].u) == 0.0);

    const auto dir = std::filesystem::temp_directory_path() / "nkiso_snapshot_test";
    std::filesystem::remove_all(dir);
    save_snapshot(dir, 0, start.state, {});
    const Checkpoint back = load_snapshot(dir);
    CHECK(back.index == 0);
    CHECK(max_diff(back.state.u, start.state.u) == 0.0);
    CHECK(max_diff(back.state.E.e2, start.state.E.e2) == 0.0);
    CHECK(back.state.mu == 5.0);
    const RunResult c = run(gm, start.state.u, o, &back);
    CHECK(max_diff(c.iterates[1].u, a.iterates[1].u) == 0.0);
    CHECK(c.metrics[0].to_json().dump() == a.metrics[0].to_json().dump());
    std::filesystem::remove_all(dir);
    CHECK(code_of([&] { load_snapshot(dir); }) == "config-invalid");
}
