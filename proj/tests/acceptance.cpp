// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Criteria that cannot be met on a desk-scale grid are still attempted under
// their stated gates; the line then carries the measured obstruction.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nkiso/corrugation.hpp"
#include "nkiso/driver.hpp"
#include "nkiso/ibp.hpp"
#include "nkiso/kallen.hpp"
#include "nkiso/metric.hpp"
#include "nkiso/profiles.hpp"
#include "nkiso/stage.hpp"
#include "nkiso/verify.hpp"
#include "support.hpp"

using namespace nkiso;
using testsupport::max_diff;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

std::mt19937_64 rng(20240611u);
double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Field flat_u(const GridSpec& g, double s) {
    return Field::sample(g, Arity::vec4, [&](double x, double y, double* o) {
        o[0] = s * x;
        o[1] = s * y;
        o[2] = o[3] = 0.0;
    });
}

ImmersionState state_of(const Field& u) {
    ImmersionState s;
    s.u = u;
    s.du = gradient(u);
    s.E = initial_normal_frame(s.du);
    return s;
}

Field trig_H(const GridSpec& g) {
    return Field::sample(g, Arity::sym2, [](double x, double y, double* v) {
        v[0] = std::sin(2 * x + y);
        v[1] = std::cos(x - y) + x;
        v[2] = std::sin(3 * y) * x;
    });
}

// 1. pullback(new) − pullback(old) − principal − Σ errors, all formed here.
Outcome step_identities() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = GridSpec::make(513);
    std::mt19937_64 r(97);
    double worst = 0.0;
    for (int s = 0; s < 20; ++s) {
        const StepInputs in = random_step_inputs(g, r);
        const int d = 1 + s % 3;
        const double lambda = uniform(4, 16) * pi;
        const double scale = max_abs(in.a) * max_abs(in.a) * outer(eta(d)).max_entry();
        const StepResult n = nash_spiral_step(in.u, in.du, in.E, in.a, eta(d), lambda);
        worst = std::max(worst, max_abs(pullback(n.grad_new) - pullback(in.du) - n.principal - n.error_sum()) / scale);
        const StepResult k = kuiper_step(in.u, in.du, in.E.e1, in.a, eta(d), lambda, in.w, in.dw);
        worst = std::max(worst, max_abs(pullback(k.grad_new) - pullback(in.du) - k.principal - k.error_sum()) / scale);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst <= 1e-9 && secs <= 60, "worst relative residual " + fmt(worst) +
                                             " over 20 Nash + 20 Kuiper (tol 1e-9), runtime limit 60 s"};
}

// 2.
Outcome profile_identities() {
    const auto ng = build_tower(ProfileKind::nash_gamma, 0), nb = build_tower(ProfileKind::nash_gammabar, 0);
    const auto kg = build_tower(ProfileKind::kuiper_gamma, 0), kb = build_tower(ProfileKind::kuiper_gammabar, 0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double t = uniform(-100, 100);
        const double a = ng.eval(-1, t), b = nb.eval(-1, t), c = kg.eval(-1, t);
        worst = std::max({worst, std::abs(a * a + b * b - 1), std::abs(c * c + 2 * kb.eval(-1, t) - 1)});
    }
    bool zero_mean = true;
    for (auto k : {ProfileKind::nash_gamma, ProfileKind::nash_gammabar, ProfileKind::kuiper_gamma,
                   ProfileKind::kuiper_gammabar, ProfileKind::kuiper_ddbar, ProfileKind::product_gammagammaprime}) {
        const auto tw = build_tower(k, 8);
        for (int i = 0; i <= 8; ++i) zero_mean = zero_mean && tw.level(i).constant == 0.0;
    }
    return {worst <= 1e-14 && zero_mean,
            "worst identity residual " + fmt(worst) + " at 1000 phases (tol 1e-14); towers zero-mean: " +
                (zero_mean ? "yes" : "no")};
}

// 3.
Outcome ibp() {
    const auto g = GridSpec::make(513);
    const Field H = trig_H(g);
    const auto tower = build_tower(ProfileKind::kuiper_ddbar, 8);
    double worst = 0.0, worst_exp = 0.0;
    std::string exps;
    for (auto d : {Direction::eta1, Direction::eta2, Direction::eta3})
        for (int k : {0, 1, 2, 4}) {
            const IbpReport a = ibp_reconstruct(H, d, k, tower, 4 * pi);
            const IbpReport b = ibp_reconstruct(H, d, k, tower, 8 * pi);
            worst = std::max({worst, a.residual, b.residual});
            const double e = std::log2(a.remainder_norm / b.remainder_norm);
            worst_exp = std::max(worst_exp, std::abs(e / (k + 2) - 1));
            if (d == Direction::eta2) exps += " k=" + std::to_string(k) + ":" + fmt(e);
        }
    return {worst <= 1e-9 && worst_exp <= 0.25, "worst reconstruction " + fmt(worst) +
                                                    " (tol 1e-9); worst exponent deviation " + fmt(100 * worst_exp) +
                                                    "% (tol 25%); η₂ exponents" + exps};
}

// 4.
Outcome rank_one() {
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const SymMat2 h{uniform(-10, 10), uniform(-10, 10), uniform(-10, 10)};
        const SymMat2 back = abar_reconstruct(abar_decompose(h));
        worst = std::max(worst, (back - h).max_entry() / std::max(1.0, h.max_entry()));
    }
    auto ball_ok = [](double r) {
        const double lv[] = {-r, -r / 3, r / 3, r};
        for (double x : lv)
            for (double y : lv)
                for (double z : lv) {
                    const auto a = abar_decompose(H0() + SymMat2{x, y, z});
                    for (double ai : a)
                        if (std::abs(ai - 1) > 0.5) return false;
                }
        return true;
    };
    const bool at = ball_ok(r0_constant()), beyond = !ball_ok(0.26);
    return {worst <= 4e-16 && at && beyond && r0_constant() == 0.25,
            "worst relative reconstruction " + fmt(worst) + " over 1e4 matrices; r0=0.25 ball holds: " +
                (at ? "yes" : "no") + ", radius 0.26 violates: " + (beyond ? "yes" : "no")};
}

// 5.
Outcome kallen() {
    const auto g = GridSpec::make(257);
    auto wavy = [&](double amp) {
        Field H = constant_sym(g, H0());
        H += scaled_sym(Field::scalar(g, [&](double x, double) { return amp * std::sin(2 * pi * x); }), outer(eta(1)));
        return H;
    };
    const Field H = wavy(0.1);
    const int N = 3;
    const auto r = kallen_decompose(H, 20 * pi, 40 * pi, N);
    const auto r2 = kallen_decompose(H, 40 * pi, 80 * pi, N);
    const double res = std::max(max_abs(kallen_residual(H, r, 20 * pi, 40 * pi)),
                                max_abs(kallen_residual(H, r2, 40 * pi, 80 * pi))) /
                       max_abs(H);
    bool dec = true;
    for (const auto* k : {&r, &r2})
        for (std::size_t j = 1; j < k->residual_history.size(); ++j)
            dec = dec && k->residual_history[j] < k->residual_history[j - 1];
    const double ratio = r.residual_history.back() / r2.residual_history.back();
    const double expect = std::pow(2.0, 2 * N);
    const bool ok = res <= 1e-9 && dec && std::abs(ratio / expect - 1) <= 0.3;
    return {ok, "reconstruction " + fmt(res) + " (tol 1e-9); history decreasing: " + (dec ? "yes" : "no") +
                    "; λ→2λ ratio " + fmt(ratio) + " vs 2^6 = 64 (±30%)"};
}

// 6. Frame residuals across a full stage and the propagation slope.
Outcome frames() {
    const auto g = GridSpec::make(513);
    StageParams p;
    p.N = 2;
    p.K = 1;
    p.sigma = 2.0;
    p.mu = 5.0;
    p.delta = 0.01;
    p.enforce_gates = false;
    p.mollify = false;
    p.rho = 1.0;
    const ImmersionState s = state_of(flat_u(g, 1.0));
    const Field gm = pullback(s.du) + constant_sym(g, H0() * (p.delta * (1 + std::pow(p.sigma, -p.N))));
    StageTrace tr;
    stage(gm, s, p, &tr);
    double res = 0.0;
    for (const auto& r : tr.rows) res = std::max({res, r.orthonormality, r.normality});

    const auto gs = GridSpec::make(129);
    const Field u = Field::sample(gs, Arity::vec4, [](double x, double y, double* o) {
        o[0] = x;
        o[1] = y;
        o[2] = 0.2 * x * x + 0.05 * std::sin(2 * x + y);
        o[3] = 0.1 * std::cos(x) * y;
    });
    const Grad du = gradient(u);
    const NormalFrame E = initial_normal_frame(du);
    const Field bump = Field::scalar(gs, [](double x, double) { return std::sin(2 * pi * x); });
    std::vector<double> drift;
    for (double e : {1e-2, 1e-3, 1e-4}) {
        const NormalFrame F = propagate_frame(du, gradient(u + e * times(bump, E.e1)), E, 0.2);
        drift.push_back(std::max(max_diff(F.e1, E.e1), max_diff(F.e2, E.e2)));
    }
    double worst_slope = 0.0;
    std::string slopes;
    for (int k = 0; k < 2; ++k) {
        const double sl = std::log10(drift[k] / drift[k + 1]);
        worst_slope = std::max(worst_slope, std::abs(sl - 1));
        slopes += " " + fmt(sl);
    }
    return {res <= 1e-8 && worst_slope <= 0.05, "worst frame residual " + fmt(res) + " over " +
                                                    std::to_string(tr.rows.size()) +
                                                    " stage corrugations (tol 1e-8); ε-slopes" + slopes + " (1 ± 0.05)"};
}

// Largest σ for which δ = σ^{-(3N+3)}, μ = δ^{-1/2} (the (Ass1) boundary) keeps
// the stage's peak frequency on the grid.
StageParams largest_feasible_stage(const GridSpec& g) {
    StageParams p;
    p.N = p.K = 4;
    double lo = 1.0, hi = 4.0;
    for (int it = 0; it < 60; ++it) {
        const double s = 0.5 * (lo + hi);
        StageParams q = p;
        q.sigma = s;
        q.delta = std::pow(s, -(3 * p.N + 3));
        q.mu = 1.0 / std::sqrt(q.delta);
        (stage_peak_frequency(q) <= frequency_ceiling(g) ? lo : hi) = s;
    }
    p.sigma = lo;
    p.delta = std::pow(lo, -(3 * p.N + 3));
    p.mu = 1.0 / std::sqrt(p.delta) * (1 + 1e-12);
    return p;
}

struct StageAttempt {
    bool completed = false;
    std::string failure;
    StageParams params;
    StageTrace trace;
    ImmersionState u0, uK;
};

// The flat problem at n = 2049: initial stage at δ₀, then one gated Stage.
StageAttempt attempt_stage() {
    StageAttempt a;
    const auto g = GridSpec::make(2049);
    a.params = largest_feasible_stage(g);
    const Field id = constant_sym(g, {1, 0, 1});
    try {
        a.u0 = initial_stage(id, flat_u(g, 0.5), a.params.delta);
        a.uK = stage(id, a.u0, a.params, &a.trace);
        a.completed = true;
    } catch (const Error& e) {
        a.failure = std::string(e.what());
    }
    return a;
}

std::string stage_analysis(const StageAttempt& a) {
    const auto& p = a.params;
    // the first Källén input is ≈ (1 − σ^{-N})H₀ plus at most (r₀/4)H₀-sized defect;
    // staying in the r₀/2 ball needs (3/2)σ^{-N} ≤ r₀/4, i.e. σ^N ≥ 24
    const double need = 6.0 / r0_constant();
    return "largest grid-feasible σ=" + fmt(p.sigma) + " (δ₀=" + fmt(p.delta) + ", μ₀=" + fmt(p.mu) +
           ", peak " + fmt(stage_peak_frequency(p)) + " ≤ ceiling " + fmt(frequency_ceiling(GridSpec::make(2049))) +
           "); the Källén ball needs σ^N ≥ " + fmt(need) + " but σ^N=" + fmt(std::pow(p.sigma, p.N)) +
           "; stopped: " + a.failure;
}

// 7.
Outcome stage_decay(const StageAttempt& a) {
    if (!a.completed) return {false, stage_analysis(a)};
    const auto& p = a.params;
    const double target = 2 * p.delta / std::pow(p.sigma, p.N * p.K);
    const double C = a.trace.c1_total / std::sqrt(p.delta);
    return {a.trace.defect_out <= target, "‖𝒟_out‖₀=" + fmt(a.trace.defect_out) + " vs 2δ₀/σ^{NK}=" + fmt(target) +
                                              "; ‖u_K−u₀‖₁ = C·δ₀^{1/2} with C=" + fmt(C)};
}

// 8.
Outcome inner_rate(const StageAttempt& a) {
    if (!a.completed) return {false, "no gated Stage completed (see criterion 7)"};
    const auto& p = a.params;
    bool ok = true;
    double cmin = 1e300, cmax = 0.0, fmin = 1e300, fmax = 0.0;
    std::string ratios;
    for (const auto& r : a.trace.inner) {
        const double ratio = r.defect_out / r.defect_in;
        ok = ok && ratio <= 2 * std::pow(p.sigma, -p.N);
        ratios += " " + fmt(ratio);
        const double c = r.c1_drift / std::sqrt(r.delta_k), f = r.frame_drift / std::sqrt(r.delta_k);
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
        fmin = std::min(fmin, f);
        fmax = std::max(fmax, f);
    }
    ok = ok && cmax <= 2 * cmin && fmax <= 2 * fmin;
    return {ok, "per-k ratios" + ratios + " vs 2σ^{-N}=" + fmt(2 * std::pow(p.sigma, -p.N)) + "; C¹ C in [" +
                    fmt(cmin) + ", " + fmt(cmax) + "], frame C in [" + fmt(fmin) + ", " + fmt(fmax) + "]"};
}

// 9.
Outcome driver() {
    const auto g = GridSpec::make(1025);
    const Field id = constant_sym(g, {1, 0, 1}), ub = flat_u(g, 0.5);
    RunOptions o;
    o.n_iters = 2;
    o.schedule = stage_rates(o.schedule, o.stage.N, o.stage.K);
    o.schedule.tau = default_tau(3, o.schedule.r_beta);

    // schedule identities hold regardless of what the grid can resolve
    const ScheduleTable t = schedule_table(o.schedule, 2);
    double ident = 0.0;
    for (int n = 0; n < 2; ++n)
        ident = std::max(ident, std::abs(t.delta[n + 1] - t.delta[n] / std::pow(t.sigma[n + 1], o.schedule.S)) / t.delta[n + 1]);

    std::string strict;
    RunResult res;
    bool ran = false;
    try {
        res = run(id, ub, o);
        ran = true;
    } catch (const Error& e) {
        strict = e.what();
    }
    if (!ran) {
        StageParams first = o.stage;
        first.delta = t.delta[0];
        first.mu = t.mu[0];
        first.sigma = t.sigma[1];
        std::string why = "gated run stopped: " + strict + "; first Stage needs peak frequency " +
                          fmt(stage_peak_frequency(first)) + " (μ₀=" + fmt(t.mu[0]) + ", σ₁=" + fmt(t.sigma[1]) +
                          ") against a grid ceiling of " + fmt(frequency_ceiling(g));
        // same run with the gates turned into warnings, to show how far the schedule gets
        RunOptions relaxed = o;
        relaxed.stage.enforce_gates = false;
        try {
            const RunResult r1 = run(id, ub, relaxed);
            why += "; relaxed run status " + r1.status + " with " + std::to_string(r1.iterates.size()) + " iterate(s)";
        } catch (const Error& e) {
            why += "; relaxed run also stopped: " + std::string(e.code());
        }
        return {false, why + "; schedule identity δ_{n+1} = δ_n/σ^S holds to " + fmt(ident)};
    }
    bool ok = res.status == "complete" && res.iterates.size() == 3 && ident <= 1e-15;
    for (std::size_t n = 0; n < res.metrics.size(); ++n) {
        const auto& m = res.metrics[n];
        ok = ok && m.defect_shifted <= 2 * m.shifted_target && m.c0_proximity <= o.epsilon;
        if (n > 0) ok = ok && m.defect_sup < res.metrics[n - 1].defect_sup;
    }
    const RunResult again = run(id, ub, o);
    ok = ok && again.to_json()["metrics"].dump() == res.to_json()["metrics"].dump();
    return {ok, "status " + res.status + ", iterates " + std::to_string(res.iterates.size()) + ", schedule identity " +
                    fmt(ident)};
}

// 10.
Outcome initial() {
    const auto g = GridSpec::make(513);
    InitialStageReport rep;
    try {
        initial_stage(constant_sym(g, {1, 0, 1}), flat_u(g, 0.5), 1e-2, &rep);
    } catch (const Error& e) {
        return {false, e.what()};
    }
    return {rep.defect <= rep.target && rep.bounds.pass,
            "‖𝒟(g−δH₀,u₀)‖₀=" + fmt(rep.defect) + " ≤ (r₀/4)δ=" + fmt(rep.target) + "; immersion bounds with γ̲=" +
                fmt(rep.gamma) + ": " + (rep.bounds.pass ? "pass" : "fail") + "; ‖u₀−ū‖₀=" + fmt(rep.c0_distance)};
}

// 11. K = −Δ(log λ)/(2λ) for g = λ·Id, two analytic factors.
Outcome curvature() {
    const auto g = GridSpec::make(513);
    double worst = 0.0;
    {
        const Field conf = Field::sample(g, Arity::sym2, [](double x, double y, double* o) {
            const double q = 1 + x * x + y * y;
            o[0] = o[2] = q * q;
            o[1] = 0.0;
        });
        const Field K = gauss_curvature(conf);
        double top = 0.0, err = 0.0;
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) {
                const double q = 1 + g.x(i) * g.x(i) + g.x(j) * g.x(j);
                const double exact = -4.0 / std::pow(q, 4);
                top = std::max(top, std::abs(exact));
                err = std::max(err, std::abs(K(0, i, j) - exact));
            }
        worst = std::max(worst, err / top);
    }
    {
        // λ = e^{2φ}, φ = 0.2 sin 2x cos 3y: K = −e^{−2φ}Δφ = 2.6 e^{−2φ} sin 2x cos 3y
        const Field conf = Field::sample(g, Arity::sym2, [](double x, double y, double* o) {
            o[0] = o[2] = std::exp(0.4 * std::sin(2 * x) * std::cos(3 * y));
            o[1] = 0.0;
        });
        const Field K = gauss_curvature(conf);
        double top = 0.0, err = 0.0;
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) {
                const double s = std::sin(2 * g.x(i)) * std::cos(3 * g.x(j));
                const double exact = 2.6 * s * std::exp(-0.4 * s);
                top = std::max(top, std::abs(exact));
                err = std::max(err, std::abs(K(0, i, j) - exact));
            }
        worst = std::max(worst, err / top);
    }
    return {worst <= 1e-6, "worst relative error " + fmt(worst) + " over two conformal factors (tol 1e-6)"};
}

}  // namespace

int main() {
    int failed = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failed;
        std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail
                  << " [" << fmt(secs) << " s]" << std::endl;
    };
    report(1, "step identities", step_identities);
    report(2, "profile identities", profile_identities);
    report(3, "IBP reconstruction", ibp);
    report(4, "rank-one decomposition", rank_one);
    report(5, "Källén", kallen);
    report(6, "frames", frames);
    StageAttempt attempt;
    report(7, "single Stage decay", [&] {
        attempt = attempt_stage();
        return stage_decay(attempt);
    });
    report(8, "inner-step rate", [&] { return inner_rate(attempt); });
    report(9, "driver", driver);
    report(10, "initial stage", initial);
    report(11, "curvature diagnostic", curvature);
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
