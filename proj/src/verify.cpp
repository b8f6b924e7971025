#include "nkiso/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nkiso/corrugation.hpp"
#include "nkiso/error.hpp"
#include "nkiso/ibp.hpp"
#include "nkiso/kallen.hpp"
#include "nkiso/metric.hpp"
#include "nkiso/profiles.hpp"

namespace nkiso {

namespace {

constexpr double pi = std::numbers::pi;

std::string sci(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

double uni(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Grades a suite: `worst` against `tol`, with failures already collected.
SuiteResult finish(std::string name, double worst, double tol, std::vector<std::string> failures, nlohmann::json detail) {
    SuiteResult r;
    r.name = std::move(name);
    r.residual = worst;
    r.tolerance = tol;
    r.failures = std::move(failures);
    r.pass = r.failures.empty();
    r.detail = std::move(detail);
    return r;
}

SuiteResult profiles_suite(std::mt19937_64& rng) {
    const auto ng = build_tower(ProfileKind::nash_gamma, 4);
    const auto nb = build_tower(ProfileKind::nash_gammabar, 4);
    const auto kg = build_tower(ProfileKind::kuiper_gamma, 4);
    const auto kb = build_tower(ProfileKind::kuiper_gammabar, 4);
    double nash = 0.0, kuiper = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double t = uni(rng, -50.0, 50.0);
        const double G = ng.eval(0, t), Gp = ng.eval(-1, t), B = nb.eval(0, t), Bp = nb.eval(-1, t);
        nash = std::max({nash, std::abs(Gp * Gp + Bp * Bp - 1), std::abs(G * Gp + B * Bp), std::abs(Gp * B - G * Bp - 1)});
        const double kp = kg.eval(-1, t);
        kuiper = std::max(kuiper, std::abs(kp * kp + 2 * kb.eval(-1, t) - 1));
    }
    std::vector<std::string> fail;
    if (nash > 1e-14) fail.push_back("nash identities residual " + sci(nash));
    if (kuiper > 1e-14) fail.push_back("kuiper identity residual " + sci(kuiper));
    int nonzero_mean = 0;
    for (auto kind : {ProfileKind::nash_gamma, ProfileKind::nash_gammabar, ProfileKind::kuiper_gamma,
                      ProfileKind::kuiper_gammabar, ProfileKind::kuiper_ddbar, ProfileKind::product_gammagammaprime}) {
        const auto t = build_tower(kind, 8);
        for (int l = 0; l <= t.depth(); ++l)
            if (t.level(l).constant != 0.0) ++nonzero_mean;
    }
    if (nonzero_mean) fail.push_back(std::to_string(nonzero_mean) + " tower levels with nonzero mean");
    return finish("profiles", std::max(nash, kuiper), 1e-14, fail,
                  {{"nash", nash}, {"kuiper", kuiper}, {"nonzero_mean_levels", nonzero_mean}});
}

SuiteResult decomposition_suite(std::mt19937_64& rng) {
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const SymMat2 h{uni(rng, -3, 3), uni(rng, -3, 3), uni(rng, -3, 3)};
        const SymMat2 d = abar_reconstruct(abar_decompose(h)) - h;
        worst = std::max(worst, d.max_entry() / std::max(1.0, h.max_entry()));
    }
    // ā is linear, so its extremes over the max-entry ball sit on the grid {±r, ±r/3}³
    auto ball_slack = [](double r) {
        double slack = 1.0;
        const double v[4] = {-r, -r / 3, r / 3, r};
        for (double x : v)
            for (double y : v)
                for (double z : v) {
                    const auto a = abar_decompose(H0() + SymMat2{x, y, z});
                    for (double ai : a) slack = std::min(slack, 0.5 - std::abs(ai - 1.0));
                }
        return slack;
    };
    const double at_r0 = ball_slack(r0_constant()), at_026 = ball_slack(0.26);
    std::vector<std::string> fail;
    if (worst > 1e-15) fail.push_back("reconstruction residual " + sci(worst));
    if (at_r0 < -1e-15) fail.push_back("r0 ball leaves |ā−1| ≤ 1/2");
    if (at_026 >= 0.0) fail.push_back("radius 0.26 produced no violation");
    return finish("decomposition", worst, 1e-15, fail,
                  {{"reconstruction", worst}, {"slack_r0", at_r0}, {"slack_0.26", at_026}});
}

SuiteResult nash_suite(const GridSpec& spec, const VerifyOptions& o, std::mt19937_64& rng) {
    double worst = 0.0;
    nlohmann::json runs = nlohmann::json::array();
    for (int s = 0; s < o.samples; ++s) {
        const StepInputs in = random_step_inputs(spec, rng);
        for (int d = 1; d <= 3; ++d) {
            const auto rep = verify_step_identity(nash_spiral_step(in.u, in.du, in.E, in.a, eta(d), o.lambda));
            worst = std::max(worst, rep.relative);
            runs.push_back({{"sample", s}, {"eta", d}, {"relative", rep.relative}});
        }
    }
    std::vector<std::string> fail;
    if (worst > 1e-9) fail.push_back("nash identity relative residual " + sci(worst));
    return finish("nash", worst, 1e-9, fail, {{"runs", runs}});
}

SuiteResult kuiper_suite(const GridSpec& spec, const VerifyOptions& o, std::mt19937_64& rng) {
    double worst = 0.0;
    nlohmann::json runs = nlohmann::json::array();
    KuiperOptions ko;
    ko.s3_scale = o.s3_scale;
    for (int s = 0; s < o.samples; ++s) {
        const StepInputs in = random_step_inputs(spec, rng);
        for (int d = 1; d <= 3; ++d) {
            const auto rep =
                verify_step_identity(kuiper_step(in.u, in.du, in.E.e1, in.a, eta(d), o.lambda, in.w, in.dw, ko));
            worst = std::max(worst, rep.relative);
            runs.push_back({{"sample", s}, {"eta", d}, {"relative", rep.relative}});
        }
    }
    std::vector<std::string> fail;
    if (worst > 1e-9) fail.push_back("kuiper identity relative residual " + sci(worst));
    return finish("kuiper", worst, 1e-9, fail, {{"runs", runs}});
}

SuiteResult ibp_suite(const GridSpec& spec, const VerifyOptions& o) {
    const Field H = Field::sample(spec, Arity::sym2, [](double x, double y, double* v) {
        v[0] = std::sin(2 * x + y);
        v[1] = std::cos(x - y);
        v[2] = std::sin(3 * y) * x;
    });
    const auto tower = build_tower(ProfileKind::kuiper_gamma, 8);
    const double lambda = o.lambda / 2;
    double worst = 0.0;
    std::vector<std::string> fail;
    nlohmann::json runs = nlohmann::json::array();
    for (int k : {0, 1, 2, 4})
        for (auto dir : {Direction::eta1, Direction::eta2, Direction::eta3}) {
            const auto r1 = ibp_reconstruct(H, dir, k, tower, lambda);
            const auto r2 = ibp_reconstruct(H, dir, k, tower, 2 * lambda);
            const double slope = std::log2(r1.remainder_norm / r2.remainder_norm);
            worst = std::max({worst, r1.residual, r2.residual});
            if (std::abs(slope - (k + 2)) > 0.25 * (k + 2))
                fail.push_back(std::string("remainder slope ") + direction_name(dir) + " k=" + std::to_string(k) +
                               ": " + std::to_string(slope));
            if (r1.off_direction > 1e-12) fail.push_back(std::string("P group off its direction for ") + direction_name(dir));
            runs.push_back({{"k", k}, {"direction", direction_name(dir)}, {"residual", std::max(r1.residual, r2.residual)},
                            {"slope", slope}});
        }
    if (worst > 1e-9) fail.push_back("reconstruction residual " + sci(worst));
    return finish("ibp", worst, 1e-9, fail, {{"lambda", lambda}, {"runs", runs}});
}

SuiteResult kallen_suite(const GridSpec& spec) {
    Field H = constant_sym(spec, H0());
    const Field bump = Field::scalar(spec, [](double x, double) { return 0.1 * std::sin(2 * pi * x); });
    H += scaled_sym(bump, outer(eta(1)));
    const double lambda = 40 * pi;
    const auto r = kallen_decompose(H, lambda, 2 * lambda, 3);
    const double rel = max_abs(kallen_residual(H, r, lambda, 2 * lambda)) / max_abs(H);
    std::vector<std::string> fail;
    if (rel > 1e-9) fail.push_back("reconstruction residual " + sci(rel));
    for (std::size_t j = 1; j < r.residual_history.size(); ++j)
        if (!(r.residual_history[j] < r.residual_history[j - 1]))
            fail.push_back("residual history not strictly decreasing at j=" + std::to_string(j + 1));
    return finish("kallen", rel, 1e-9, fail, {{"relative", rel}, {"history", r.residual_history}});
}

SuiteResult frames_suite(const GridSpec& spec, std::mt19937_64& rng) {
    const StepInputs in = random_step_inputs(spec, rng);
    const auto r0 = frame_residuals(in.du, in.E);
    double worst = std::max(r0.orthonormality, r0.normality);
    std::vector<std::string> fail;
    if (r0.orthonormality > 1e-10 || r0.normality > 1e-9) fail.push_back("initial frame residuals " + sci(worst));

    const Field bump = Field::scalar(spec, [](double x, double) { return std::sin(2 * pi * x); });
    std::vector<double> drift;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        const Field v = in.u + eps * times(bump, in.E.e1);
        const Grad dv = gradient(v);
        const Grad du = gradient(in.u);
        const NormalFrame Eu = initial_normal_frame(du);
        const NormalFrame Ev = propagate_frame(du, dv, Eu);
        const auto rv = frame_residuals(dv, Ev);
        worst = std::max({worst, rv.orthonormality, rv.normality});
        if (rv.orthonormality > 1e-10 || rv.normality > 1e-8)
            fail.push_back("propagated frame residuals at ε=" + sci(eps));
        drift.push_back(std::max(max_abs(Ev.e1 - Eu.e1), max_abs(Ev.e2 - Eu.e2)));
    }
    const double slope = std::log10(drift[0] / drift[2]) / 2.0;
    if (std::abs(slope - 1.0) > 0.05) fail.push_back("drift slope " + std::to_string(slope));
    return finish("frames", worst, 1e-8, fail, {{"drift", drift}, {"slope", slope}});
}

}  // namespace

nlohmann::json SuiteResult::to_json() const {
    return {{"name", name}, {"residual", residual}, {"tolerance", tolerance}, {"pass", pass}, {"failures", failures},
            {"detail", detail}};
}

StepInputs random_step_inputs(const GridSpec& spec, std::mt19937_64& rng) {
    const double c1 = uni(rng, 0.01, 0.05), c2 = uni(rng, 0.01, 0.05);
    const double A = uni(rng, 0.02, 0.1), B = uni(rng, 0.02, 0.1);
    const double p1 = uni(rng, 0, 2 * pi), p2 = uni(rng, 0, 2 * pi), p3 = uni(rng, 0, 2 * pi);
    const double k1 = uni(rng, 1, 4), k2 = uni(rng, 1, 4);
    StepInputs in;
    in.u = Field::sample(spec, Arity::vec4, [&](double x, double y, double* o) {
        o[0] = x + c1 * std::sin(k1 * y + p1);
        o[1] = y + c2 * std::cos(k2 * x + p2);
        o[2] = A * std::sin(2 * pi * x + p3) * std::cos(y);
        o[3] = B * std::cos(2 * pi * y + x);
    });
    in.du = gradient(in.u);
    in.E = initial_normal_frame(in.du);
    const double a0 = uni(rng, 0.2, 0.4), a1 = uni(rng, 0.02, 0.1);
    const double q1 = uni(rng, 0.5, 3), q2 = uni(rng, 0.5, 3), pa = uni(rng, 0, 2 * pi);
    in.a = Field::scalar(spec, [&](double x, double y) { return a0 + a1 * std::sin(q1 * x + q2 * y + pa); });
    const double w1 = uni(rng, -0.02, 0.02), w2 = uni(rng, -0.02, 0.02), pw = uni(rng, 0, 2 * pi);
    in.w = Field::sample(spec, Arity::vec2, [&](double x, double y, double* o) {
        o[0] = w1 * std::sin(x * y + pw);
        o[1] = w2 * std::cos(x + 2 * y);
    });
    in.dw = gradient(in.w);
    return in;
}

std::vector<SuiteResult> run_verification(const VerifyOptions& o) {
    if (o.n < 9) throw GateError("config-invalid", "grid n ≥ 9 violated: lhs=" + std::to_string(o.n) + ", rhs=9");
    if (o.samples < 1) throw GateError("config-invalid", "at least one sample per suite");
    const GridSpec spec = GridSpec::make(o.n);
    require_resolved(spec, effective_frequency(o.lambda, eta(2)), "verification λ along η₂");
    std::mt19937_64 rng(o.seed);
    std::vector<SuiteResult> out;
    out.push_back(profiles_suite(rng));
    out.push_back(decomposition_suite(rng));
    out.push_back(nash_suite(spec, o, rng));
    out.push_back(kuiper_suite(spec, o, rng));
    out.push_back(ibp_suite(spec, o));
    out.push_back(kallen_suite(spec));
    out.push_back(frames_suite(spec, rng));
    return out;
}

}  // namespace nkiso
