#include "nkiso/driver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nkiso/error.hpp"
#include "nkiso/metric.hpp"

namespace nkiso {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double grad_sup(const Grad& d) { return std::max(max_abs(d.d1), max_abs(d.d2)); }

Grad grad_minus(const Grad& a, const Grad& b) { return {a.d1 - b.d1, a.d2 - b.d2}; }

// what() minus the leading "code: "
std::string detail_of(const Error& e) {
    std::string w = e.what();
    const std::string head = e.code() + ": ";
    return w.rfind(head, 0) == 0 ? w.substr(head.size()) : w;
}

double h0_norm() { return H0().max_entry(); }

}  // namespace

double Schedule::delta(int n) const { return std::pow(a, -std::pow(b, n)); }

double Schedule::mu(int n) const { return std::pow(a, tau + (std::pow(b, n) - 1.0) / (2.0 * theta)); }

double Schedule::sigma(int n) const {
    if (n < 1) throw Error("invalid-index", "σ_n needs n ≥ 1");
    return std::pow(delta(n - 1) / delta(n), 1.0 / S);
}

double Schedule::alpha_ceiling() const { return std::min(r_beta / 2.0, 1.0 / (1.0 + 2.0 * J / S)); }

nlohmann::json Schedule::to_json() const {
    return {{"a", a}, {"b", b}, {"theta", theta}, {"tau", tau}, {"S", S},
            {"J", J}, {"p", p}, {"r_beta", r_beta}, {"g_norm", g_norm}};
}

Schedule stage_rates(Schedule s, int N, int K) {
    s.S = N * K;
    s.J = 2 * K + N;
    s.p = (3.0 * N + 3.0) / 2.0;
    return s;
}

double default_tau(int N0, double r_beta) { return (1.0 + 1.0 / r_beta) * N0 + 1.0; }

ScheduleTable schedule_table(const Schedule& s, int horizon) {
    ScheduleTable t;
    for (int n = 0; n <= horizon; ++n) {
        t.delta.push_back(s.delta(n));
        t.mu.push_back(s.mu(n));
        t.sigma.push_back(n == 0 ? 0.0 : std::pow(t.delta[n - 1] / t.delta[n], 1.0 / s.S));
    }
    return t;
}

std::string FeasibilityCheck::message() const {
    std::string where = n >= 0 ? " at n=" + std::to_string(n) : "";
    return name + ": " + inequality + " violated" + where + ": lhs=" + fmt(lhs) + ", rhs=" + fmt(rhs);
}

nlohmann::json FeasibilityReport::to_json() const {
    nlohmann::json cj = nlohmann::json::array();
    for (const auto& c : checks)
        cj.push_back({{"n", c.n}, {"name", c.name}, {"inequality", c.inequality}, {"lhs", c.lhs}, {"rhs", c.rhs},
                      {"ok", c.ok}});
    return {{"feasible", feasible}, {"first_failure", first_failure}, {"checks", cj}};
}

FeasibilityReport validate_schedule(const Schedule& s, int horizon, double measured_C, double sigma_floor) {
    FeasibilityReport rep;
    auto add = [&](int n, const char* name, const char* ineq, double lhs, double rhs, bool ok) {
        rep.checks.push_back({n, name, ineq, lhs, rhs, ok});
        if (!ok && rep.feasible) {
            rep.feasible = false;
            rep.first_failure = rep.checks.back().message();
        }
    };
    add(-1, "(ko2)", "a > 1", s.a, 1, s.a > 1);
    add(-1, "(ko2)", "b > 1", s.b, 1, s.b > 1);
    const double ceiling = std::min(s.r_beta / 2.0, 1.0 / (1.0 + 2.0 * s.J / s.S));
    add(-1, "(th_t)", "θ < min{(r+β)/2, 1/(1+2J/S)}", s.theta, ceiling, s.theta > 0 && s.theta < ceiling);
    if (!(s.a > 1 && s.b > 1)) return rep;

    const ScheduleTable t = schedule_table(s, horizon + 1);
    const double r0 = r0_constant();
    for (int n = 0; n <= horizon; ++n) {
        const double sig = t.sigma[n + 1];
        add(n, "(ko61)", "σ_{n+1} ≥ σ̲", sig, sigma_floor, sig >= sigma_floor);
        const double l2 = std::pow(sig, s.p) * std::sqrt(t.delta[n]);
        add(n, "(ko61)", "σ_{n+1}^p δ_n^{1/2} ≤ 1", l2, 1, l2 <= 1);
        const double l3 = t.mu[n + 1] * std::sqrt(t.delta[n + 1]);
        add(n, "(ko61)", "μ_{n+1}δ_{n+1}^{1/2} ≥ 1", l3, 1, l3 >= 1);
        const double l4 = r0 / 5 * t.delta[n] / std::pow(sig, s.S) + s.g_norm / std::pow(t.mu[n], s.r_beta);
        const double r4 = r0 / 4 * t.delta[n + 1];
        add(n, "(ko62)", "(r₀/5)δ_n/σ_{n+1}^S + ‖g‖_{r,β}/μ_n^{r+β} ≤ (r₀/4)δ_{n+1}", l4, r4, l4 <= r4);
        const double l5 = measured_C * t.mu[n] * std::sqrt(t.delta[n]) * std::pow(sig, s.J);
        const double r5 = std::sqrt(t.delta[n + 1]) * t.mu[n + 1];
        add(n, "(ko63)", "Cμ_nδ_n^{1/2}σ_{n+1}^J ≤ δ_{n+1}^{1/2}μ_{n+1}", l5, r5, l5 <= r5);
    }
    return rep;
}

std::vector<std::string> alpha_violations(const Schedule& s, double alpha) {
    std::vector<std::string> v;
    const double c = s.alpha_ceiling();
    if (!(alpha > 0.0 && alpha < c))
        v.push_back("(ran_NK): 0 < α < min{(r+β)/2, 1/(1+2J/S)} violated: lhs=" + fmt(alpha) + ", rhs=" + fmt(c));
    else if (!(s.theta > alpha && s.theta < c))
        v.push_back("(th_t): α < θ < min{(r+β)/2, 1/(1+2J/S)} violated: lhs=" + fmt(s.theta) + ", rhs=(" +
                    fmt(alpha) + ", " + fmt(c) + ")");
    return v;
}

nlohmann::json IterationMetrics::to_json() const {
    return {{"n", n},
            {"delta", delta},
            {"mu", mu},
            {"sigma", sigma},
            {"c1_increment", c1_increment},
            {"u2", u2},
            {"defect_sup", defect_sup},
            {"defect_shifted", defect_shifted},
            {"shifted_target", shifted_target},
            {"final_target", final_target},
            {"c0_proximity", c0_proximity},
            {"interpolation", interpolation},
            {"holder", holder}};
}

namespace {

IterationMetrics metrics_from_json(const nlohmann::json& j) {
    IterationMetrics m;
    m.n = j.at("n");
    m.delta = j.at("delta");
    m.mu = j.at("mu");
    m.sigma = j.at("sigma");
    m.c1_increment = j.at("c1_increment");
    m.u2 = j.at("u2");
    m.defect_sup = j.at("defect_sup");
    m.defect_shifted = j.at("defect_shifted");
    m.shifted_target = j.at("shifted_target");
    m.final_target = j.at("final_target");
    m.c0_proximity = j.at("c0_proximity");
    m.interpolation = j.at("interpolation");
    m.holder = j.at("holder");
    return m;
}

// ‖u‖₂ with the carried gradient standing in for ∇u.
double c2_norm(const Field& u, const Grad& du) {
    return std::max({max_abs(u), grad_sup(du), second_derivative_sup(du)});
}

double interpolation_quantity(const ImmersionState& s, const ImmersionState& prev, double alpha) {
    const Grad dd = grad_minus(s.du, prev.du);
    const Field d = s.u - prev.u;
    const double n1 = std::max(max_abs(d), grad_sup(dd));
    const double n2 = std::max(n1, second_derivative_sup(dd));
    return std::pow(n2, alpha) * std::pow(n1, 1.0 - alpha);
}

}  // namespace

IterationMetrics measure_iterate(int n, const ImmersionState& s, const ImmersionState* prev, const Field& g,
                                 const Field& u_bar, double alpha) {
    IterationMetrics m;
    m.n = n;
    m.delta = s.delta;
    m.mu = s.mu;
    m.u2 = c2_norm(s.u, s.du);
    m.defect_sup = max_abs(defect(g, s.du));
    m.defect_shifted = max_abs(defect(g, s.du) - constant_sym(g.spec(), H0() * s.delta));
    m.shifted_target = r0_constant() / 4 * s.delta;
    m.final_target = (r0_constant() / 4 + h0_norm()) * s.delta;
    m.c0_proximity = max_abs(s.u - u_bar);
    m.holder = std::max(holder_seminorm(s.du.d1, alpha), holder_seminorm(s.du.d2, alpha));
    if (prev) {
        m.c1_increment = c1_distance(s, *prev);
        m.interpolation = interpolation_quantity(s, *prev, alpha);
    }
    return m;
}

nlohmann::json ConvergenceReport::to_json() const {
    return {{"status", status},
            {"increments", increments},
            {"increment_ratios", increment_ratios},
            {"defect", defect},
            {"defect_target", defect_target},
            {"holder", holder},
            {"ratio", ratio},
            {"defect_within_target", defect_within_target}};
}

ConvergenceReport convergence_report(const std::vector<ImmersionState>& iterates, const Field& g, double alpha) {
    ConvergenceReport r;
    if (iterates.size() < 2) {
        r.status = "insufficient";
        return r;
    }
    r.defect_within_target = true;
    for (std::size_t i = 0; i < iterates.size(); ++i) {
        const auto& s = iterates[i];
        r.defect.push_back(max_abs(defect(g, s.du)));
        r.defect_target.push_back((r0_constant() / 4 + h0_norm()) * s.delta);
        r.holder.push_back(std::max(holder_seminorm(s.du.d1, alpha), holder_seminorm(s.du.d2, alpha)));
        if (r.defect.back() > 2 * r.defect_target.back()) r.defect_within_target = false;
        if (i > 0) r.increments.push_back(interpolation_quantity(s, iterates[i - 1], alpha));
    }
    if (std::all_of(r.increments.begin(), r.increments.end(), [](double v) { return v == 0.0; })) {
        r.status = "stationary";
        return r;
    }
    double logsum = 0.0;
    for (std::size_t i = 1; i < r.increments.size(); ++i) {
        const double q = r.increments[i] / r.increments[i - 1];
        r.increment_ratios.push_back(q);
        logsum += std::log(q);
    }
    // a single increment has no successor to compare against; the defect contraction stands in
    if (!r.increment_ratios.empty())
        r.ratio = std::exp(logsum / static_cast<double>(r.increment_ratios.size()));
    else
        r.ratio = r.defect[r.defect.size() - 1] / r.defect[r.defect.size() - 2];
    r.status = r.ratio < 1.0 ? "contracting" : "non-contracting";
    return r;
}

nlohmann::json RunResult::to_json() const {
    nlohmann::json mj = nlohmann::json::array();
    for (const auto& m : metrics) mj.push_back(m.to_json());
    nlohmann::json tj = nlohmann::json::array();
    for (const auto& t : traces) tj.push_back(t.to_json());
    return {{"status", status},   {"note", note},       {"first_index", first_index},
            {"metrics", mj},      {"stages", tj},       {"initial", initial.to_json()},
            {"warnings", warnings}, {"feasibility", feasibility.to_json()}, {"convergence", convergence.to_json()}};
}

RunResult run(const Field& g, const Field& u_bar, const RunOptions& opts, const Checkpoint* resume) {
    require_same_grid(g, u_bar, "run");
    const Schedule& sch = opts.schedule;
    const bool enforce = opts.stage.enforce_gates;
    RunResult res;
    auto gate = [&](const std::string& msg) {
        if (enforce) throw GateError("assumption-violated", msg);
        res.warnings.push_back(msg);
    };
    for (const auto& v : alpha_violations(sch, opts.alpha)) gate(v);
    if (sch.S != opts.stage.N * opts.stage.K)
        gate("(thm_STA): S = NK violated: lhs=" + fmt(sch.S) + ", rhs=" + fmt(opts.stage.N * opts.stage.K));
    res.feasibility = validate_schedule(sch, std::max(opts.n_iters - 1, 0), opts.measured_C, opts.sigma_floor);
    if (opts.n_iters > 0 && !res.feasibility.feasible) gate(res.feasibility.first_failure);

    const ScheduleTable t = schedule_table(sch, opts.n_iters);
    auto check_c0 = [&](int n, const ImmersionState& s) {
        const double d = max_abs(s.u - u_bar);
        if (d > opts.epsilon) {
            const std::string msg = "(thm_NK): ‖u_n − ū‖₀ ≤ ε violated at n=" + std::to_string(n) + ": lhs=" +
                                    fmt(d) + ", rhs=" + fmt(opts.epsilon);
            if (enforce) throw Error("c0-proximity", msg);
            res.warnings.push_back(msg);
        }
    };
    auto snapshot = [&](int n) {
        if (!opts.snapshot_dir.empty())
            save_snapshot(opts.snapshot_dir / ("iter_" + std::to_string(n)), n, res.iterates.back(), res.metrics);
    };

    int start = 0;
    if (resume) {
        start = resume->index;
        res.iterates.push_back(resume->state);
        res.metrics = resume->metrics;
        res.first_index = start;
    } else {
        ImmersionState s0 = initial_stage(g, u_bar, t.delta[0], &res.initial, opts.initial);
        s0.delta = t.delta[0];
        s0.mu = t.mu[0];
        check_c0(0, s0);
        res.iterates.push_back(std::move(s0));
        res.metrics.push_back(measure_iterate(0, res.iterates.back(), nullptr, g, u_bar, opts.alpha));
        snapshot(0);
    }

    const double ceiling = frequency_ceiling(g.spec());
    for (int n = start; n < opts.n_iters; ++n) {
        StageParams sp = opts.stage;
        sp.delta = t.delta[n];
        sp.mu = t.mu[n];
        sp.sigma = t.sigma[n + 1];
        const double peak = stage_peak_frequency(sp);
        if (peak > ceiling) {
            res.status = "truncated-by-resolution";
            res.note = "iteration " + std::to_string(n) + ": peak frequency " + fmt(peak) + " > grid ceiling " +
                       fmt(ceiling);
            break;
        }
        StageTrace trace;
        ImmersionState next;
        try {
            next = stage(g, res.iterates.back(), sp, &trace);
        } catch (const GateError& e) {
            throw GateError(e.code(), "iteration " + std::to_string(n) + ": " + detail_of(e));
        } catch (const Error& e) {
            throw Error(e.code(), "iteration " + std::to_string(n) + ": " + detail_of(e));
        }
        next.delta = t.delta[n + 1];
        next.mu = t.mu[n + 1];
        check_c0(n + 1, next);
        res.traces.push_back(std::move(trace));
        res.metrics.push_back(measure_iterate(n + 1, next, &res.iterates.back(), g, u_bar, opts.alpha));
        res.metrics.back().sigma = sp.sigma;
        res.iterates.push_back(std::move(next));
        snapshot(n + 1);
    }
    res.convergence = convergence_report(res.iterates, g, opts.alpha);
    return res;
}

void save_snapshot(const std::filesystem::path& dir, int index, const ImmersionState& s,
                   const std::vector<IterationMetrics>& metrics) {
    std::filesystem::create_directories(dir);
    write_binary(s.u, dir / "u.bin");
    write_binary(s.du.d1, dir / "du1.bin");
    write_binary(s.du.d2, dir / "du2.bin");
    write_binary(s.E.e1, dir / "e1.bin");
    write_binary(s.E.e2, dir / "e2.bin");
    nlohmann::json mj = nlohmann::json::array();
    for (const auto& m : metrics) mj.push_back(m.to_json());
    std::ofstream os(dir / "state.json");
    if (!os) throw Error("io-error", "cannot write " + (dir / "state.json").string());
    os << nlohmann::json{{"index", index}, {"delta", s.delta}, {"mu", s.mu}, {"metrics", mj}}.dump(1) << '\n';
}

Checkpoint load_snapshot(const std::filesystem::path& dir) {
    std::ifstream is(dir / "state.json");
    if (!is) throw GateError("config-invalid", "no snapshot at " + dir.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw GateError("config-invalid", "snapshot state.json: " + std::string(e.what()));
    }
    Checkpoint c;
    c.index = j.at("index");
    c.state.u = read_binary(dir / "u.bin");
    c.state.du.d1 = read_binary(dir / "du1.bin");
    c.state.du.d2 = read_binary(dir / "du2.bin");
    c.state.E.e1 = read_binary(dir / "e1.bin");
    c.state.E.e2 = read_binary(dir / "e2.bin");
    c.state.delta = j.at("delta");
    c.state.mu = j.at("mu");
    for (const auto& m : j.at("metrics")) c.metrics.push_back(metrics_from_json(m));
    return c;
}

}  // namespace nkiso
