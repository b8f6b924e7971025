#include "nkiso/stage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "nkiso/corrugation.hpp"
#include "nkiso/error.hpp"
#include "nkiso/ibp.hpp"
#include "nkiso/profiles.hpp"

namespace nkiso {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string violation(const std::string& name, const std::string& ineq, double lhs, double rhs) {
    return name + ": " + ineq + " violated: lhs=" + fmt(lhs) + ", rhs=" + fmt(rhs);
}

double max_grad_diff(const Grad& a, const Grad& b) { return std::max(max_abs(a.d1 - b.d1), max_abs(a.d2 - b.d2)); }

double frame_diff(const NormalFrame& a, const NormalFrame& b) {
    return std::max(max_abs(a.e1 - b.e1), max_abs(a.e2 - b.e2));
}

std::pair<double, double> range_of(const Field& f) {
    const auto [lo, hi] = std::minmax_element(f.data().begin(), f.data().end());
    return {*lo, *hi};
}

struct Towers {
    ProfileTower ddbar, ggp, gamma, gammabar;
    explicit Towers(int depth)
        : ddbar(build_tower(ProfileKind::kuiper_ddbar, depth)),
          ggp(build_tower(ProfileKind::product_gammagammaprime, depth)),
          gamma(build_tower(ProfileKind::kuiper_gamma, depth)),
          gammabar(build_tower(ProfileKind::kuiper_gammabar, depth)) {}
};

struct CorrugationOut {
    Field u;
    Grad du;
    NormalFrame E;
    WField W;
    StepResult step;
};

// One Kuiper corrugation with W synthesised from the S terms. `normal`
// selects which frame vector carries the oscillation.
CorrugationOut corrugate(const Field& u, const Grad& du, const NormalFrame& E, int normal, const Field& a,
                         Direction dir, double freq, int depth, bool with_s1, const Towers& tw, double rho,
                         PropagationReport* prop) {
    const Vec2 eta = direction_vector(dir);
    const Field& e = normal == 1 ? E.e1 : E.e2;
    KuiperSTerms S = kuiper_s_terms(du, e, a, eta);
    std::vector<STerm> terms;
    if (with_s1) terms.push_back({"S1", std::move(S.S1), &tw.ddbar, 2});
    terms.push_back({"S2", std::move(S.S2), &tw.ggp, 1});
    terms.push_back({"S3", std::move(S.S3), &tw.gamma, 1});
    terms.push_back({"S4", std::move(S.S4), &tw.gammabar, 1});
    CorrugationOut out;
    out.W = build_w_field(terms, freq, depth, dir);
    out.step = kuiper_step(u, du, e, a, eta, freq, out.W.W, out.W.dW);
    out.u = out.step.u_new;
    out.du = out.step.grad_new;
    out.E = propagate_frame(du, out.du, E, rho, prop);
    return out;
}

void fill_row(CorrugationRecord& row, const CorrugationOut& c, const NormalFrame& E_before, const Field& a,
              double defect_before, double defect_after, double gamma, bool enforce) {
    row.defect_before = defect_before;
    row.defect_after = defect_after;
    std::tie(row.amp_min, row.amp_max) = range_of(a);
    for (const auto& [label, f] : c.step.errors) row.norms[label] = max_abs(f);
    row.norms["Gcal"] = max_abs(c.W.Gcal);
    row.norms["G"] = max_abs(c.W.G);
    row.frame_drift = frame_diff(E_before, c.E);
    const FrameResiduals fr = frame_residuals(c.du, c.E);
    row.orthonormality = fr.orthonormality;
    row.normality = fr.normality;
    if (gamma > 0.0) {
        const ImmersionBounds b = immersion_bounds_check(c.du, gamma, !enforce);
        row.min_eig = b.min_eig;
        row.max_eig = b.max_eig;
    } else {
        const ImmersionBounds b = immersion_bounds_check(c.du, 1e300, true);
        row.min_eig = b.min_eig;
        row.max_eig = b.max_eig;
    }
}

double defect_norm(const Field& g0, const Grad& du, double delta) {
    return max_abs(defect(g0, du) - constant_sym(g0.spec(), H0() * delta));
}

}  // namespace

nlohmann::json StageParams::to_json() const {
    return {{"N", N}, {"K", K}, {"sigma", sigma}, {"delta", delta}, {"mu", mu}, {"gamma_lower", gamma_lower},
            {"enforce_gates", enforce_gates}, {"mollify", mollify}, {"mollify_C", mollify_C}, {"rho", rho}};
}

std::vector<std::string> parameter_violations(const StageParams& p) {
    std::vector<std::string> v;
    if (p.N < 4) v.push_back(violation("(thm_STA)", "N ≥ 4", p.N, 4));
    if (p.K < 4) v.push_back(violation("(thm_STA)", "K ≥ 4", p.K, 4));
    if (!(p.sigma > 1.0)) v.push_back(violation("(thm_STA)", "σ > 1", p.sigma, 1));
    if (!(p.delta > 0.0 && p.delta < 1.0)) v.push_back(violation("(thm_STA)", "δ ∈ (0,1)", p.delta, 1));
    const double lhs1 = p.mu * std::sqrt(p.delta);
    if (!(lhs1 >= 1.0)) v.push_back(violation("(Ass1)", "μδ^{1/2} ≥ 1", lhs1, 1));
    const double lhs2 = std::pow(p.sigma, 3 * p.N + 3) * p.delta;
    if (!(lhs2 <= 1.0)) v.push_back(violation("(Ass1)", "σ^{3N+3}δ ≤ 1", lhs2, 1));
    return v;
}

StageSchedule stage_schedule(const StageParams& p) {
    StageSchedule s;
    const double sN = std::pow(p.sigma, p.N);
    s.delta.push_back(p.delta);
    s.mu.push_back(p.mu);
    for (int k = 1; k <= p.K; ++k) {
        s.delta.push_back(s.delta.back() / sN);
        s.mu.push_back(k == 1 ? p.mu * std::pow(p.sigma, p.N + 2) : s.mu.back() * std::pow(p.sigma, 0.5 * p.N + 2));
    }
    return s;
}

double stage_peak_frequency(const StageParams& p) {
    const StageSchedule s = stage_schedule(p);
    double peak = 0.0;
    for (int k = 0; k < p.K; ++k) {
        const double kappa = s.mu[k] * p.sigma * p.sigma;
        peak = std::max({peak, effective_frequency(kappa, eta(2)), effective_frequency(s.mu[k + 1], eta(3))});
    }
    return peak;
}

nlohmann::json StageTrace::to_json() const {
    nlohmann::json rj = nlohmann::json::array();
    for (const auto& r : rows)
        rj.push_back({{"k", r.k}, {"step", r.step}, {"frequency", r.frequency}, {"defect_before", r.defect_before},
                      {"defect_after", r.defect_after}, {"amp_min", r.amp_min}, {"amp_max", r.amp_max},
                      {"norms", r.norms}, {"frame_drift", r.frame_drift}, {"orthonormality", r.orthonormality},
                      {"normality", r.normality}, {"min_eig", r.min_eig}, {"max_eig", r.max_eig}});
    nlohmann::json ij = nlohmann::json::array();
    for (const auto& r : inner)
        ij.push_back({{"k", r.k}, {"delta_k", r.delta_k}, {"delta_next", r.delta_next}, {"mu_k", r.mu_k},
                      {"mu_next", r.mu_next}, {"lambda", r.lambda}, {"kappa", r.kappa}, {"defect_in", r.defect_in},
                      {"defect_out", r.defect_out}, {"c1_drift", r.c1_drift}, {"frame_drift", r.frame_drift},
                      {"b2_min", r.b2_min}, {"b2_max", r.b2_max}, {"kallen", r.kallen}});
    return {{"rows", rj}, {"inner", ij}, {"warnings", warnings}, {"mollify_C", mollify_C}, {"mollify_l", mollify_l},
            {"commutator", commutator}, {"g_gap", g_gap}, {"defect_in", defect_in}, {"defect_out", defect_out},
            {"defect_out_g", defect_out_g}, {"c1_total", c1_total}};
}

void StageTrace::write_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw Error("io-error", "cannot open " + path.string());
    os.precision(17);
    static const char* keys[] = {"F", "nabla_term", "S1", "Gcal", "G", "R1", "R2"};
    os << "k,step,frequency,defect_before,defect_after,amp_min,amp_max,frame_drift,orthonormality,normality,min_eig,max_eig";
    for (const char* k : keys) os << ',' << k;
    os << '\n';
    for (const auto& r : rows) {
        os << r.k << ',' << r.step << ',' << r.frequency << ',' << r.defect_before << ',' << r.defect_after << ','
           << r.amp_min << ',' << r.amp_max << ',' << r.frame_drift << ',' << r.orthonormality << ',' << r.normality
           << ',' << r.min_eig << ',' << r.max_eig;
        for (const char* k : keys) {
            auto it = r.norms.find(k);
            os << ',' << (it == r.norms.end() ? 0.0 : it->second);
        }
        os << '\n';
    }
}

double c1_distance(const ImmersionState& a, const ImmersionState& b) {
    return std::max(max_abs(a.u - b.u), max_grad_diff(a.du, b.du));
}

double second_derivative_sup(const Grad& du) {
    return std::max({max_abs(derivative(du.d1, 1)), max_abs(derivative(du.d1, 2)), max_abs(derivative(du.d2, 2))});
}

ImmersionState triple_corrugation(const ImmersionState& s, const Field& g0, const TripleParams& tp,
                                  const TripleOptions& opts, StageTrace& trace) {
    const GridSpec& spec = s.u.spec();
    const double lambda = tp.mu_k * tp.sigma;
    const double kappa = lambda * tp.sigma;
    require_resolved(spec, effective_frequency(lambda, eta(1)), "λ = μ_kσ");
    require_resolved(spec, effective_frequency(kappa, eta(2)), "κ = μ_kσ² along η₂");
    require_resolved(spec, effective_frequency(tp.mu_next, eta(3)), "μ_{k+1}");

    InnerRecord rec;
    rec.k = tp.k;
    rec.delta_k = tp.delta_k;
    rec.delta_next = tp.delta_next;
    rec.mu_k = tp.mu_k;
    rec.mu_next = tp.mu_next;
    rec.lambda = lambda;
    rec.kappa = kappa;
    rec.defect_in = defect_norm(g0, s.du, tp.delta_k);

    // Källén on the normalized defect
    const Field D = defect(g0, s.du) - constant_sym(spec, H0() * tp.delta_next);
    KallenResult kr;
    if (opts.forced) {
        kr = *opts.forced;
    } else {
        try {
            kr = kallen_decompose((1.0 / tp.delta_k) * D, lambda, kappa, tp.N);
        } catch (const Error& e) {
            const std::string w = e.what();
            const auto cut = w.find(": ");
            throw Error(e.code(), "inner step k=" + std::to_string(tp.k) + ": " +
                                      (cut == std::string::npos ? w : w.substr(cut + 2)));
        }
    }
    rec.kallen = kr.to_json();
    const double sd = std::sqrt(tp.delta_k);
    const Field a1 = sd * kr.a1, a2 = sd * kr.a2, a3 = sd * kr.a3;

    const Towers tw(tp.N + 1);
    const double F_norm = kr.F.empty() ? 0.0 : tp.delta_k * max_abs(kr.F);

    // first corrugation: η₁ at λ with E¹_{u_k}
    PropagationReport prop;
    CorrugationOut c1 = corrugate(s.u, s.du, s.E, 1, a1, Direction::eta1, lambda, tp.N, true, tw, opts.rho, &prop);
    {
        CorrugationRecord row;
        row.k = tp.k;
        row.step = 1;
        row.frequency = lambda;
        fill_row(row, c1, s.E, a1, rec.defect_in, defect_norm(g0, c1.du, tp.delta_next), opts.gamma, opts.enforce);
        row.norms["F"] = F_norm;
        trace.rows.push_back(std::move(row));
    }

    // second corrugation: η₂ at κ with E¹_U
    CorrugationOut c2 = corrugate(c1.u, c1.du, c1.E, 1, a2, Direction::eta2, kappa, tp.N, true, tw, opts.rho, &prop);
    {
        CorrugationRecord row;
        row.k = tp.k;
        row.step = 2;
        row.frequency = kappa;
        fill_row(row, c2, c1.E, a2, trace.rows.back().defect_after, defect_norm(g0, c2.du, tp.delta_next), opts.gamma,
                 opts.enforce);
        trace.rows.push_back(std::move(row));
    }

    // b² = a₃² − G − Ḡ
    Field b2 = mul(a3, a3) - c1.W.G - c2.W.G;
    std::tie(rec.b2_min, rec.b2_max) = range_of(b2);
    if (rec.b2_min < tp.delta_k / 8) {
        const std::string msg = "(Ebounds2b): b² ≥ δ_k/8 violated at k=" + std::to_string(tp.k) +
                                ": min b²=" + fmt(rec.b2_min) + ", δ_k/8=" + fmt(tp.delta_k / 8);
        if (opts.enforce) throw Error("amplitude-collapse", msg);
        trace.warnings.push_back(msg + " (clamped)");
    } else if (rec.b2_min < tp.delta_k / 4) {
        trace.warnings.push_back("k=" + std::to_string(tp.k) + ": min b²=" + fmt(rec.b2_min) +
                                 " inside [δ_k/8, δ_k/4); kept as discretization margin");
    }
    Field b(spec, Arity::scalar);
    for (std::size_t n = 0; n < b.nodes(); ++n) b.comp(0)[n] = std::sqrt(std::max(b2.comp(0)[n], 0.0));

    // third corrugation: η₃ = e₂ at μ_{k+1} with E²_Ū, two-term sums
    CorrugationOut c3 = corrugate(c2.u, c2.du, c2.E, 2, b, Direction::eta3, tp.mu_next, 1, false, tw, opts.rho, &prop);
    {
        CorrugationRecord row;
        row.k = tp.k;
        row.step = 3;
        row.frequency = tp.mu_next;
        fill_row(row, c3, c2.E, b, trace.rows.back().defect_after, defect_norm(g0, c3.du, tp.delta_next), opts.gamma,
                 opts.enforce);
        trace.rows.push_back(std::move(row));
    }

    ImmersionState out{std::move(c3.u), std::move(c3.du), std::move(c3.E), tp.delta_next, tp.mu_next};
    rec.defect_out = trace.rows.back().defect_after;
    rec.c1_drift = c1_distance(out, s);
    rec.frame_drift = frame_diff(out.E, s.E);
    trace.inner.push_back(std::move(rec));
    return out;
}

ImmersionState stage(const Field& g, const ImmersionState& s, const StageParams& p, StageTrace* trace_out) {
    StageTrace local;
    StageTrace& trace = trace_out ? *trace_out : local;
    const GridSpec& spec = s.u.spec();
    require_same_grid(g, s.u, "stage");

    auto gate = [&](const std::string& msg) {
        if (p.enforce_gates) throw GateError("assumption-violated", msg);
        trace.warnings.push_back(msg);
    };
    for (const auto& v : parameter_violations(p)) gate(v);
    require_resolved(spec, stage_peak_frequency(p), "stage peak frequency");

    const ImmersionBounds ib = immersion_bounds_check(s.du, 2 * p.gamma_lower, true);
    if (!ib.pass)
        gate(violation("(Ass2)", "(2γ̲)⁻¹Id ≤ (∇u)ᵀ∇u ≤ 2γ̲Id", ib.max_eig > 2 * p.gamma_lower ? ib.max_eig : ib.min_eig,
                       ib.max_eig > 2 * p.gamma_lower ? 2 * p.gamma_lower : 1 / (2 * p.gamma_lower)));
    trace.defect_in = defect_norm(g, s.du, p.delta);
    if (trace.defect_in > r0_constant() / 4 * p.delta)
        gate(violation("(Ass3)", "‖𝒟(g−δH₀,u)‖₀ ≤ (r₀/4)δ", trace.defect_in, r0_constant() / 4 * p.delta));
    const double d2 = second_derivative_sup(s.du);
    if (d2 > std::sqrt(p.delta) * p.mu) gate(violation("(Ass3)", "‖∇²u‖₀ ≤ δ^{1/2}μ", d2, std::sqrt(p.delta) * p.mu));

    // mollification at l = 1/(Cμ): smallest C whose commutator stays within (r₀/12)δ
    ImmersionState cur = s;
    Field g0 = g;
    if (p.mollify) {
        const double budget = r0_constant() / 12 * p.delta;
        bool ok = false;
        double C = p.mollify_C > 0.0 ? p.mollify_C : 1.0;
        for (;;) {
            const double l = 1.0 / (C * p.mu);
            if (l < 2 * spec.h || l > 1.0) {
                if (l > 1.0) {
                    C *= 2;
                    continue;
                }
                break;
            }
            ImmersionState m;
            m.u = mollify(s.u, l);
            m.du = gradient(m.u);
            const Field gl = mollify(g, l);
            const double comm = defect_norm(gl, m.du, p.delta) - trace.defect_in;
            trace.mollify_C = C;
            trace.mollify_l = l;
            trace.commutator = comm;
            if (comm <= budget || p.mollify_C > 0.0) {
                m.E = propagate_frame(s.du, m.du, s.E, p.rho);
                m.delta = s.delta;
                m.mu = s.mu;
                cur = std::move(m);
                g0 = gl;
                ok = comm <= budget;
                break;
            }
            C *= 2;
        }
        if (!ok)
            gate(violation("(m1)", "mollification commutator ≤ (r₀/12)δ", trace.commutator, budget) +
                 " (no admissible l ≥ 2h)");
    }
    trace.g_gap = max_abs(g - g0);

    const StageSchedule sch = stage_schedule(p);
    TripleOptions opts;
    opts.enforce = p.enforce_gates;
    opts.gamma = 3 * p.gamma_lower;
    opts.rho = p.rho;
    const ImmersionState start = cur;
    for (int k = 0; k < p.K; ++k) {
        TripleParams tp{k, p.N, sch.delta[k], sch.delta[k + 1], sch.mu[k], sch.mu[k + 1], p.sigma};
        cur = triple_corrugation(cur, g0, tp, opts, trace);
    }
    trace.defect_out = defect_norm(g0, cur.du, sch.delta[p.K]);
    trace.defect_out_g = defect_norm(g, cur.du, sch.delta[p.K]);
    trace.c1_total = c1_distance(cur, start);
    return cur;
}

nlohmann::json InitialStageReport::to_json() const {
    nlohmann::json dirs = nlohmann::json::array();
    for (const auto& d : directions) dirs.push_back({d.v1, d.v2});
    return {{"l", l}, {"epsilon", epsilon}, {"C_bar", C_bar}, {"frequencies", frequencies}, {"directions", dirs},
            {"max_active", max_active}, {"defect", defect}, {"target", target}, {"c0_distance", c0_distance},
            {"c1_distance", c1_distance}, {"gamma", gamma}, {"bounds", bounds.to_json()}, {"attempts", attempts}};
}

ImmersionState initial_stage(const Field& g, const Field& u_bar, double delta, InitialStageReport* report,
                             const InitialStageOptions& opts) {
    require_same_grid(g, u_bar, "initial_stage");
    const GridSpec& spec = u_bar.spec();
    const Grad dub = gradient(u_bar);
    const Field D0 = defect(g, dub);
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < D0.nodes(); ++n) {
        const SymMat2 m{D0.comp(0)[n], D0.comp(1)[n], D0.comp(2)[n]};
        dmin = std::min(dmin, m.eigenvalues()[0]);
    }
    if (!(dmin > 0.0)) throw Error("not-short", "𝒟(g, ū) > 0 violated: min eigenvalue=" + fmt(dmin));

    // γ̲ from ū and g
    const ImmersionBounds ub = immersion_bounds_check(dub, 1e300, true);
    double gmax = 0.0, gmin = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        const auto ev = SymMat2{g.comp(0)[n], g.comp(1)[n], g.comp(2)[n]}.eigenvalues();
        gmin = std::min(gmin, ev[0]);
        gmax = std::max(gmax, ev[1]);
    }
    const double gamma =
        opts.gamma > 0.0 ? opts.gamma : 2.0 * std::max({1.0 / ub.min_eig, ub.max_eig, gmax, 1.0 / gmin});

    InitialStageReport rep;
    rep.target = r0_constant() / 4 * delta;
    rep.gamma = gamma;
    double C_bar = opts.C_bar;
    ImmersionState best;
    for (int attempt = 1; attempt <= opts.attempts; ++attempt) {
        rep.attempts = attempt;
        rep.C_bar = C_bar;
        const double e = r0_constant() / (8 * C_bar) * delta;
        rep.epsilon = e;
        rep.l = std::max(2 * spec.h, std::pow(e, 1.0 / opts.r_beta));
        const Field gl = mollify(g, rep.l);
        const Field H = defect(gl, dub) - constant_sym(spec, H0() * delta);
        double emin = std::numeric_limits<double>::infinity(), emax = 0.0;
        for (std::size_t n = 0; n < H.nodes(); ++n) {
            const auto ev = SymMat2{H.comp(0)[n], H.comp(1)[n], H.comp(2)[n]}.eigenvalues();
            emin = std::min(emin, ev[0]);
            emax = std::max(emax, ev[1]);
        }
        if (!(emin > 0.0))
            throw Error("not-short", "𝒟(g_l − δH₀, ū) > 0 violated: min eigenvalue=" + fmt(emin) + " (decrease δ)");
        const PouResult pou = pou_decompose(H, emin, emax);
        rep.max_active = pou.max_active;

        // λ_i ∝ (εl)^{-i}, the last one placed at the grid ceiling
        const std::size_t M = pou.terms.size();
        const double ratio = opts.ratio > 0.0 ? opts.ratio : e * rep.l;
        rep.frequencies.assign(M, 0.0);
        rep.directions.clear();
        for (std::size_t i = 0; i < M; ++i) {
            const Vec2 d = pou.terms[i].eta;
            rep.directions.push_back(d);
            const double top = frequency_ceiling(spec) / (std::abs(d.v1) + std::abs(d.v2));
            rep.frequencies[i] = top * std::pow(ratio, static_cast<double>(M - 1 - i));
        }

        ImmersionState st;
        st.u = u_bar;
        st.du = dub;
        st.E = initial_normal_frame(dub);
        for (std::size_t i = 0; i < M; ++i) {
            // below half a period across the domain the spiral is a slow bend; cos − 1
            // keeps its offset bounded
            const double span = std::abs(pou.terms[i].eta.v1) + std::abs(pou.terms[i].eta.v2);
            const double shift = rep.frequencies[i] * span < std::numbers::pi ? 1.0 : 0.0;
            StepResult r = nash_spiral_step(st.u, st.du, st.E, pou.terms[i].phi, pou.terms[i].eta, rep.frequencies[i], shift);
            NormalFrame E = project_frame(r.grad_new, st.E);
            st.u = std::move(r.u_new);
            st.du = std::move(r.grad_new);
            st.E = std::move(E);
        }
        // a rigid translation keeps u₀ next to ū without touching the metric
        for (int c = 0; c < 4; ++c) {
            const double* a = st.u.comp(c);
            const double* b = u_bar.comp(c);
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (std::size_t n = 0; n < st.u.nodes(); ++n) {
                lo = std::min(lo, a[n] - b[n]);
                hi = std::max(hi, a[n] - b[n]);
            }
            const double shift = 0.5 * (lo + hi);
            double* w = st.u.comp(c);
            for (std::size_t n = 0; n < st.u.nodes(); ++n) w[n] -= shift;
        }
        st.delta = delta;
        rep.defect = defect_norm(g, st.du, delta);
        rep.c0_distance = max_abs(st.u - u_bar);
        rep.c1_distance = max_grad_diff(st.du, dub);
        best = std::move(st);
        if (rep.defect <= rep.target) break;
        C_bar *= 4.0 * rep.defect / rep.target;
    }
    if (rep.defect > rep.target) {
        if (report) *report = rep;
        throw Error("initial-stage-failed", "(step0_2): ‖𝒟(g−δH₀,u₀)‖₀ ≤ (r₀/4)δ violated: lhs=" + fmt(rep.defect) +
                                                ", rhs=" + fmt(rep.target) +
                                                "; increase the grid resolution or decrease δ");
    }
    rep.bounds = immersion_bounds_check(best.du, gamma, true);
    if (report) *report = rep;
    if (!rep.bounds.pass)
        throw Error("initial-stage-failed", "(step0_3): γ̲⁻¹Id ≤ (∇u₀)ᵀ∇u₀ ≤ γ̲Id violated: eigenvalues in [" +
                                                fmt(rep.bounds.min_eig) + ", " + fmt(rep.bounds.max_eig) +
                                                "], γ̲=" + fmt(gamma));
    return best;
}

}  // namespace nkiso
