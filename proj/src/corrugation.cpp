#include "nkiso/corrugation.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "nkiso/error.hpp"
#include "nkiso/profiles.hpp"

namespace nkiso {

namespace {

std::string sci(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

using V4 = std::array<double, 4>;

V4 load(const Field& f, std::size_t n) { return {f.comp(0)[n], f.comp(1)[n], f.comp(2)[n], f.comp(3)[n]}; }
void store(Field& f, std::size_t n, const V4& v) {
    for (int c = 0; c < 4; ++c) f.comp(c)[n] = v[static_cast<std::size_t>(c)];
}
double dot(const V4& a, const V4& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]; }
// x + s y
V4 axpy(const V4& x, double s, const V4& y) { return {x[0] + s * y[0], x[1] + s * y[1], x[2] + s * y[2], x[3] + s * y[3]}; }
V4 lin(double s, const V4& x, double t, const V4& y) {
    return {s * x[0] + t * y[0], s * x[1] + t * y[1], s * x[2] + t * y[2], s * x[3] + t * y[3]};
}

struct S3 {
    double a11, a12, a22;
};
S3 operator*(double s, const S3& m) { return {s * m.a11, s * m.a12, s * m.a22}; }
S3 operator+(const S3& a, const S3& b) { return {a.a11 + b.a11, a.a12 + b.a12, a.a22 + b.a22}; }

// sym(XᵀY) for X = [x1 x2], Y = [y1 y2].
S3 sym_xty(const V4& x1, const V4& x2, const V4& y1, const V4& y2) {
    return {dot(x1, y1), 0.5 * (dot(x1, y2) + dot(x2, y1)), dot(x2, y2)};
}
// sym(v⊗w)
S3 sym_vw(double v1, double v2, double w1, double w2) { return {v1 * w1, 0.5 * (v1 * w2 + v2 * w1), v2 * w2}; }

void put(Field& f, std::size_t n, const S3& m) {
    f.comp(0)[n] = m.a11;
    f.comp(1)[n] = m.a12;
    f.comp(2)[n] = m.a22;
}

void check_inputs(const Field& u, const Grad& du, const Field& a, double lambda) {
    if (u.arity() != Arity::vec4 || du.d1.arity() != Arity::vec4) throw Error("arity-mismatch", "step expects vec4 u");
    if (a.arity() != Arity::scalar) throw Error("arity-mismatch", "amplitude must be scalar");
    require_same_grid(u, a, "step");
    require_same_grid(u, du.d1, "step");
    if (!(lambda > 0.0)) throw Error("invalid-frequency", "lambda must be positive");
    if (!a.all_finite() || !u.all_finite()) throw Error("invalid-field", "non-finite step input");
}

void check_frame(const Grad& du, const NormalFrame& E) {
    const auto r = frame_residuals(du, E);
    if (r.orthonormality > 1e-10 || r.normality > 1e-8)
        throw Error("frame-invalid", "orthonormality " + sci(r.orthonormality) + ", normality " +
                                         sci(r.normality));
}

}  // namespace

const Field& StepResult::error(const std::string& label) const {
    for (const auto& [k, f] : errors)
        if (k == label) return f;
    throw Error("unknown-term", label);
}

Field StepResult::error_sum() const {
    Field s(principal.spec(), Arity::sym2);
    for (const auto& e : errors) s += e.second;
    return s;
}

double effective_frequency(double lambda, Vec2 eta) { return lambda * (std::abs(eta.v1) + std::abs(eta.v2)); }

Field phase_field(const GridSpec& spec, Vec2 eta) {
    return Field::scalar(spec, [&](double x1, double x2) { return x1 * eta.v1 + x2 * eta.v2; });
}

StepResult nash_spiral_step(const Field& u, const Grad& du, const NormalFrame& E, const Field& a, Vec2 eta,
                            double lambda, double gammabar_shift) {
    check_inputs(u, du, a, lambda);
    const GridSpec& g = u.spec();
    require_resolved(g, effective_frequency(lambda, eta), "nash spiral");
    check_frame(du, E);

    static const ProfileTower gam = build_tower(ProfileKind::nash_gamma, 0);
    static const ProfileTower bar = build_tower(ProfileKind::nash_gammabar, 0);
    const Field t = phase_field(g, eta);
    const Grad da = gradient(a);
    const FrameDerivatives D = frame_derivatives(E);

    StepResult r;
    r.u_new = Field(g, Arity::vec4);
    r.grad_new = {Field(g, Arity::vec4), Field(g, Arity::vec4)};
    r.principal = scaled_sym(mul(a, a), outer(eta));
    const char* labels[7] = {"R.gamma_uE1", "R.gammabar_uE2", "R.twist", "R.E1E1", "R.E2E2", "R.E1E2", "R.grad_a"};
    std::vector<Field> R(7, Field(g, Arity::sym2));

    const double il = 1.0 / lambda;
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        const double ph = lambda * t.comp(0)[n];
        const double G = gam.eval(0, ph), Gp = gam.eval(-1, ph);
        const double B = bar.eval(0, ph) - gammabar_shift, Bp = bar.eval(-1, ph);
        const double av = a.comp(0)[n], a1 = da.d1.comp(0)[n], a2 = da.d2.comp(0)[n];
        const V4 A1 = load(du.d1, n), A2 = load(du.d2, n);
        const V4 e1 = load(E.e1, n), e2 = load(E.e2, n);
        const V4 P1 = load(D.e1.d1, n), P2 = load(D.e1.d2, n);  // ∂_j E¹
        const V4 Q1 = load(D.e2.d1, n), Q2 = load(D.e2.d2, n);  // ∂_j E²

        store(r.u_new, n, axpy(axpy(load(u, n), G * il * av, e1), B * il * av, e2));
        const double aj[2] = {a1, a2};
        const double ej[2] = {eta.v1, eta.v2};
        const V4* Aj[2] = {&A1, &A2};
        const V4* Pj[2] = {&P1, &P2};
        const V4* Qj[2] = {&Q1, &Q2};
        for (int j = 0; j < 2; ++j) {
            V4 col = *Aj[j];
            col = axpy(col, Gp * av * ej[j] + G * il * aj[j], e1);
            col = axpy(col, G * il * av, *Pj[j]);
            col = axpy(col, Bp * av * ej[j] + B * il * aj[j], e2);
            col = axpy(col, B * il * av, *Qj[j]);
            store(j == 0 ? r.grad_new.d1 : r.grad_new.d2, n, col);
        }

        const double a2v = av * av;
        put(R[0], n, (2.0 * G * il * av) * sym_xty(A1, A2, P1, P2));
        put(R[1], n, (2.0 * B * il * av) * sym_xty(A1, A2, Q1, Q2));
        put(R[2], n, (2.0 * il * a2v) * sym_vw(dot(e1, Q1), dot(e1, Q2), eta.v1, eta.v2));
        put(R[3], n, (G * G * il * il * a2v) * sym_xty(P1, P2, P1, P2));
        put(R[4], n, (B * B * il * il * a2v) * sym_xty(Q1, Q2, Q1, Q2));
        put(R[5], n, (2.0 * G * B * il * il * a2v) * sym_xty(P1, P2, Q1, Q2));
        put(R[6], n, (il * il) * sym_vw(a1, a2, a1, a2));
    }
    for (int k = 0; k < 7; ++k) r.errors.emplace_back(labels[k], std::move(R[static_cast<std::size_t>(k)]));
    r.pullback_diff = pullback(r.grad_new) - pullback(du);
    return r;
}

StepResult nash_spiral_step(const Field& u, const NormalFrame& E, const Field& a, Vec2 eta, double lambda,
                            double gammabar_shift) {
    return nash_spiral_step(u, gradient(u), E, a, eta, lambda, gammabar_shift);
}

KuiperSTerms kuiper_s_terms(const Grad& du, const Field& E, const Field& a, Vec2 eta) {
    const GridSpec& g = a.spec();
    const Grad T = tangent_frame(du);
    const Grad dt1 = gradient(T.d1), dt2 = gradient(T.d2);
    const Grad DE = unit_field_derivative(E);
    const Grad da = gradient(a);
    KuiperSTerms s{Field(g, Arity::sym2), Field(g, Arity::sym2), Field(g, Arity::sym2), Field(g, Arity::sym2)};
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        const double av = a.comp(0)[n], a1 = da.d1.comp(0)[n], a2 = da.d2.comp(0)[n];
        const V4 A1 = load(du.d1, n), A2 = load(du.d2, n);
        const V4 Teta = lin(eta.v1, load(T.d1, n), eta.v2, load(T.d2, n));
        // ∂_j(a² Tη) = 2a ∂_j a Tη + a² (∂_j T) η
        const V4 q1 = lin(2.0 * av * a1, Teta, av * av, lin(eta.v1, load(dt1.d1, n), eta.v2, load(dt2.d1, n)));
        const V4 q2 = lin(2.0 * av * a2, Teta, av * av, lin(eta.v1, load(dt1.d2, n), eta.v2, load(dt2.d2, n)));
        put(s.S1, n, sym_vw(a1, a2, a1, a2));
        put(s.S2, n, (2.0 * av) * sym_vw(a1, a2, eta.v1, eta.v2));
        put(s.S3, n, (2.0 * av) * sym_xty(A1, A2, load(DE.d1, n), load(DE.d2, n)));
        put(s.S4, n, 2.0 * sym_xty(A1, A2, q1, q2));
    }
    return s;
}

StepResult kuiper_step(const Field& u, const Grad& du, const Field& E, const Field& a, Vec2 eta, double lambda,
                       const Field& w, const Grad& dw, const KuiperOptions& opts) {
    check_inputs(u, du, a, lambda);
    if (w.arity() != Arity::vec2) throw Error("arity-mismatch", "w must be vec2");
    if (!w.all_finite() || !dw.d1.all_finite() || !dw.d2.all_finite()) throw Error("invalid-field", "non-finite w");
    const GridSpec& g = u.spec();
    require_resolved(g, effective_frequency(lambda, eta), "kuiper corrugation");
    {
        double worst_norm = 0.0, worst_normal = 0.0;
        for (std::size_t n = 0; n < g.nodes(); ++n) {
            const V4 e = load(E, n);
            worst_norm = std::max(worst_norm, std::abs(std::sqrt(dot(e, e)) - 1.0));
            worst_normal = std::max({worst_normal, std::abs(dot(e, load(du.d1, n))), std::abs(dot(e, load(du.d2, n)))});
        }
        if (worst_norm > 1e-10 || worst_normal > 1e-8)
            throw Error("frame-invalid", "unit normal residuals " + sci(worst_norm) + ", " + sci(worst_normal));
    }

    static const ProfileTower gam = build_tower(ProfileKind::kuiper_gamma, 0);
    static const ProfileTower bar = build_tower(ProfileKind::kuiper_gammabar, 0);
    const Field t = phase_field(g, eta);
    const Grad da = gradient(a);
    const Grad T = tangent_frame(du);
    const Grad dt1 = gradient(T.d1), dt2 = gradient(T.d2);
    const Grad DE = unit_field_derivative(E);

    StepResult r;
    r.u_new = Field(g, Arity::vec4);
    r.grad_new = {Field(g, Arity::vec4), Field(g, Arity::vec4)};
    r.principal = scaled_sym(mul(a, a), outer(eta));
    const char* labels[8] = {"nabla_term", "S1", "S2", "S3", "S4", "sym_grad_w", "R1", "R2"};
    std::vector<Field> F(8, Field(g, Arity::sym2));

    const double il = 1.0 / lambda;
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        const double ph = lambda * t.comp(0)[n];
        const double G = gam.eval(0, ph), Gp = gam.eval(-1, ph);
        const double B = bar.eval(0, ph), Bp = bar.eval(-1, ph);
        const double av = a.comp(0)[n], a1 = da.d1.comp(0)[n], a2 = da.d2.comp(0)[n];
        const double w1 = w.comp(0)[n], w2 = w.comp(1)[n];
        const V4 A1 = load(du.d1, n), A2 = load(du.d2, n);
        const V4 e = load(E, n);
        const V4 D1 = load(DE.d1, n), D2 = load(DE.d2, n);
        const V4 t1 = load(T.d1, n), t2 = load(T.d2, n);
        const V4 t1_1 = load(dt1.d1, n), t1_2 = load(dt1.d2, n);  // ∂_j t1
        const V4 t2_1 = load(dt2.d1, n), t2_2 = load(dt2.d2, n);  // ∂_j t2

        const V4 Teta = lin(eta.v1, t1, eta.v2, t2);
        const double aa = av * av;
        // q = a² Tη and its partials
        const V4 q1 = lin(2.0 * av * a1, Teta, aa, lin(eta.v1, t1_1, eta.v2, t2_1));
        const V4 q2 = lin(2.0 * av * a2, Teta, aa, lin(eta.v1, t1_2, eta.v2, t2_2));
        // (∂_j T) w and ∂_j(T w)
        const V4 Tw = lin(w1, t1, w2, t2);
        const V4 dTw1 = lin(w1, t1_1, w2, t2_1), dTw2 = lin(w1, t1_2, w2, t2_2);
        const V4 p1 = lin(1.0, dTw1, 1.0, lin(dw.d1.comp(0)[n], t1, dw.d1.comp(1)[n], t2));
        const V4 p2 = lin(1.0, dTw2, 1.0, lin(dw.d2.comp(0)[n], t1, dw.d2.comp(1)[n], t2));
        // ∂_j(aE)
        const V4 f1 = lin(a1, e, av, D1), f2 = lin(a2, e, av, D2);

        store(r.u_new, n, lin(1.0, axpy(axpy(load(u, n), G * il * av, e), B * il * aa, Teta), 1.0, Tw));
        const double ej[2] = {eta.v1, eta.v2};
        const V4* Aj[2] = {&A1, &A2};
        const V4* pj[2] = {&p1, &p2};
        const V4* fj[2] = {&f1, &f2};
        const V4* qj[2] = {&q1, &q2};
        for (int j = 0; j < 2; ++j) {
            V4 col = *Aj[j];
            col = axpy(col, av * Gp * ej[j], e);
            col = axpy(col, aa * Bp * ej[j], Teta);
            col = axpy(col, 1.0, *pj[j]);
            col = axpy(col, G * il, *fj[j]);
            col = axpy(col, B * il, *qj[j]);
            store(j == 0 ? r.grad_new.d1 : r.grad_new.d2, n, col);
        }

        const S3 gaga = sym_vw(a1, a2, a1, a2);
        put(F[0], n, (il * il) * gaga);
        put(F[1], n, ((G * G - 1.0) * il * il) * gaga);
        put(F[2], n, (G * Gp * il * 2.0 * av) * sym_vw(a1, a2, eta.v1, eta.v2));
        put(F[3], n, (opts.s3_scale * G * il * 2.0 * av) * sym_xty(A1, A2, D1, D2));
        put(F[4], n, (B * il * 2.0) * sym_xty(A1, A2, q1, q2));
        put(F[5], n, S3{2.0 * dw.d1.comp(0)[n], dw.d2.comp(0)[n] + dw.d1.comp(1)[n], 2.0 * dw.d2.comp(1)[n]});

        const S3 ee = sym_vw(eta.v1, eta.v2, eta.v1, eta.v2);
        S3 R1 = (Bp * Bp * aa * aa * dot(Teta, Teta)) * ee;
        R1 = R1 + (2.0 * Gp * B * il * av) * sym_vw(eta.v1, eta.v2, dot(e, q1), dot(e, q2));
        R1 = R1 + (2.0 * G * Bp * il * aa * av) * sym_vw(eta.v1, eta.v2, dot(Teta, D1), dot(Teta, D2));
        R1 = R1 + (2.0 * B * Bp * il * aa) * sym_vw(eta.v1, eta.v2, dot(Teta, q1), dot(Teta, q2));
        R1 = R1 + (G * G * il * il * aa) * sym_xty(D1, D2, D1, D2);
        R1 = R1 + (2.0 * G * B * il * il) * sym_xty(f1, f2, q1, q2);
        R1 = R1 + (B * B * il * il) * sym_xty(q1, q2, q1, q2);
        put(F[6], n, R1);

        S3 R2 = 2.0 * sym_xty(A1, A2, dTw1, dTw2);
        R2 = R2 + (2.0 * Gp * av) * sym_vw(eta.v1, eta.v2, dot(e, p1), dot(e, p2));
        R2 = R2 + (2.0 * Bp * aa) * sym_vw(eta.v1, eta.v2, dot(Teta, p1), dot(Teta, p2));
        R2 = R2 + sym_xty(p1, p2, p1, p2);
        R2 = R2 + (2.0 * G * il) * sym_xty(f1, f2, p1, p2);
        R2 = R2 + (2.0 * B * il) * sym_xty(q1, q2, p1, p2);
        put(F[7], n, R2);
    }
    for (int k = 0; k < 8; ++k) r.errors.emplace_back(labels[k], std::move(F[static_cast<std::size_t>(k)]));
    r.pullback_diff = pullback(r.grad_new) - pullback(du);
    return r;
}

StepResult kuiper_step(const Field& u, const Field& E, const Field& a, Vec2 eta, double lambda, const Field& w,
                       const KuiperOptions& opts) {
    return kuiper_step(u, gradient(u), E, a, eta, lambda, w, gradient(w), opts);
}

nlohmann::json StepReport::to_json() const {
    nlohmann::json terms = nlohmann::json::object();
    for (const auto& [k, v] : term_norms) terms[k] = v;
    return {{"residual", residual}, {"principal_norm", principal_norm}, {"relative", relative}, {"pass", pass}, {"terms", terms}};
}

StepReport verify_step_identity(const StepResult& r, double tol) {
    StepReport rep;
    Field res = r.pullback_diff - r.principal;
    for (const auto& [label, f] : r.errors) {
        res -= f;
        rep.term_norms.emplace_back(label, max_abs(f));
    }
    rep.residual = max_abs(res);
    rep.principal_norm = max_abs(r.principal);
    rep.relative = rep.principal_norm > 0.0 ? rep.residual / rep.principal_norm : rep.residual;
    rep.pass = rep.relative <= tol;
    return rep;
}

}  // namespace nkiso
