#include "nkiso/frames.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "nkiso/error.hpp"

namespace nkiso {

namespace {

using V4 = std::array<double, 4>;

V4 load(const Field& f, std::size_t n) { return {f.comp(0)[n], f.comp(1)[n], f.comp(2)[n], f.comp(3)[n]}; }
void store(Field& f, std::size_t n, const V4& v) {
    for (int c = 0; c < 4; ++c) f.comp(c)[n] = v[static_cast<std::size_t>(c)];
}
double dot(const V4& a, const V4& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]; }

void require_vec4(const Field& f, const char* where) {
    if (f.arity() != Arity::vec4) throw Error("arity-mismatch", std::string(where) + " expects vec4");
}

std::string node_text(const GridSpec& g, std::size_t n) {
    std::ostringstream os;
    os << "(" << g.x(static_cast<int>(n % g.n)) << ", " << g.x(static_cast<int>(n / g.n)) << ")";
    return os.str();
}

// Per-node T = A (AᵀA)^{-1} for A = [a1 a2].
bool tangent_at(const V4& a1, const V4& a2, V4& t1, V4& t2) {
    const double g11 = dot(a1, a1), g12 = dot(a1, a2), g22 = dot(a2, a2);
    const double det = g11 * g22 - g12 * g12;
    if (!(det > 1e-14 * std::max(1.0, g11 * g22))) return false;
    const double i11 = g22 / det, i12 = -g12 / det, i22 = g11 / det;
    for (std::size_t c = 0; c < 4; ++c) {
        t1[c] = a1[c] * i11 + a2[c] * i12;
        t2[c] = a1[c] * i12 + a2[c] * i22;
    }
    return true;
}

}  // namespace

Grad tangent_frame(const Grad& du) {
    require_vec4(du.d1, "tangent_frame");
    const GridSpec& g = du.d1.spec();
    Grad t{Field(g, Arity::vec4), Field(g, Arity::vec4)};
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        V4 t1, t2;
        if (!tangent_at(load(du.d1, n), load(du.d2, n), t1, t2))
            throw Error("degenerate-immersion", "singular (∇u)ᵀ∇u at node " + node_text(g, n));
        store(t.d1, n, t1);
        store(t.d2, n, t2);
    }
    return t;
}

Grad tangent_frame(const Field& u) { return tangent_frame(gradient(u)); }

NormalFrame initial_normal_frame(const Grad& du) {
    require_vec4(du.d1, "initial_normal_frame");
    const GridSpec& g = du.d1.spec();
    NormalFrame E{Field(g, Arity::vec4), Field(g, Arity::vec4)};
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        const V4 a1 = load(du.d1, n), a2 = load(du.d2, n);
        V4 t1, t2;
        if (!tangent_at(a1, a2, t1, t2)) throw Error("degenerate-immersion", "node " + node_text(g, n));
        // ν = ξ − T (Aᵀ ξ) with ξ^1 = e3, ξ^2 = e4
        auto project = [&](std::size_t k) {
            V4 v{0, 0, 0, 0};
            v[k] = 1.0;
            const double p1 = a1[k], p2 = a2[k];
            for (std::size_t c = 0; c < 4; ++c) v[c] -= t1[c] * p1 + t2[c] * p2;
            return v;
        };
        V4 nu1 = project(2), nu2 = project(3);
        const double n1 = std::sqrt(dot(nu1, nu1));
        if (n1 < 0.1) throw Error("frame-degenerate", "|ν¹| = " + std::to_string(n1) + " < 0.1 at " + node_text(g, n));
        for (double& v : nu1) v /= n1;
        const double p = dot(nu2, nu1);
        for (std::size_t c = 0; c < 4; ++c) nu2[c] -= p * nu1[c];
        const double n2 = std::sqrt(dot(nu2, nu2));
        if (n2 < 0.1)
            throw Error("frame-degenerate", "Gram-Schmidt denominator " + std::to_string(n2) + " < 0.1 at " + node_text(g, n));
        for (double& v : nu2) v /= n2;
        store(E.e1, n, nu1);
        store(E.e2, n, nu2);
    }
    return E;
}

NormalFrame initial_normal_frame(const Field& u) { return initial_normal_frame(gradient(u)); }

NormalFrame propagate_frame(const Grad& du, const Grad& dv, const NormalFrame& Eu, double rho, PropagationReport* report) {
    require_vec4(du.d1, "propagate_frame");
    const double jump = std::max(max_abs(dv.d1 - du.d1), max_abs(dv.d2 - du.d2));
    if (jump > rho) {
        std::ostringstream os;
        os.precision(17);
        os << "‖∇v − ∇u‖₀ = " << jump << " > ρ = " << rho;
        throw Error("frames-too-far", os.str());
    }
    const GridSpec& g = du.d1.spec();
    NormalFrame Ev{Field(g, Arity::vec4), Field(g, Arity::vec4)};
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        const V4 a1 = load(du.d1, n), a2 = load(du.d2, n);
        const V4 b1 = load(dv.d1, n), b2 = load(dv.d2, n);
        V4 t1, t2;
        if (!tangent_at(b1, b2, t1, t2)) throw Error("degenerate-immersion", "node " + node_text(g, n));
        auto nu = [&](const V4& e) {
            // (Id − T_v (∇v − ∇u)ᵀ) e
            const double p1 = dot(b1, e) - dot(a1, e);
            const double p2 = dot(b2, e) - dot(a2, e);
            V4 r = e;
            for (std::size_t c = 0; c < 4; ++c) r[c] -= t1[c] * p1 + t2[c] * p2;
            return r;
        };
        V4 nu1 = nu(load(Eu.e1, n)), nu2 = nu(load(Eu.e2, n));
        const double n1 = std::sqrt(dot(nu1, nu1));
        if (n1 < 0.25) throw Error("propagation-degenerate", "|ν¹| = " + std::to_string(n1) + " < 1/4 at " + node_text(g, n));
        for (double& v : nu1) v /= n1;
        const double p = dot(nu2, nu1);
        for (std::size_t c = 0; c < 4; ++c) nu2[c] -= p * nu1[c];
        const double n2 = std::sqrt(dot(nu2, nu2));
        if (n2 < 0.25)
            throw Error("propagation-degenerate", "Gram-Schmidt denominator " + std::to_string(n2) + " < 1/4 at " + node_text(g, n));
        for (double& v : nu2) v /= n2;
        store(Ev.e1, n, nu1);
        store(Ev.e2, n, nu2);
    }
    if (report) {
        report->grad_jump = jump;
        report->frame_drift = std::max(max_abs(Ev.e1 - Eu.e1), max_abs(Ev.e2 - Eu.e2));
        report->ratio = jump > 0.0 ? report->frame_drift / jump : 0.0;
    }
    return Ev;
}

NormalFrame project_frame(const Grad& dv, const NormalFrame& hint) {
    require_vec4(dv.d1, "project_frame");
    const GridSpec& g = dv.d1.spec();
    NormalFrame Ev{Field(g, Arity::vec4), Field(g, Arity::vec4)};
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        const V4 b1 = load(dv.d1, n), b2 = load(dv.d2, n);
        V4 t1, t2;
        if (!tangent_at(b1, b2, t1, t2)) throw Error("degenerate-immersion", "node " + node_text(g, n));
        auto proj = [&](V4 e) {
            const double p1 = dot(b1, e), p2 = dot(b2, e);
            for (std::size_t c = 0; c < 4; ++c) e[c] -= t1[c] * p1 + t2[c] * p2;
            return e;
        };
        const V4 p1 = proj(load(hint.e1, n)), p2 = proj(load(hint.e2, n));
        // symmetric orthonormalization P (PᵀP)^{-1/2}
        const double m11 = dot(p1, p1), m12 = dot(p1, p2), m22 = dot(p2, p2);
        const double det = m11 * m22 - m12 * m12;
        if (!(det > 1e-8)) throw Error("frame-degenerate", "projected frame Gram determinant " + std::to_string(det) + " at " + node_text(g, n));
        // (M)^{-1/2} for 2x2 SPD: (M + sqrt(det) I)^{-1} · sqrt(... ) via the closed form
        const double s = std::sqrt(det), t = std::sqrt(m11 + m22 + 2 * s);
        // M^{1/2} = (M + s I)/t, so M^{-1/2} = t (M + s I)^{-1}
        const double a = m11 + s, b = m12, d = m22 + s, dd = a * d - b * b;
        const double i11 = t * d / dd, i12 = -t * b / dd, i22 = t * a / dd;
        V4 e1, e2;
        for (std::size_t c = 0; c < 4; ++c) {
            e1[c] = p1[c] * i11 + p2[c] * i12;
            e2[c] = p1[c] * i12 + p2[c] * i22;
        }
        store(Ev.e1, n, e1);
        store(Ev.e2, n, e2);
    }
    return Ev;
}

FrameResiduals frame_residuals(const Grad& du, const NormalFrame& E) {
    FrameResiduals r;
    for (std::size_t n = 0; n < E.e1.nodes(); ++n) {
        const V4 e1 = load(E.e1, n), e2 = load(E.e2, n);
        const V4 a1 = load(du.d1, n), a2 = load(du.d2, n);
        r.orthonormality = std::max({r.orthonormality, std::abs(std::sqrt(dot(e1, e1)) - 1.0),
                                     std::abs(std::sqrt(dot(e2, e2)) - 1.0), std::abs(dot(e1, e2))});
        r.normality = std::max({r.normality, std::abs(dot(a1, e1)), std::abs(dot(a2, e1)), std::abs(dot(a1, e2)),
                                std::abs(dot(a2, e2))});
    }
    return r;
}

Grad unit_field_derivative(const Field& e) {
    require_vec4(e, "unit_field_derivative");
    Grad d = gradient(e);
    for (int axis = 1; axis <= 2; ++axis) {
        Field& de = d[axis];
        for (std::size_t n = 0; n < e.nodes(); ++n) {
            const V4 v = load(e, n);
            V4 w = load(de, n);
            const double s = dot(v, w);
            for (std::size_t c = 0; c < 4; ++c) w[c] -= s * v[c];
            store(de, n, w);
        }
    }
    return d;
}

FrameDerivatives frame_derivatives(const NormalFrame& E) {
    FrameDerivatives d{gradient(E.e1), gradient(E.e2)};
    for (int axis = 1; axis <= 2; ++axis) {
        Field& d1 = d.e1[axis];
        Field& d2 = d.e2[axis];
        for (std::size_t n = 0; n < E.e1.nodes(); ++n) {
            const V4 e1 = load(E.e1, n), e2 = load(E.e2, n);
            V4 w1 = load(d1, n), w2 = load(d2, n);
            // remove the symmetric part of S_ik = ⟨E^i, ∂E^k⟩
            const double s11 = dot(e1, w1), s22 = dot(e2, w2);
            const double s12 = 0.5 * (dot(e1, w2) + dot(e2, w1));
            for (std::size_t c = 0; c < 4; ++c) {
                w1[c] -= s11 * e1[c] + s12 * e2[c];
                w2[c] -= s12 * e1[c] + s22 * e2[c];
            }
            store(d1, n, w1);
            store(d2, n, w2);
        }
    }
    return d;
}

}  // namespace nkiso
