#include "nkiso/ibp.hpp"

#include <algorithm>

#include "nkiso/corrugation.hpp"

namespace nkiso {

const char* direction_name(Direction d) {
    switch (d) {
        case Direction::eta1: return "eta1";
        case Direction::eta2: return "eta2";
        case Direction::eta3: return "eta3";
    }
    return "?";
}

Vec2 direction_vector(Direction d) {
    switch (d) {
        case Direction::eta1: return eta(1);
        case Direction::eta2: return eta(2);
        case Direction::eta3: return eta(3);
    }
    return {};
}

Vec2 residual_direction(Direction d) { return d == Direction::eta3 ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0}; }

namespace {

void check_depth(int k) {
    if (k < 0) throw Error("invalid-depth", "negative IBP depth");
    if (k > max_deriv() - 1)
        throw Error("derivative-depth-exceeded",
                    "IBP depth " + std::to_string(k) + " > max_deriv - 1 = " + std::to_string(max_deriv() - 1));
}

Field vec2_of(const Field& a, const Field& b) {
    Field r(a.spec(), Arity::vec2);
    r.set_component(0, a);
    r.set_component(1, b);
    return r;
}

// ∂1^a ∂2^b by repeated first-order application.
Field dpow(const Field& f, int a, int b) {
    Field r = f;
    for (int i = 0; i < a; ++i) r = derivative(r, 1, 1);
    for (int i = 0; i < b; ++i) r = derivative(r, 2, 1);
    return r;
}

}  // namespace

IbpCoefficients ibp_coefficients(const Field& H, Direction dir, int k) {
    if (H.arity() != Arity::sym2) throw Error("arity-mismatch", "IBP expects sym2 H");
    check_depth(k);
    auto d = [](const Field& f, int axis) { return derivative(f, axis, 1); };
    const auto s = ibp_series(H.component(0), H.component(1), H.component(2), dir, k, d);
    IbpCoefficients c;
    c.direction = dir;
    c.k = k;
    for (int i = 0; i <= k; ++i) {
        const auto& L = s.L[static_cast<std::size_t>(i)];
        const auto& g = s.dL[static_cast<std::size_t>(i)];
        c.L.push_back(vec2_of(L[0], L[1]));
        c.P.push_back(s.P[static_cast<std::size_t>(i)]);
        c.dL.push_back({vec2_of(g[0][0], g[0][1]), vec2_of(g[1][0], g[1][1])});
    }
    return c;
}

IbpCoefficients ibp_coefficients_closed_form(const Field& H, Direction dir, int k) {
    if (H.arity() != Arity::sym2) throw Error("arity-mismatch", "IBP expects sym2 H");
    check_depth(k);
    const Field h11 = H.component(0), h12 = H.component(1), h22 = H.component(2);
    const GridSpec& g = H.spec();
    const Field zero(g, Arity::scalar);
    IbpCoefficients c;
    c.direction = dir;
    c.k = k;
    for (int i = 0; i <= k; ++i) {
        Field l1 = zero, l2 = zero, p = zero;
        switch (dir) {
            case Direction::eta1:
                if (i == 0) {
                    l1 = h11;
                    l2 = 2.0 * h12;
                    p = h22;
                } else {
                    l1 = dpow(h11, i, 0);
                    l2 = 2.0 * dpow(h12, i, 0) + double(i) * dpow(h11, i - 1, 1);
                    p = 2.0 * dpow(h12, i - 1, 1);
                    if (i >= 2) p += double(i - 1) * dpow(h11, i - 2, 2);
                }
                break;
            case Direction::eta3:
                if (i == 0) {
                    l1 = 2.0 * h12;
                    l2 = h22;
                    p = h11;
                } else {
                    l1 = 2.0 * dpow(h12, 0, i) + double(i) * dpow(h22, 1, i - 1);
                    l2 = dpow(h22, 0, i);
                    p = 2.0 * dpow(h12, 1, i - 1);
                    if (i >= 2) p += double(i - 1) * dpow(h22, 2, i - 2);
                }
                break;
            case Direction::eta2: {
                const double sl = std::pow(2.0, (i + 1) / 2.0);
                const Field d11 = dpow(h11, i, 0);
                l1 = sl * d11;
                l2 = 2.0 * dpow(h12, i, 0) - double(i + 1) * d11;
                if (i >= 1) l2 += double(i) * dpow(h11, i - 1, 1);
                l2 *= sl;
                if (i == 0) {
                    p = h22 - 2.0 * h12 + h11;
                } else {
                    p = 2.0 * dpow(h12, i - 1, 1) - 2.0 * dpow(h12, i, 0) - double(2 * i) * dpow(h11, i - 1, 1) +
                        double(i + 1) * d11;
                    if (i >= 2) p += double(i - 1) * dpow(h11, i - 2, 2);
                    p *= std::pow(2.0, i / 2.0);
                }
                break;
            }
        }
        c.L.push_back(vec2_of(l1, l2));
        c.P.push_back(p);
    }
    return c;
}

nlohmann::json IbpReport::to_json() const {
    return {{"residual", residual},   {"remainder_norm", remainder_norm}, {"gradient_norm", gradient_norm},
            {"p_norm", p_norm},       {"lhs_norm", lhs_norm},             {"off_direction", off_direction}};
}

IbpReport ibp_assemble(const Field& H, const IbpCoefficients& c, const ProfileTower& tower, double lambda) {
    const int k = c.k;
    if (static_cast<int>(c.dL.size()) != k + 1) throw Error("invalid-coefficients", "gradients of L_i required");
    if (tower.depth() < k + 1) throw Error("level-out-of-range", "tower depth below k+1");
    const GridSpec& g = H.spec();
    const Vec2 eta = direction_vector(c.direction);
    const Vec2 d = residual_direction(c.direction);
    const SymMat2 dd = outer(d);
    const Field t = phase_field(g, eta);

    IbpReport rep;
    std::vector<double> gam(static_cast<std::size_t>(k + 2)), pw(static_cast<std::size_t>(k + 3));
    for (int i = 0; i <= k + 2; ++i) pw[static_cast<std::size_t>(i)] = std::pow(lambda, -i);
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        for (int i = 0; i <= k + 1; ++i) gam[static_cast<std::size_t>(i)] = tower.eval(i, lambda * t.comp(0)[n]);
        const SymMat2 h{H.comp(0)[n], H.comp(1)[n], H.comp(2)[n]};
        const SymMat2 lhs = h * (gam[0] * pw[1]);
        auto symgrad = [&](int i) {
            const Grad& dl = c.dL[static_cast<std::size_t>(i)];
            return SymMat2{dl.d1.comp(0)[n], 0.5 * (dl.d2.comp(0)[n] + dl.d1.comp(1)[n]), dl.d2.comp(1)[n]};
        };
        const double sgn_k = (k + 1) % 2 == 0 ? 1.0 : -1.0;
        const SymMat2 rem = symgrad(k) * (sgn_k * gam[static_cast<std::size_t>(k + 1)] * pw[static_cast<std::size_t>(k + 2)]);
        SymMat2 grad;
        double pg = 0.0;
        for (int i = 0; i <= k; ++i) {
            const double sg = i % 2 == 0 ? 1.0 : -1.0;
            const auto ui = static_cast<std::size_t>(i);
            const Field& L = c.L[ui];
            const Vec2 l{L.comp(0)[n], L.comp(1)[n]};
            grad = grad + sym_outer(l, eta) * (sg * gam[ui] * pw[ui + 1]) + symgrad(i) * (sg * gam[ui + 1] * pw[ui + 2]);
            pg += sg * gam[ui] * pw[ui + 1] * c.P[ui].comp(0)[n];
        }
        const SymMat2 rest = lhs - rem - grad;
        const SymMat2 res = rest - dd * pg;
        rep.residual = std::max(rep.residual, res.max_entry());
        rep.remainder_norm = std::max(rep.remainder_norm, rem.max_entry());
        rep.gradient_norm = std::max(rep.gradient_norm, grad.max_entry());
        rep.p_norm = std::max(rep.p_norm, std::abs(pg));
        rep.lhs_norm = std::max(rep.lhs_norm, lhs.max_entry());
        const double off = c.direction == Direction::eta3 ? std::max(std::abs(rest.a12), std::abs(rest.a22))
                                                          : std::max(std::abs(rest.a11), std::abs(rest.a12));
        rep.off_direction = std::max(rep.off_direction, off);
    }
    return rep;
}

IbpReport ibp_reconstruct(const Field& H, Direction dir, int k, const ProfileTower& tower, double lambda) {
    return ibp_assemble(H, ibp_coefficients(H, dir, k), tower, lambda);
}

WField build_w_field(const std::vector<STerm>& terms, double lambda, int k, Direction dir) {
    if (terms.empty()) throw Error("invalid-input", "no S terms");
    const GridSpec& g = terms.front().S.spec();
    const Vec2 eta = direction_vector(dir);
    const Field t = phase_field(g, eta);

    WField out{Field(g, Arity::vec2), {Field(g, Arity::vec2), Field(g, Arity::vec2)}, Field(g, Arity::scalar),
               Field(g, Arity::sym2)};
    std::vector<double> pw(static_cast<std::size_t>(k + 3));
    for (int i = 0; i <= k + 2; ++i) pw[static_cast<std::size_t>(i)] = std::pow(lambda, -i);
    std::vector<double> gam(static_cast<std::size_t>(k + 2));

    for (const auto& term : terms) {
        if (!term.tower) throw Error("invalid-input", "S term " + term.label + " has no profile");
        if (term.tower->depth() < k + 1) throw Error("level-out-of-range", term.label + ": tower depth below k+1");
        require_same_grid(term.S, t, "build_w_field");
        const Field Heff = std::pow(lambda, 1 - term.power) * term.S;
        const IbpCoefficients c = ibp_coefficients(Heff, dir, k);
        const double sgn_k = (k + 1) % 2 == 0 ? 1.0 : -1.0;
        for (std::size_t n = 0; n < g.nodes(); ++n) {
            for (int i = 0; i <= k + 1; ++i) gam[static_cast<std::size_t>(i)] = term.tower->eval(i, lambda * t.comp(0)[n]);
            double w[2] = {0, 0}, dw1[2] = {0, 0}, dw2[2] = {0, 0}, G = 0.0;
            for (int i = 0; i <= k; ++i) {
                const auto ui = static_cast<std::size_t>(i);
                const double sg = i % 2 == 0 ? 1.0 : -1.0;
                const double a = sg * gam[ui + 1] * pw[ui + 2];  // coefficient of L_i in Σ
                const double b = sg * gam[ui] * pw[ui + 1];      // its phase derivative / λ
                for (int m = 0; m < 2; ++m) {
                    const double l = c.L[ui].comp(m)[n];
                    w[m] += a * l;
                    dw1[m] += b * eta.v1 * l + a * c.dL[ui].d1.comp(m)[n];
                    dw2[m] += b * eta.v2 * l + a * c.dL[ui].d2.comp(m)[n];
                }
                G += b * c.P[ui].comp(0)[n];
            }
            for (int m = 0; m < 2; ++m) {
                out.W.comp(m)[n] += -0.5 * w[m];
                out.dW.d1.comp(m)[n] += -0.5 * dw1[m];
                out.dW.d2.comp(m)[n] += -0.5 * dw2[m];
            }
            out.G.comp(0)[n] += G;
            const Grad& dl = c.dL[static_cast<std::size_t>(k)];
            const double r = sgn_k * gam[static_cast<std::size_t>(k + 1)] * pw[static_cast<std::size_t>(k + 2)];
            out.Gcal.comp(0)[n] += r * dl.d1.comp(0)[n];
            out.Gcal.comp(1)[n] += r * 0.5 * (dl.d2.comp(0)[n] + dl.d1.comp(1)[n]);
            out.Gcal.comp(2)[n] += r * dl.d2.comp(1)[n];
        }
    }
    return out;
}

}  // namespace nkiso
