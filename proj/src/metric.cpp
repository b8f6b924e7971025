#include "nkiso/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <tuple>

#include "nkiso/error.hpp"

namespace nkiso {

std::array<double, 2> SymMat2::eigenvalues() const {
    const double m = 0.5 * (a11 + a22);
    const double d = 0.5 * (a11 - a22);
    const double r = std::hypot(d, a12);
    return {m - r, m + r};
}

double SymMat2::max_entry() const { return std::max({std::abs(a11), std::abs(a12), std::abs(a22)}); }

SymMat2 outer(Vec2 e) { return {e.v1 * e.v1, e.v1 * e.v2, e.v2 * e.v2}; }

SymMat2 sym_outer(Vec2 a, Vec2 b) { return {a.v1 * b.v1, 0.5 * (a.v1 * b.v2 + a.v2 * b.v1), a.v2 * b.v2}; }

SymMat2 node_value(const Field& s, int i, int j) { return {s(0, i, j), s(1, i, j), s(2, i, j)}; }

Field constant_sym(const GridSpec& spec, const SymMat2& m) {
    Field r(spec, Arity::sym2);
    std::fill(r.comp(0), r.comp(0) + r.nodes(), m.a11);
    std::fill(r.comp(1), r.comp(1) + r.nodes(), m.a12);
    std::fill(r.comp(2), r.comp(2) + r.nodes(), m.a22);
    return r;
}

Field scaled_sym(const Field& c, const SymMat2& m) {
    Field r(c.spec(), Arity::sym2);
    const double* cv = c.comp(0);
    const double e[3] = {m.a11, m.a12, m.a22};
    for (int k = 0; k < 3; ++k) {
        double* p = r.comp(k);
        for (std::size_t n = 0; n < c.nodes(); ++n) p[n] = cv[n] * e[k];
    }
    return r;
}

Vec2 eta(int i) {
    switch (i) {
        case 1: return {1.0, 0.0};
        case 2: return {std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2};
        case 3: return {0.0, 1.0};
    }
    throw Error("invalid-direction", std::to_string(i));
}

SymMat2 H0() { return {1.5, 0.5, 1.5}; }

// Each ā_i has coefficients in {-1, 1, 2} on (H11, H12, H22), so its
// max-entry operator norm is 2 and 1/2 slack allows radius 1/4.
double r0_constant() { return 0.25; }

std::array<double, 3> abar_decompose(const SymMat2& h) { return {h.a11 - h.a12, 2.0 * h.a12, h.a22 - h.a12}; }

SymMat2 abar_reconstruct(const std::array<double, 3>& a) {
    // η2⊗η2 = [[1/2, 1/2], [1/2, 1/2]]
    return {a[0] + 0.5 * a[1], 0.5 * a[1], a[2] + 0.5 * a[1]};
}

Field abar_field(const Field& h, int i) {
    Field r(h.spec(), Arity::scalar);
    const double *h11 = h.comp(0), *h12 = h.comp(1), *h22 = h.comp(2);
    double* p = r.comp(0);
    for (std::size_t n = 0; n < h.nodes(); ++n) {
        switch (i) {
            case 1: p[n] = h11[n] - h12[n]; break;
            case 2: p[n] = 2.0 * h12[n]; break;
            case 3: p[n] = h22[n] - h12[n]; break;
            default: throw Error("invalid-direction", std::to_string(i));
        }
    }
    return r;
}

Field pullback(const Grad& du) {
    const Field& a = du.d1;
    const Field& b = du.d2;
    Field r(a.spec(), Arity::sym2);
    double *p11 = r.comp(0), *p12 = r.comp(1), *p22 = r.comp(2);
    for (int c = 0; c < a.ncomp(); ++c) {
        const double *x = a.comp(c), *y = b.comp(c);
        for (std::size_t n = 0; n < a.nodes(); ++n) {
            p11[n] += x[n] * x[n];
            p12[n] += x[n] * y[n];
            p22[n] += y[n] * y[n];
        }
    }
    return r;
}

Field defect(const Field& g, const Grad& du) {
    require_same_grid(g, du.d1, "defect");
    return g - pullback(du);
}

Field defect(const Field& g, const Field& u) {
    require_same_grid(g, u, "defect");
    return defect(g, gradient(u));
}

namespace {

constexpr int kFan = 8;

Vec2 fan_direction(int k) { return {std::cos(k * std::numbers::pi / kFan), std::sin(k * std::numbers::pi / kFan)}; }

// Inverse of the 3x3 map c -> Σ c_i η_i⊗η_i in (11, 12, 22) coordinates.
struct Triple {
    std::array<int, 3> dir;
    std::array<std::array<double, 3>, 3> inv;

    std::array<double, 3> coeffs(double h11, double h12, double h22) const {
        std::array<double, 3> c{};
        for (int r = 0; r < 3; ++r) c[r] = inv[r][0] * h11 + inv[r][1] * h12 + inv[r][2] * h22;
        return c;
    }
};

std::vector<Triple> all_triples() {
    std::vector<Triple> out;
    for (int a = 0; a < kFan; ++a)
        for (int b = a + 1; b < kFan; ++b)
            for (int c = b + 1; c < kFan; ++c) {
                double m[3][3];
                const int d[3] = {a, b, c};
                for (int col = 0; col < 3; ++col) {
                    const SymMat2 e = outer(fan_direction(d[col]));
                    m[0][col] = e.a11;
                    m[1][col] = e.a12;
                    m[2][col] = e.a22;
                }
                const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                                   m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
                Triple t{{a, b, c}, {}};
                for (int r = 0; r < 3; ++r)
                    for (int s = 0; s < 3; ++s) {
                        // cofactor transpose
                        const int r1 = (s + 1) % 3, r2 = (s + 2) % 3;
                        const int c1 = (r + 1) % 3, c2 = (r + 2) % 3;
                        t.inv[r][s] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
                    }
                out.push_back(t);
            }
    return out;
}

double bump(double t) { return std::abs(t) < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0; }

}  // namespace

PouResult pou_decompose(const Field& h, double lambda_min, double lambda_max) {
    if (h.arity() != Arity::sym2) throw Error("arity-mismatch", "pou_decompose expects sym2");
    if (!(lambda_min > 0.0) || lambda_max < lambda_min)
        throw Error("invalid-bounds", "eigenvalue range must satisfy 0 < min <= max");

    const double s = 0.1 * lambda_min;  // lattice spacing
    const double rho = 0.75 * s;        // bump half-width per coordinate
    static const std::vector<Triple> triples = all_triples();

    // Triple with the largest worst-case coefficient over the bump cube.
    std::map<std::tuple<long, long, long>, int> chosen;
    auto pick = [&](long p, long q, long r) -> int {
        auto key = std::make_tuple(p, q, r);
        if (auto it = chosen.find(key); it != chosen.end()) return it->second;
        int best = -1;
        double best_min = 0.0;
        for (std::size_t t = 0; t < triples.size(); ++t) {
            double worst = std::numeric_limits<double>::infinity();
            for (int corner = 0; corner < 8; ++corner) {
                const double h11 = p * s + ((corner & 1) ? rho : -rho);
                const double h12 = q * s + ((corner & 2) ? rho : -rho);
                const double h22 = r * s + ((corner & 4) ? rho : -rho);
                for (double c : triples[t].coeffs(h11, h12, h22)) worst = std::min(worst, c);
            }
            if (worst > best_min) {
                best_min = worst;
                best = static_cast<int>(t);
            }
        }
        chosen.emplace(key, best);
        return best;
    };

    const GridSpec& g = h.spec();
    const std::size_t N = h.nodes();
    std::vector<std::vector<double>> acc(kFan, std::vector<double>(N, 0.0));
    std::vector<int> active_count(N, 0);
    const double tol = 1e-12 * lambda_max;

    for (std::size_t n = 0; n < N; ++n) {
        const double h11 = h.comp(0)[n], h12 = h.comp(1)[n], h22 = h.comp(2)[n];
        const auto ev = SymMat2{h11, h12, h22}.eigenvalues();
        if (ev[0] < lambda_min - tol || ev[1] > lambda_max + tol) {
            std::ostringstream os;
            os.precision(17);
            os << "node (" << g.x(static_cast<int>(n % g.n)) << ", " << g.x(static_cast<int>(n / g.n))
               << ") eigenvalues " << ev[0] << ", " << ev[1] << " outside [" << lambda_min << ", " << lambda_max << "]";
            throw Error("outside-compact-cone", os.str());
        }
        auto range = [&](double v) { return std::make_pair(static_cast<long>(std::ceil((v - rho) / s)), static_cast<long>(std::floor((v + rho) / s))); };
        const auto [p0, p1] = range(h11);
        const auto [q0, q1] = range(h12);
        const auto [r0, r1] = range(h22);
        double den = 0.0;
        double num[kFan] = {};
        for (long p = p0; p <= p1; ++p)
            for (long q = q0; q <= q1; ++q)
                for (long r = r0; r <= r1; ++r) {
                    const double b = bump((h11 - p * s) / rho) * bump((h12 - q * s) / rho) * bump((h22 - r * s) / rho);
                    if (b == 0.0) continue;
                    const int t = pick(p, q, r);
                    if (t < 0) {
                        std::ostringstream os;
                        os << "no positive fan triple near node " << n << " (lattice " << p << "," << q << "," << r << ")";
                        throw Error("outside-compact-cone", os.str());
                    }
                    const double w = b * b;
                    den += w;
                    const auto c = triples[static_cast<std::size_t>(t)].coeffs(h11, h12, h22);
                    for (int k = 0; k < 3; ++k) num[triples[static_cast<std::size_t>(t)].dir[static_cast<std::size_t>(k)]] += w * c[static_cast<std::size_t>(k)];
                }
        if (!(den > 0.0)) throw Error("outside-compact-cone", "bump cover has a gap at node " + std::to_string(n));
        for (int k = 0; k < kFan; ++k) {
            acc[static_cast<std::size_t>(k)][n] = num[k] / den;
            if (num[k] > 0.0) ++active_count[n];
        }
    }

    PouResult res;
    res.lattice_points = static_cast<int>(chosen.size());
    res.max_active = *std::max_element(active_count.begin(), active_count.end());
    Field recon(g, Arity::sym2);
    for (int k = 0; k < kFan; ++k) {
        const auto& a = acc[static_cast<std::size_t>(k)];
        if (std::all_of(a.begin(), a.end(), [](double v) { return v <= 0.0; })) continue;
        PouTerm term{Field(g, Arity::scalar), fan_direction(k), k};
        for (std::size_t n = 0; n < N; ++n) term.phi.comp(0)[n] = std::sqrt(std::max(0.0, a[n]));
        recon += scaled_sym(mul(term.phi, term.phi), outer(term.eta));
        res.terms.push_back(std::move(term));
    }
    res.residual = max_abs(recon - h);
    return res;
}

Field gauss_curvature(const Field& g) {
    if (g.arity() != Arity::sym2) throw Error("arity-mismatch", "gauss_curvature expects sym2");
    const GridSpec& sp = g.spec();
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        if (!SymMat2{g.comp(0)[n], g.comp(1)[n], g.comp(2)[n]}.positive_definite())
            throw Error("degenerate-metric", "node " + std::to_string(n) + " not positive definite");
    }
    const Field E = g.component(0), F = g.component(1), G = g.component(2);
    const Field Eu = derivative(E, 1), Ev = derivative(E, 2);
    const Field Fu = derivative(F, 1), Fv = derivative(F, 2);
    const Field Gu = derivative(G, 1), Gv = derivative(G, 2);
    const Field Evv = derivative(E, 2, 2), Guu = derivative(G, 1, 2);
    const Field Fuv = derivative(Fu, 2);

    auto det3 = [](const double m[3][3]) {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };

    // Brioschi formula.
    Field K(sp, Arity::scalar);
    for (std::size_t n = 0; n < g.nodes(); ++n) {
        const double e = E.comp(0)[n], f = F.comp(0)[n], gg = G.comp(0)[n];
        const double eu = Eu.comp(0)[n], ev = Ev.comp(0)[n], fu = Fu.comp(0)[n], fv = Fv.comp(0)[n];
        const double gu = Gu.comp(0)[n], gv = Gv.comp(0)[n];
        const double a[3][3] = {{-0.5 * Evv.comp(0)[n] + Fuv.comp(0)[n] - 0.5 * Guu.comp(0)[n], 0.5 * eu, fu - 0.5 * ev},
                                {fv - 0.5 * gu, e, f},
                                {0.5 * gv, f, gg}};
        const double b[3][3] = {{0.0, 0.5 * ev, 0.5 * gu}, {0.5 * ev, e, f}, {0.5 * gu, f, gg}};
        const double w = e * gg - f * f;
        K.comp(0)[n] = (det3(a) - det3(b)) / (w * w);
    }
    return K;
}

nlohmann::json ImmersionBounds::to_json() const {
    return {{"min_eig", min_eig}, {"max_eig", max_eig}, {"grad_sup", grad_sup}, {"min_det", min_det},
            {"max_det", max_det}, {"gamma", gamma},     {"pass", pass},         {"worst_node", {worst_i, worst_j}}};
}

ImmersionBounds immersion_bounds_check(const Grad& du, double gamma, bool report_only) {
    if (!(gamma > 1.0)) throw Error("invalid-gamma", "gamma must exceed 1");
    const Field P = pullback(du);
    const GridSpec& sp = P.spec();
    ImmersionBounds r;
    r.gamma = gamma;
    r.min_eig = std::numeric_limits<double>::infinity();
    r.max_eig = -r.min_eig;
    r.min_det = r.min_eig;
    r.max_det = r.max_eig;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < P.nodes(); ++n) {
        const SymMat2 m{P.comp(0)[n], P.comp(1)[n], P.comp(2)[n]};
        const auto ev = m.eigenvalues();
        r.min_eig = std::min(r.min_eig, ev[0]);
        r.max_eig = std::max(r.max_eig, ev[1]);
        r.min_det = std::min(r.min_det, m.det());
        r.max_det = std::max(r.max_det, m.det());
        // violation measure: how far outside [1/γ, γ]
        const double v = std::max(1.0 / gamma - ev[0], ev[1] - gamma);
        if (v > worst) {
            worst = v;
            r.worst_i = static_cast<int>(n % sp.n);
            r.worst_j = static_cast<int>(n / sp.n);
        }
    }
    r.grad_sup = std::max(max_abs(du.d1), max_abs(du.d2));
    r.pass = worst <= 0.0;
    if (!r.pass && !report_only) {
        std::ostringstream os;
        os.precision(17);
        os << "(1/γ)Id <= (∇u)ᵀ∇u <= γ Id violated with γ=" << gamma << ": eigenvalues in [" << r.min_eig << ", "
           << r.max_eig << "], worst node (" << sp.x(r.worst_i) << ", " << sp.x(r.worst_j) << ")";
        throw Error("immersion-bounds-violated", os.str());
    }
    return r;
}

ImmersionBounds immersion_bounds_check(const Field& u, double gamma, bool report_only) {
    return immersion_bounds_check(gradient(u), gamma, report_only);
}

}  // namespace nkiso
