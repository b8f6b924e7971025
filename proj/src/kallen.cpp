#include "nkiso/kallen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "nkiso/error.hpp"
#include "nkiso/metric.hpp"

namespace nkiso {

namespace {

Field grad_outer(const Field& a, double scale) {
    const Grad d = gradient(a);
    Field r(a.spec(), Arity::sym2);
    for (std::size_t n = 0; n < a.nodes(); ++n) {
        const double x = d.d1.comp(0)[n], y = d.d2.comp(0)[n];
        r.comp(0)[n] = scale * x * x;
        r.comp(1)[n] = scale * x * y;
        r.comp(2)[n] = scale * y * y;
    }
    return r;
}

}  // namespace

nlohmann::json KallenResult::to_json() const {
    return {{"iterations", iterations}, {"residual_history", residual_history}, {"min_a2", min_a2}, {"max_a2", max_a2},
            {"F_norm", F.empty() ? 0.0 : max_abs(F)}};
}

void KallenResult::write_history_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw Error("io-error", "cannot open " + path.string());
    os.precision(17);
    os << "j,F_norm\n";
    for (std::size_t j = 0; j < residual_history.size(); ++j) os << j + 1 << ',' << residual_history[j] << '\n';
}

KallenResult kallen_decompose(const Field& H, double lambda, double kappa, int N, const KallenOptions& opts) {
    if (H.arity() != Arity::sym2) throw Error("arity-mismatch", "kallen expects sym2");
    if (N < 1) throw Error("invalid-depth", "N must be >= 1");
    if (!(kappa > lambda && lambda > 1.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "κ > λ > 1 violated: λ=" << lambda << ", κ=" << kappa;
        throw GateError("kallen-precondition", os.str());
    }
    const double dist = max_abs(H - constant_sym(H.spec(), H0()));
    if (dist > r0_constant() / 2) {
        std::ostringstream os;
        os.precision(17);
        os << "(ass_H0): ‖H−H₀‖₀ ≤ r₀/2 violated: lhs=" << dist << ", rhs=" << r0_constant() / 2;
        throw Error("decomposition-left-ball", os.str());
    }
    if (opts.sigma_floor > 0.0 && opts.mu > 0.0 && lambda / opts.mu < opts.sigma_floor)
        std::cerr << "warning: kallen λ/μ = " << lambda / opts.mu << " below floor " << opts.sigma_floor << '\n';

    KallenResult res;
    res.min_a2 = std::numeric_limits<double>::infinity();
    res.max_a2 = -res.min_a2;
    Field E_prev(H.spec(), Arity::sym2);  // 𝓔_{j-1}
    Field E_cur;
    for (int j = 1; j <= N; ++j) {
        const Field target = H - E_prev;
        Field a[3];
        for (int i = 1; i <= 3; ++i) {
            Field sq = abar_field(target, i);
            for (std::size_t n = 0; n < sq.nodes(); ++n) {
                const double v = sq.comp(0)[n];
                if (v < 0.5 || v > 1.5) {
                    std::ostringstream os;
                    os.precision(17);
                    os << "(Ebound12): 1/2 ≤ a_{" << i << "," << j << "}² ≤ 3/2 violated: value=" << v << " at ("
                       << H.spec().x(static_cast<int>(n % H.spec().n)) << ", " << H.spec().x(static_cast<int>(n / H.spec().n)) << ")";
                    throw Error("decomposition-left-ball", os.str());
                }
                res.min_a2 = std::min(res.min_a2, v);
                res.max_a2 = std::max(res.max_a2, v);
                sq.comp(0)[n] = std::sqrt(v);
            }
            a[i - 1] = std::move(sq);
        }
        E_cur = grad_outer(a[0], 1.0 / (lambda * lambda)) + grad_outer(a[1], 1.0 / (kappa * kappa));
        res.residual_history.push_back(max_abs(E_prev - E_cur));
        const auto& h = res.residual_history;
        if (h.size() >= 3 && h[h.size() - 1] > h[h.size() - 2] && h[h.size() - 2] > h[h.size() - 3]) {
            std::ostringstream os;
            os.precision(17);
            os << "residual grew twice in a row at j=" << j << ": " << h[h.size() - 3] << " -> " << h[h.size() - 2] << " -> "
               << h.back();
            throw Error("kallen-diverging", os.str());
        }
        res.a1 = std::move(a[0]);
        res.a2 = std::move(a[1]);
        res.a3 = std::move(a[2]);
        res.F = E_prev - E_cur;
        res.iterations = j;
        E_prev = std::move(E_cur);
    }
    return res;
}

Field kallen_residual(const Field& H, const KallenResult& r, double lambda, double kappa) {
    Field s = H - r.F - grad_outer(r.a1, 1.0 / (lambda * lambda)) - grad_outer(r.a2, 1.0 / (kappa * kappa));
    s -= scaled_sym(mul(r.a1, r.a1), outer(eta(1)));
    s -= scaled_sym(mul(r.a2, r.a2), outer(eta(2)));
    s -= scaled_sym(mul(r.a3, r.a3), outer(eta(3)));
    return s;
}

}  // namespace nkiso
