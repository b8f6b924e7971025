#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "nkiso/error.hpp"
#include "nkiso/grid.hpp"
#include "nkiso/metric.hpp"
#include "nkiso/profiles.hpp"

namespace nkiso {

enum class Direction { eta1, eta2, eta3 };

const char* direction_name(Direction d);
Vec2 direction_vector(Direction d);
// e2 for eta1/eta2, e1 for eta3.
Vec2 residual_direction(Direction d);

// L_i, P_i and the partials of every L_i, over any scalar type S that
// supports S+S, S-S and double*S; `d(s, axis)` differentiates once.
template <class S>
struct IbpSeries {
    std::vector<std::array<S, 2>> L;
    std::vector<S> P;
    std::vector<std::array<std::array<S, 2>, 2>> dL;  // dL[i][axis-1][component]
};

// Splits M = sym(v⊗η) + p·d⊗d for the direction's (η, d) pair.
template <class S>
void ibp_split(Direction dir, const S& m11, const S& m12, const S& m22, std::array<S, 2>& v, S& p) {
    constexpr double r2 = std::numbers::sqrt2;
    switch (dir) {
        case Direction::eta1:
            v = {m11, 2.0 * m12};
            p = m22;
            return;
        case Direction::eta2:
            v = {r2 * m11, 2.0 * r2 * m12 - r2 * m11};
            p = m22 - 2.0 * m12 + m11;
            return;
        case Direction::eta3:
            v = {2.0 * m12, m22};
            p = m11;
            return;
    }
}

template <class S, class D>
IbpSeries<S> ibp_series(const S& h11, const S& h12, const S& h22, Direction dir, int k, D&& d) {
    if (k < 0) throw Error("invalid-depth", "negative IBP depth");
    IbpSeries<S> out;
    std::array<S, 2> v{h11, h11};
    S p = h11;
    ibp_split(dir, h11, h12, h22, v, p);
    out.L.push_back(v);
    out.P.push_back(p);
    for (int i = 0; i <= k; ++i) {
        const auto& L = out.L.back();
        std::array<std::array<S, 2>, 2> g{{{d(L[0], 1), d(L[1], 1)}, {d(L[0], 2), d(L[1], 2)}}};
        out.dL.push_back(g);
        if (i == k) break;
        // sym∇L = (∂1L1, (∂2L1 + ∂1L2)/2, ∂2L2)
        const S m12 = 0.5 * (g[1][0] + g[0][1]);
        ibp_split(dir, g[0][0], m12, g[1][1], v, p);
        out.L.push_back(v);
        out.P.push_back(p);
    }
    return out;
}

struct IbpCoefficients {
    Direction direction = Direction::eta1;
    int k = 0;
    std::vector<Field> L;  // vec2
    std::vector<Field> P;  // scalar
    std::vector<Grad> dL;  // gradient of each L_i (vec2 columns); empty for closed forms
};

// Recursive construction with grid derivatives; depth k needs k+1 derivatives.
IbpCoefficients ibp_coefficients(const Field& H, Direction dir, int k);
// The explicit per-direction formulas in terms of iterated partials of H.
IbpCoefficients ibp_coefficients_closed_form(const Field& H, Direction dir, int k);

struct IbpReport {
    double residual = 0.0;        // max-entry of the identity
    double remainder_norm = 0.0;  // |(−1)^{k+1} Γ_{k+1}/λ^{k+2} sym∇L_k|
    double gradient_norm = 0.0;
    double p_norm = 0.0;
    double lhs_norm = 0.0;
    // the P group's share outside the residual direction (structurally 0)
    double off_direction = 0.0;

    nlohmann::json to_json() const;
};

// Assembles the three right-hand groups from given coefficients (dL required)
// and compares with (Γ0(λt)/λ)H.
IbpReport ibp_assemble(const Field& H, const IbpCoefficients& c, const ProfileTower& tower, double lambda);
IbpReport ibp_reconstruct(const Field& H, Direction dir, int k, const ProfileTower& tower, double lambda);

// One oscillatory source term (Γ0(λt)/λ^power)·S entering the W synthesis.
struct STerm {
    std::string label;
    Field S;
    const ProfileTower* tower = nullptr;
    int power = 1;
};

// Returned W solves −2 sym∇W = Σ (Γ0/λ^power) S − Gcal − G d⊗d.
struct WField {
    Field W;    // vec2
    Grad dW;    // assembled analytically
    Field G;    // scalar, multiplies d⊗d
    Field Gcal; // sym2 remainder
};

// Sums run over i = 0..k.
WField build_w_field(const std::vector<STerm>& terms, double lambda, int k, Direction dir);

}  // namespace nkiso
