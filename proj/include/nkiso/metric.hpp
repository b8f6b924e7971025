#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "nkiso/grid.hpp"

namespace nkiso {

struct Vec2 {
    double v1 = 0.0, v2 = 0.0;
    double operator[](int i) const { return i == 1 ? v1 : v2; }
};

struct SymMat2 {
    double a11 = 0.0, a12 = 0.0, a22 = 0.0;

    double det() const { return a11 * a22 - a12 * a12; }
    double trace() const { return a11 + a22; }
    std::array<double, 2> eigenvalues() const;  // ascending
    bool positive_definite() const { return a11 > 0.0 && det() > 0.0; }
    double max_entry() const;

    SymMat2 operator+(const SymMat2& o) const { return {a11 + o.a11, a12 + o.a12, a22 + o.a22}; }
    SymMat2 operator-(const SymMat2& o) const { return {a11 - o.a11, a12 - o.a12, a22 - o.a22}; }
    SymMat2 operator*(double s) const { return {a11 * s, a12 * s, a22 * s}; }
};

SymMat2 outer(Vec2 e);  // e ⊗ e
SymMat2 sym_outer(Vec2 a, Vec2 b);  // (a⊗b + b⊗a)/2

SymMat2 node_value(const Field& sym2, int i, int j);
Field constant_sym(const GridSpec& spec, const SymMat2& m);
// Σ_k c_k(x) m_k as a field; handy for a(x)² η⊗η.
Field scaled_sym(const Field& scalar, const SymMat2& m);

// η1 = e1, η2 = (e1+e2)/√2, η3 = e2.
Vec2 eta(int i);
SymMat2 H0();
double r0_constant();

std::array<double, 3> abar_decompose(const SymMat2& h);
SymMat2 abar_reconstruct(const std::array<double, 3>& a);
// ā_i applied node-wise; i in 1..3.
Field abar_field(const Field& h, int i);

// (∇u)ᵀ∇u from gradient columns.
Field pullback(const Grad& du);
Field defect(const Field& g, const Grad& du);
Field defect(const Field& g, const Field& u);

struct PouTerm {
    Field phi;
    Vec2 eta;
    int fan_index = 0;  // direction (cos kπ/8, sin kπ/8)
};

struct PouResult {
    std::vector<PouTerm> terms;
    int max_active = 0;  // N0
    int lattice_points = 0;
    double residual = 0.0;
};

PouResult pou_decompose(const Field& h, double lambda_min, double lambda_max);

Field gauss_curvature(const Field& g);

struct ImmersionBounds {
    double min_eig = 0.0, max_eig = 0.0;
    double grad_sup = 0.0;
    double min_det = 0.0, max_det = 0.0;
    double gamma = 0.0;
    bool pass = false;
    int worst_i = 0, worst_j = 0;

    nlohmann::json to_json() const;
};

// Throws "immersion-bounds-violated" on failure unless report_only.
ImmersionBounds immersion_bounds_check(const Grad& du, double gamma, bool report_only = false);
ImmersionBounds immersion_bounds_check(const Field& u, double gamma, bool report_only = false);

}  // namespace nkiso
