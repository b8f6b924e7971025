#pragma once

#include <json.hpp>

#include "nkiso/grid.hpp"

namespace nkiso {

struct NormalFrame {
    Field e1, e2;  // vec4
};

// u with its carried gradient columns and normal frame. The gradient is the
// analytically assembled one; frames and tangent fields are built from it.
struct ImmersionState {
    Field u;
    Grad du;
    NormalFrame E;
    double delta = 0.0;
    double mu = 0.0;
};

// Columns of T_u = ∇u ((∇u)ᵀ∇u)^{-1}, returned as a Grad (t.d1, t.d2).
Grad tangent_frame(const Grad& du);
Grad tangent_frame(const Field& u);

NormalFrame initial_normal_frame(const Grad& du);
NormalFrame initial_normal_frame(const Field& u);

struct PropagationReport {
    double grad_jump = 0.0;    // ‖∇v − ∇u‖₀
    double frame_drift = 0.0;  // max_i ‖E_v^i − E_u^i‖₀
    double ratio = 0.0;        // drift / jump
};

NormalFrame propagate_frame(const Grad& du, const Grad& dv, const NormalFrame& Eu, double rho = 0.2,
                            PropagationReport* report = nullptr);

// Projects a hint frame onto the normal plane of v and orthonormalizes it
// symmetrically; tolerates large tilts as long as the projections span.
NormalFrame project_frame(const Grad& dv, const NormalFrame& hint);

struct FrameResiduals {
    double orthonormality = 0.0;  // max of ||E^i|-1| and |<E^1,E^2>|
    double normality = 0.0;       // max |(∇u)ᵀE^i|

    nlohmann::json to_json() const { return {{"orthonormality", orthonormality}, {"normality", normality}}; }
};

FrameResiduals frame_residuals(const Grad& du, const NormalFrame& E);

// Finite-difference derivatives of unit normal fields, corrected so that
// ⟨E, ∂E⟩ = 0 (single field) or ⟨E^i, ∂E^k⟩ + ⟨E^k, ∂E^i⟩ = 0 (pair) hold
// node-wise. The step identities rely on these relations.
Grad unit_field_derivative(const Field& e);
struct FrameDerivatives {
    Grad e1, e2;
};
FrameDerivatives frame_derivatives(const NormalFrame& E);

}  // namespace nkiso
