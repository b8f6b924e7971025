#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nkiso/frames.hpp"
#include "nkiso/grid.hpp"
#include "nkiso/metric.hpp"

namespace nkiso {

struct StepResult {
    Field u_new;
    Grad grad_new;          // assembled from the gradient expansion, never differenced
    Field principal;        // a²η⊗η
    std::vector<std::pair<std::string, Field>> errors;  // labelled sym2 terms
    Field pullback_diff;    // (∇ũ)ᵀ∇ũ − (∇u)ᵀ∇u

    const Field& error(const std::string& label) const;
    Field error_sum() const;
};

// Frequency seen along the grid axes by the phase λ⟨x, η⟩.
double effective_frequency(double lambda, Vec2 eta);

// t = ⟨x, η⟩ per node.
Field phase_field(const GridSpec& spec, Vec2 eta);

// gammabar_shift replaces Γ̄ = cos by cos − shift. The metric identity only
// sees Γ̄', and shift = 1 removes the a/λ offset of slow spirals.
StepResult nash_spiral_step(const Field& u, const Grad& du, const NormalFrame& E, const Field& a, Vec2 eta,
                            double lambda, double gammabar_shift = 0.0);
StepResult nash_spiral_step(const Field& u, const NormalFrame& E, const Field& a, Vec2 eta, double lambda,
                            double gammabar_shift = 0.0);

// Fault hook for the verification harness: scales the reported S3 term.
struct KuiperOptions {
    double s3_scale = 1.0;
};

// Raw S1..S4 (no oscillatory prefactors), as needed to synthesise w.
struct KuiperSTerms {
    Field S1, S2, S3, S4;
};
KuiperSTerms kuiper_s_terms(const Grad& du, const Field& E, const Field& a, Vec2 eta);

StepResult kuiper_step(const Field& u, const Grad& du, const Field& E, const Field& a, Vec2 eta, double lambda,
                       const Field& w, const Grad& dw, const KuiperOptions& opts = {});
// w differentiated on the grid.
StepResult kuiper_step(const Field& u, const Field& E, const Field& a, Vec2 eta, double lambda, const Field& w,
                       const KuiperOptions& opts = {});

struct StepReport {
    double residual = 0.0;        // max-entry of pullback_diff − principal − Σ errors
    double principal_norm = 0.0;
    double relative = 0.0;
    std::vector<std::pair<std::string, double>> term_norms;
    bool pass = false;

    nlohmann::json to_json() const;
};

StepReport verify_step_identity(const StepResult& r, double tol = 1e-9);

}  // namespace nkiso
