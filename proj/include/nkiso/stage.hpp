#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nkiso/frames.hpp"
#include "nkiso/grid.hpp"
#include "nkiso/kallen.hpp"
#include "nkiso/metric.hpp"

namespace nkiso {

struct StageParams {
    int N = 4, K = 4;
    double sigma = 2.0;
    double delta = 1e-2;
    double mu = 10.0;
    double gamma_lower = 4.0;
    // false: parameter gates become trace warnings and guards clamp instead
    // of aborting. Only meant for exploratory runs outside the proven regime.
    bool enforce_gates = true;
    bool mollify = true;
    double mollify_C = 0.0;  // 0 calibrates
    double rho = 0.2;        // frame propagation closeness

    nlohmann::json to_json() const;
};

// Violated parameter inequalities, each named, e.g. "(Ass1): σ^{3N+3}δ ≤ 1 violated: lhs=..., rhs=1".
std::vector<std::string> parameter_violations(const StageParams& p);

// δ_k for k = 0..K and μ_k for k = 0..K, built by the recursions
// δ_{k+1} = δ_k/σ^N, μ_1 = μ₀σ^{N+2}, μ_{k+1} = μ_kσ^{N/2+2}.
struct StageSchedule {
    std::vector<double> delta, mu;
};
StageSchedule stage_schedule(const StageParams& p);

// Highest grid frequency the stage needs (κ along the diagonal, μ_K along e2).
double stage_peak_frequency(const StageParams& p);

struct CorrugationRecord {
    int k = 0;
    int step = 0;  // 1, 2, 3
    double frequency = 0.0;
    double defect_before = 0.0, defect_after = 0.0;
    double amp_min = 0.0, amp_max = 0.0;
    std::map<std::string, double> norms;  // error families of this step
    double frame_drift = 0.0;
    double orthonormality = 0.0, normality = 0.0;
    double min_eig = 0.0, max_eig = 0.0;
};

struct InnerRecord {
    int k = 0;
    double delta_k = 0.0, delta_next = 0.0, mu_k = 0.0, mu_next = 0.0, lambda = 0.0, kappa = 0.0;
    double defect_in = 0.0;   // ‖𝒟(g₀−δ_k H₀, u_k)‖₀
    double defect_out = 0.0;  // ‖𝒟(g₀−δ_{k+1} H₀, u_{k+1})‖₀
    double c1_drift = 0.0;    // ‖u_{k+1} − u_k‖₁
    double frame_drift = 0.0; // max_i ‖E^i_{u_{k+1}} − E^i_{u_k}‖₀
    double b2_min = 0.0, b2_max = 0.0;
    nlohmann::json kallen;
};

struct StageTrace {
    std::vector<CorrugationRecord> rows;
    std::vector<InnerRecord> inner;
    std::vector<std::string> warnings;
    double mollify_C = 0.0, mollify_l = 0.0;
    double commutator = 0.0;  // ‖𝒟(g₀−δH₀,u_l)‖₀ − ‖𝒟(g−δH₀,u)‖₀
    double g_gap = 0.0;       // ‖g − g₀‖₀
    double defect_in = 0.0;
    double defect_out = 0.0;  // ‖𝒟(g₀ − δ_K H₀, u_K)‖₀
    double defect_out_g = 0.0; // same with g in place of g₀
    double c1_total = 0.0;    // ‖u_K − u₀‖₁

    nlohmann::json to_json() const;
    void write_csv(const std::filesystem::path& path) const;
};

struct TripleParams {
    int k = 0, N = 4;
    double delta_k = 0.0, delta_next = 0.0, mu_k = 0.0, mu_next = 0.0, sigma = 2.0;
};

struct TripleOptions {
    bool enforce = true;
    double gamma = 0.0;  // immersion bound to check on every intermediate field; 0 skips
    double rho = 0.2;
    // Replaces the Källén amplitudes (normalized, i.e. â with a = δ_k^{1/2} â).
    const KallenResult* forced = nullptr;
};

// One inner step k → k+1. The state's gradient must be consistent with u.
ImmersionState triple_corrugation(const ImmersionState& s, const Field& g0, const TripleParams& tp,
                                  const TripleOptions& opts, StageTrace& trace);

// Mollification of u, g at l = 1/(Cμ) followed by K inner steps.
ImmersionState stage(const Field& g, const ImmersionState& s, const StageParams& p, StageTrace* trace = nullptr);

struct InitialStageOptions {
    double C_bar = 1.0;       // starting value, raised by calibration
    double r_beta = 2.0;      // regularity index of g
    int attempts = 6;
    double gamma = 0.0;       // 0 derives γ̲ from ū and g
    double ratio = 0.0;       // λ_i/λ_{i+1}; 0 uses εl
};

struct InitialStageReport {
    double l = 0.0, epsilon = 0.0, C_bar = 0.0;
    std::vector<double> frequencies;
    std::vector<Vec2> directions;
    int max_active = 0;
    double defect = 0.0, target = 0.0;
    double c0_distance = 0.0;  // ‖u₀ − ū‖₀
    double c1_distance = 0.0;  // ‖∇(u₀ − ū)‖₀
    double gamma = 0.0;
    ImmersionBounds bounds;
    int attempts = 0;

    nlohmann::json to_json() const;
};

ImmersionState initial_stage(const Field& g, const Field& u_bar, double delta, InitialStageReport* report = nullptr,
                             const InitialStageOptions& opts = {});

// ‖u‖₁ style norms on the carried gradient.
double c1_distance(const ImmersionState& a, const ImmersionState& b);
double second_derivative_sup(const Grad& du);

}  // namespace nkiso
