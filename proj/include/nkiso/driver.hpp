#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nkiso/frames.hpp"
#include "nkiso/grid.hpp"
#include "nkiso/stage.hpp"

namespace nkiso {

// Outer parameter progression δ_n = a^{−bⁿ}, μ_n = a^{τ+(bⁿ−1)/(2θ)},
// σ_{n+1} = (δ_n/δ_{n+1})^{1/S}.
struct Schedule {
    double a = 1e4, b = 1.05;
    double theta = 0.3;
    double tau = 2.5;
    double S = 16, J = 12, p = 7.5;  // Stage rates: S = NK, J = 2K + N, p = (3N+3)/2
    double r_beta = 2.0;             // regularity r + β of g
    double g_norm = 1.0;             // ‖g‖_{r,β}

    double delta(int n) const;
    double mu(int n) const;
    double sigma(int n) const;  // σ_n, n ≥ 1
    double alpha_ceiling() const;  // min{(r+β)/2, 1/(1+2J/S)}

    nlohmann::json to_json() const;
};

// S, J, p read off the Stage with the given N, K.
Schedule stage_rates(Schedule s, int N, int K);
// τ = τ̲ + 1 with τ̲ = (1 + 1/(r+β))·N₀.
double default_tau(int N0, double r_beta);

// Stored sequences; sigma[0] is unused.
struct ScheduleTable {
    std::vector<double> delta, mu, sigma;
};
ScheduleTable schedule_table(const Schedule& s, int horizon);

struct FeasibilityCheck {
    int n = -1;  // -1 for checks not tied to an iteration
    std::string name, inequality;
    double lhs = 0.0, rhs = 0.0;
    bool ok = true;

    std::string message() const;
};

struct FeasibilityReport {
    std::vector<FeasibilityCheck> checks;
    bool feasible = true;
    std::string first_failure;

    nlohmann::json to_json() const;
};

FeasibilityReport validate_schedule(const Schedule& s, int horizon, double measured_C, double sigma_floor);

// Non-empty when α is outside (0, min{(r+β)/2, 1/(1+2J/S)}) or θ does not
// separate it from the ceiling.
std::vector<std::string> alpha_violations(const Schedule& s, double alpha);

struct IterationMetrics {
    int n = 0;
    double delta = 0.0, mu = 0.0, sigma = 0.0;
    double c1_increment = 0.0;    // ‖u_n − u_{n−1}‖₁
    double u2 = 0.0;              // ‖u_n‖₂
    double defect_sup = 0.0;      // ‖𝒟(g, u_n)‖₀
    double defect_shifted = 0.0;  // ‖𝒟(g − δ_n H₀, u_n)‖₀
    double shifted_target = 0.0;  // (r₀/4)δ_n
    double final_target = 0.0;    // (r₀/4 + |H₀|)δ_n
    double c0_proximity = 0.0;    // ‖u_n − ū‖₀
    double interpolation = 0.0;   // ‖Δ‖₂^α ‖Δ‖₁^{1−α}, Δ = u_n − u_{n−1}
    double holder = 0.0;          // [∇u_n]_{0,α}

    nlohmann::json to_json() const;
};

IterationMetrics measure_iterate(int n, const ImmersionState& s, const ImmersionState* prev, const Field& g,
                                 const Field& u_bar, double alpha);

struct ConvergenceReport {
    std::string status;  // contracting | non-contracting | stationary | insufficient
    std::vector<double> increments;  // ‖u_{n+1}−u_n‖_{1,α} surrogates
    std::vector<double> increment_ratios;
    std::vector<double> defect;          // ‖𝒟(g,u_n)‖₀
    std::vector<double> defect_target;   // (r₀/4 + |H₀|)δ_n
    std::vector<double> holder;
    double ratio = 0.0;  // geometric mean of increment ratios, else last defect ratio
    bool defect_within_target = false;   // factor-2 slack

    nlohmann::json to_json() const;
};

ConvergenceReport convergence_report(const std::vector<ImmersionState>& iterates, const Field& g, double alpha);

struct RunOptions {
    double alpha = 0.01;
    double epsilon = 0.5;
    int n_iters = 1;
    Schedule schedule;
    StageParams stage;  // δ, μ, σ are overwritten per iteration
    double measured_C = 1.0;
    double sigma_floor = 1.0;
    InitialStageOptions initial;
    std::filesystem::path snapshot_dir;  // empty: no snapshots
};

struct RunResult {
    std::vector<ImmersionState> iterates;
    std::vector<IterationMetrics> metrics;
    std::vector<StageTrace> traces;
    InitialStageReport initial;
    FeasibilityReport feasibility;
    ConvergenceReport convergence;
    std::vector<std::string> warnings;
    std::string status = "complete";  // or truncated-by-resolution
    std::string note;
    int first_index = 0;  // index of iterates[0]

    nlohmann::json to_json() const;
};

// Continuation point read from a snapshot.
struct Checkpoint {
    int index = 0;
    ImmersionState state;
    std::vector<IterationMetrics> metrics;
};

RunResult run(const Field& g, const Field& u_bar, const RunOptions& opts, const Checkpoint* resume = nullptr);

void save_snapshot(const std::filesystem::path& dir, int index, const ImmersionState& s,
                   const std::vector<IterationMetrics>& metrics);
Checkpoint load_snapshot(const std::filesystem::path& dir);

}  // namespace nkiso
