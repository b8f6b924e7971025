#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "nkiso/grid.hpp"

namespace nkiso {

struct KallenResult {
    Field a1, a2, a3;
    Field F;                              // 𝓔_{N-1} − 𝓔_N
    int iterations = 0;
    std::vector<double> residual_history;  // ‖𝓕_j‖₀, j = 1..N
    double min_a2 = 0.0, max_a2 = 0.0;     // range of a_i² over all i

    nlohmann::json to_json() const;
    void write_history_csv(const std::filesystem::path& path) const;
};

struct KallenOptions {
    // Warn-only threshold for λ/μ (μ the oscillation scale of H); 0 disables.
    double sigma_floor = 0.0;
    double mu = 0.0;
};

// Fixed point a_{i,j} = (ā_i(H − 𝓔_{j−1}))^{1/2}, 𝓔_j = λ⁻²∇a_{1,j}⊗∇a_{1,j} + κ⁻²∇a_{2,j}⊗∇a_{2,j}.
KallenResult kallen_decompose(const Field& H, double lambda, double kappa, int N, const KallenOptions& opts = {});

// H − Σ a_i²η_i⊗η_i − λ⁻²∇a1⊗∇a1 − κ⁻²∇a2⊗∇a2 − F
Field kallen_residual(const Field& H, const KallenResult& r, double lambda, double kappa);

}  // namespace nkiso
