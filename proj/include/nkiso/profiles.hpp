#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nkiso/grid.hpp"

namespace nkiso {

// One harmonic: s·sin(k t) + c·cos(k t), k ≥ 1.
struct Harmonic {
    int k = 1;
    double s = 0.0;
    double c = 0.0;
};

// Finite trigonometric polynomial constant + Σ harmonics.
struct TrigPoly {
    double constant = 0.0;
    std::vector<Harmonic> terms;

    double eval(double t) const;
    TrigPoly derivative() const;
    // Zero-mean primitive; throws "unbounded-primitive" if constant != 0.
    TrigPoly antiderivative() const;
    bool operator==(const TrigPoly& o) const;
};

enum class ProfileKind {
    nash_gamma,               // sin t
    nash_gammabar,            // cos t
    kuiper_gamma,             // √2 sin t
    kuiper_gammabar,          // -(1/4) sin 2t
    kuiper_ddbar,             // Γ² - 1 = -cos 2t
    product_gammagammaprime,  // Γ Γ' = sin 2t
};

const char* profile_name(ProfileKind k);
TrigPoly profile_base(ProfileKind k);

// Level 0 is the profile, level i > 0 the i-th zero-mean primitive Γ_i,
// level -j the j-th derivative.
class ProfileTower {
public:
    ProfileTower() = default;
    ProfileTower(std::string name, TrigPoly base, int depth);

    const std::string& name() const { return name_; }
    int depth() const { return static_cast<int>(up_.size()) - 1; }
    const TrigPoly& level(int i) const;

    double eval(int level, double t) const { return this->level(level).eval(t); }
    // Γ_level(λ t) at every node.
    Field eval(int level, double lambda, const Field& t) const;

    nlohmann::json to_json() const;

private:
    std::string name_;
    std::vector<TrigPoly> up_;    // levels 0..depth
    std::vector<TrigPoly> down_;  // derivatives 1..max
};

ProfileTower build_tower(ProfileKind kind, int depth);
ProfileTower build_tower(const std::string& name, const TrigPoly& base, int depth);

}  // namespace nkiso
