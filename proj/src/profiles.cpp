#include "nkiso/profiles.hpp"

#include <cmath>
#include <numbers>

#include "nkiso/error.hpp"

namespace nkiso {

double TrigPoly::eval(double t) const {
    double v = constant;
    for (const auto& h : terms) v += h.s * std::sin(h.k * t) + h.c * std::cos(h.k * t);
    return v;
}

TrigPoly TrigPoly::derivative() const {
    TrigPoly d;
    for (const auto& h : terms) d.terms.push_back({h.k, -h.k * h.c, h.k * h.s});
    return d;
}

TrigPoly TrigPoly::antiderivative() const {
    if (constant != 0.0) throw Error("unbounded-primitive", "level has mean " + std::to_string(constant));
    TrigPoly p;
    for (const auto& h : terms) p.terms.push_back({h.k, h.c / h.k, -h.s / h.k});
    return p;
}

bool TrigPoly::operator==(const TrigPoly& o) const {
    if (constant != o.constant || terms.size() != o.terms.size()) return false;
    for (std::size_t i = 0; i < terms.size(); ++i)
        if (terms[i].k != o.terms[i].k || terms[i].s != o.terms[i].s || terms[i].c != o.terms[i].c) return false;
    return true;
}

const char* profile_name(ProfileKind k) {
    switch (k) {
        case ProfileKind::nash_gamma: return "nash_gamma";
        case ProfileKind::nash_gammabar: return "nash_gammabar";
        case ProfileKind::kuiper_gamma: return "kuiper_gamma";
        case ProfileKind::kuiper_gammabar: return "kuiper_gammabar";
        case ProfileKind::kuiper_ddbar: return "kuiper_ddbar";
        case ProfileKind::product_gammagammaprime: return "product_gammagammaprime";
    }
    return "?";
}

TrigPoly profile_base(ProfileKind k) {
    switch (k) {
        case ProfileKind::nash_gamma: return {0.0, {{1, 1.0, 0.0}}};
        case ProfileKind::nash_gammabar: return {0.0, {{1, 0.0, 1.0}}};
        case ProfileKind::kuiper_gamma: return {0.0, {{1, std::numbers::sqrt2, 0.0}}};
        case ProfileKind::kuiper_gammabar: return {0.0, {{2, -0.25, 0.0}}};
        case ProfileKind::kuiper_ddbar: return {0.0, {{2, 0.0, -1.0}}};
        case ProfileKind::product_gammagammaprime: return {0.0, {{2, 1.0, 0.0}}};
    }
    throw Error("invalid-profile");
}

namespace {
constexpr int kMaxDepth = 64;
constexpr int kMaxDown = 16;
}  // namespace

ProfileTower::ProfileTower(std::string name, TrigPoly base, int depth) : name_(std::move(name)) {
    if (depth < 0 || depth > kMaxDepth) throw Error("invalid-depth", "tower depth " + std::to_string(depth));
    up_.push_back(base);
    for (int i = 1; i <= depth; ++i) up_.push_back(up_.back().antiderivative());
    TrigPoly d = base;
    for (int i = 1; i <= kMaxDown; ++i) {
        d = d.derivative();
        down_.push_back(d);
    }
}

const TrigPoly& ProfileTower::level(int i) const {
    if (i >= 0) {
        if (i > depth()) throw Error("level-out-of-range", name_ + " level " + std::to_string(i) + " > depth " + std::to_string(depth()));
        return up_[static_cast<std::size_t>(i)];
    }
    if (-i > std::min(kMaxDown, max_deriv()))
        throw Error("level-out-of-range", name_ + " derivative level " + std::to_string(i));
    return down_[static_cast<std::size_t>(-i - 1)];
}

Field ProfileTower::eval(int lvl, double lambda, const Field& t) const {
    const TrigPoly& p = level(lvl);
    Field r(t.spec(), Arity::scalar);
    const double* tv = t.comp(0);
    double* out = r.comp(0);
    for (std::size_t n = 0; n < t.nodes(); ++n) out[n] = p.eval(lambda * tv[n]);
    return r;
}

nlohmann::json ProfileTower::to_json() const {
    nlohmann::json levels = nlohmann::json::array();
    for (std::size_t i = 0; i < up_.size(); ++i) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& h : up_[i].terms) terms.push_back({{"k", h.k}, {"sin", h.s}, {"cos", h.c}});
        levels.push_back({{"level", i}, {"constant", up_[i].constant}, {"terms", terms}});
    }
    return {{"name", name_}, {"depth", depth()}, {"levels", levels}};
}

ProfileTower build_tower(ProfileKind kind, int depth) { return ProfileTower(profile_name(kind), profile_base(kind), depth); }

ProfileTower build_tower(const std::string& name, const TrigPoly& base, int depth) { return ProfileTower(name, base, depth); }

}  // namespace nkiso
