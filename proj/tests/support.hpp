#pragma once

// Shared helpers for the test programs: random generators for property
// checks and an exactly differentiable trigonometric field type.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "nkiso/error.hpp"
#include "nkiso/grid.hpp"

namespace testsupport {

using nkiso::Field;
using nkiso::GridSpec;

inline std::mt19937_64& rng() {
    static std::mt19937_64 g(20240611u);
    return g;
}

inline double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

// Σ amp·cos(2π(k1 x1 + k2 x2) + phase); derivatives are exact.
struct Trig2 {
    struct Mode {
        double amp, k1, k2, phase;
    };
    std::vector<Mode> modes;
    double constant = 0.0;

    double operator()(double x1, double x2) const {
        double v = constant;
        for (const auto& m : modes) v += m.amp * std::cos(2 * std::numbers::pi * (m.k1 * x1 + m.k2 * x2) + m.phase);
        return v;
    }

    Trig2 d(int axis) const {
        Trig2 r;
        for (const auto& m : modes) {
            const double f = 2 * std::numbers::pi * (axis == 1 ? m.k1 : m.k2);
            if (f != 0.0) r.modes.push_back({m.amp * f, m.k1, m.k2, m.phase + std::numbers::pi / 2});
        }
        return r;
    }

    Field sample(const GridSpec& g) const {
        return Field::scalar(g, [&](double x1, double x2) { return (*this)(x1, x2); });
    }

    friend Trig2 operator+(Trig2 a, const Trig2& b) {
        a.constant += b.constant;
        a.modes.insert(a.modes.end(), b.modes.begin(), b.modes.end());
        return a;
    }
    friend Trig2 operator*(double s, Trig2 a) {
        a.constant *= s;
        for (auto& m : a.modes) m.amp *= s;
        return a;
    }
    friend Trig2 operator-(const Trig2& a, const Trig2& b) { return a + (-1.0) * b; }
};

inline Trig2 random_trig(int modes, double amp, int kmax) {
    Trig2 t;
    t.constant = uniform(-amp, amp);
    for (int i = 0; i < modes; ++i)
        t.modes.push_back({uniform(-amp, amp), double(std::uniform_int_distribution<int>(-kmax, kmax)(rng())),
                           double(std::uniform_int_distribution<int>(-kmax, kmax)(rng())), uniform(0, 2 * std::numbers::pi)});
    return t;
}

inline double max_diff(const Field& a, const Field& b) { return nkiso::max_abs(a - b); }

// Error code thrown by f, or "" if it returns normally.
template <class F>
std::string code_of(F&& f) {
    try {
        f();
    } catch (const nkiso::Error& e) {
        return e.code();
    }
    return "";
}

}  // namespace testsupport
