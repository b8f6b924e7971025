#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace nkiso {

// Uniform (n x n) node grid on the unit square, h = 1/(n-1).
struct GridSpec {
    int n = 0;
    double h = 0.0;

    static GridSpec make(int n);

    double x(int i) const { return i * h; }
    std::size_t nodes() const { return static_cast<std::size_t>(n) * static_cast<std::size_t>(n); }
    bool operator==(const GridSpec& o) const { return n == o.n; }
};

enum class Arity { scalar, vec2, sym2, vec4 };

int components(Arity a);
const char* arity_name(Arity a);

// Node values stored component-plane by component-plane; inside a plane the
// node (i, j) at (x1, x2) = (i h, j h) lives at j*n + i.
class Field {
public:
    Field() = default;
    Field(const GridSpec& spec, Arity arity, double fill = 0.0);

    // f(x1, x2, out) writes components(arity) values.
    template <class F>
    static Field sample(const GridSpec& spec, Arity arity, F&& f) {
        Field r(spec, arity);
        std::vector<double> buf(static_cast<std::size_t>(r.ncomp()));
        for (int j = 0; j < spec.n; ++j)
            for (int i = 0; i < spec.n; ++i) {
                f(spec.x(i), spec.x(j), buf.data());
                for (int c = 0; c < r.ncomp(); ++c) r(c, i, j) = buf[static_cast<std::size_t>(c)];
            }
        return r;
    }

    template <class F>
    static Field scalar(const GridSpec& spec, F&& f) {
        return sample(spec, Arity::scalar, [&](double x1, double x2, double* out) { out[0] = f(x1, x2); });
    }

    const GridSpec& spec() const { return spec_; }
    Arity arity() const { return arity_; }
    int ncomp() const { return components(arity_); }
    std::size_t nodes() const { return spec_.nodes(); }
    bool empty() const { return data_.empty(); }

    double* comp(int c) { return data_.data() + static_cast<std::size_t>(c) * nodes(); }
    const double* comp(int c) const { return data_.data() + static_cast<std::size_t>(c) * nodes(); }

    double& operator()(int c, int i, int j) { return comp(c)[static_cast<std::size_t>(j) * spec_.n + i]; }
    double operator()(int c, int i, int j) const { return comp(c)[static_cast<std::size_t>(j) * spec_.n + i]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    Field component(int c) const;
    void set_component(int c, const Field& s);

    bool all_finite() const;

    Field& operator+=(const Field& o);
    Field& operator-=(const Field& o);
    Field& operator*=(double s);

private:
    GridSpec spec_;
    Arity arity_ = Arity::scalar;
    std::vector<double> data_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);
Field operator*(Field a, double s);

// Gradient columns of a field: d1 = ∂1 f, d2 = ∂2 f (same arity as f).
struct Grad {
    Field d1, d2;
    const Field& operator[](int axis) const { return axis == 1 ? d1 : d2; }
    Field& operator[](int axis) { return axis == 1 ? d1 : d2; }
};

// Pointwise product of a scalar field with every component of f.
Field times(const Field& scalar, const Field& f);
// Pointwise product of two scalar fields.
Field mul(const Field& a, const Field& b);

void require_same_grid(const Field& a, const Field& b, const char* where);

// Largest frequency the grid resolves with at least 32 nodes per period.
double frequency_ceiling(const GridSpec& spec);
void require_resolved(const GridSpec& spec, double freq, const std::string& what);

// Derivative order budget for the run (default 6).
int max_deriv();
void set_max_deriv(int m);

Field derivative(const Field& f, int axis, int order = 1);
Field mollify(const Field& f, double l);
Grad gradient(const Field& f);

// Largest |value| over nodes and components.
double max_abs(const Field& f);
double sup_norm(const Field& f, int m = 0);
double holder_seminorm(const Field& f, double alpha);

void write_binary(const Field& f, const std::filesystem::path& path);
Field read_binary(const std::filesystem::path& path);
void write_csv(const Field& f, const std::filesystem::path& path);

}  // namespace nkiso
