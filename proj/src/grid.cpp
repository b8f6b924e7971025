#include "nkiso/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "nkiso/error.hpp"

namespace nkiso {

GridSpec GridSpec::make(int n) {
    if (n < 9) throw GateError("grid-too-small", "n=" + std::to_string(n) + " < 9");
    return GridSpec{n, 1.0 / (n - 1)};
}

int components(Arity a) {
    switch (a) {
        case Arity::scalar: return 1;
        case Arity::vec2: return 2;
        case Arity::sym2: return 3;
        case Arity::vec4: return 4;
    }
    return 1;
}

const char* arity_name(Arity a) {
    switch (a) {
        case Arity::scalar: return "scalar";
        case Arity::vec2: return "vec2";
        case Arity::sym2: return "sym2";
        case Arity::vec4: return "vec4";
    }
    return "?";
}

Field::Field(const GridSpec& spec, Arity arity, double fill)
    : spec_(spec), arity_(arity), data_(spec.nodes() * static_cast<std::size_t>(components(arity)), fill) {}

Field Field::component(int c) const {
    Field r(spec_, Arity::scalar);
    std::copy(comp(c), comp(c) + nodes(), r.comp(0));
    return r;
}

void Field::set_component(int c, const Field& s) {
    require_same_grid(*this, s, "set_component");
    std::copy(s.comp(0), s.comp(0) + nodes(), comp(c));
}

bool Field::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Field& Field::operator+=(const Field& o) {
    require_same_grid(*this, o, "+=");
    if (o.arity_ != arity_) throw Error("arity-mismatch", "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
}

Field& Field::operator-=(const Field& o) {
    require_same_grid(*this, o, "-=");
    if (o.arity_ != arity_) throw Error("arity-mismatch", "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
}

Field& Field::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }
Field operator*(Field a, double s) { return a *= s; }

Field times(const Field& s, const Field& f) {
    require_same_grid(s, f, "times");
    Field r = f;
    const double* sv = s.comp(0);
    for (int c = 0; c < f.ncomp(); ++c) {
        double* p = r.comp(c);
        for (std::size_t k = 0; k < f.nodes(); ++k) p[k] *= sv[k];
    }
    return r;
}

Field mul(const Field& a, const Field& b) { return times(a, b.component(0)); }

void require_same_grid(const Field& a, const Field& b, const char* where) {
    if (!(a.spec() == b.spec()))
        throw Error("grid-mismatch", std::string(where) + ": n=" + std::to_string(a.spec().n) + " vs " +
                                         std::to_string(b.spec().n));
}

double frequency_ceiling(const GridSpec& spec) { return 2.0 * std::numbers::pi / 32.0 / spec.h; }

void require_resolved(const GridSpec& spec, double freq, const std::string& what) {
    if (std::abs(freq) > frequency_ceiling(spec) * (1.0 + 1e-12)) {
        std::ostringstream os;
        os.precision(17);
        os << what << ": freq*h = " << std::abs(freq) * spec.h << " > 2pi/32 (freq=" << freq
           << ", ceiling=" << frequency_ceiling(spec) << ")";
        throw GateError("grid-underresolved", os.str());
    }
}

namespace {

int g_max_deriv = 6;

// Fornberg's recursion: weights of the m-th derivative at x0 over nodes xs.
std::vector<double> fornberg(int m, double x0, const std::vector<double>& xs) {
    const std::size_t w = xs.size();
    const std::size_t M = static_cast<std::size_t>(m);
    std::vector<std::vector<double>> c(w, std::vector<double>(M + 1, 0.0));
    double c1 = 1.0;
    double c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for (std::size_t i = 1; i < w; ++i) {
        const std::size_t mn = std::min(i, M);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = xs[i] - x0;
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = xs[i] - xs[j];
            c2 *= c3;
            if (j == i - 1) {
                for (std::size_t k = mn; k >= 1; --k)
                    c[i][k] = c1 * (double(k) * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (std::size_t k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - double(k) * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> out(w);
    for (std::size_t i = 0; i < w; ++i) out[i] = c[i][M];
    return out;
}

// Per-node stencils for one axis: start index and weights (already divided by h^m).
struct Stencils {
    std::vector<int> start;
    std::vector<std::vector<double>> weights;
};

const Stencils& stencils(int n, int m) {
    static std::mutex mtx;
    static std::map<std::pair<int, int>, Stencils> cache;
    std::lock_guard lock(mtx);
    auto key = std::make_pair(n, m);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    // Centred width keeps fourth order (odd m needs one extra node); off-centre
    // windows lose one order for even m, so they get m+4 nodes.
    const int wc = m + 3 + (m % 2);
    const int wb = m + 4;
    if (wb > n) throw Error("derivative-depth-exceeded", "order " + std::to_string(m) + " needs " + std::to_string(wb) + " nodes, n=" + std::to_string(n));
    const int half = wc / 2;
    const double h = 1.0 / (n - 1);
    const double scale = std::pow(h, -m);

    Stencils s;
    s.start.resize(static_cast<std::size_t>(n));
    s.weights.resize(static_cast<std::size_t>(n));
    std::vector<double> interior;
    for (int p = 0; p < n; ++p) {
        const bool centred = p - half >= 0 && p + half <= n - 1;
        const int w = centred ? wc : wb;
        const int st = centred ? p - half : std::clamp(p - w / 2, 0, n - w);
        s.start[static_cast<std::size_t>(p)] = st;
        if (centred && !interior.empty()) {
            s.weights[static_cast<std::size_t>(p)] = interior;
            continue;
        }
        std::vector<double> xs(static_cast<std::size_t>(w));
        for (int k = 0; k < w; ++k) xs[static_cast<std::size_t>(k)] = st + k;
        auto wt = fornberg(m, p, xs);
        // weights of a derivative annihilate constants; remove the roundoff drift
        double sum = 0.0;
        for (double v : wt) sum += v;
        *std::max_element(wt.begin(), wt.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) -= sum;
        for (double& v : wt) v *= scale;
        if (centred) interior = wt;
        s.weights[static_cast<std::size_t>(p)] = std::move(wt);
    }
    return cache.emplace(key, std::move(s)).first->second;
}

void check_finite(const Field& f, const char* where) {
    if (!f.all_finite()) throw Error("invalid-field", std::string(where) + ": non-finite input");
}

}  // namespace

int max_deriv() { return g_max_deriv; }
void set_max_deriv(int m) {
    if (m < 1) throw GateError("invalid-config", "max_deriv must be >= 1");
    g_max_deriv = m;
}

Field derivative(const Field& f, int axis, int order) {
    if (axis != 1 && axis != 2) throw Error("invalid-axis", std::to_string(axis));
    if (order < 1) throw Error("invalid-order", std::to_string(order));
    if (order > g_max_deriv)
        throw Error("derivative-depth-exceeded",
                    "order " + std::to_string(order) + " > max_deriv " + std::to_string(g_max_deriv));
    check_finite(f, "derivative");
    const int n = f.spec().n;
    const Stencils& st = stencils(n, order);
    Field r(f.spec(), f.arity());
    for (int c = 0; c < f.ncomp(); ++c) {
        const double* in = f.comp(c);
        double* out = r.comp(c);
        if (axis == 1) {
            for (int j = 0; j < n; ++j) {
                const double* row = in + static_cast<std::size_t>(j) * n;
                double* orow = out + static_cast<std::size_t>(j) * n;
                for (int i = 0; i < n; ++i) {
                    const auto& w = st.weights[static_cast<std::size_t>(i)];
                    const double* src = row + st.start[static_cast<std::size_t>(i)];
                    double acc = 0.0;
                    for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * src[k];
                    orow[i] = acc;
                }
            }
        } else {
            for (int j = 0; j < n; ++j) {
                const auto& w = st.weights[static_cast<std::size_t>(j)];
                double* orow = out + static_cast<std::size_t>(j) * n;
                for (std::size_t k = 0; k < w.size(); ++k) {
                    const double* src = in + static_cast<std::size_t>(st.start[static_cast<std::size_t>(j)] + static_cast<int>(k)) * n;
                    const double wk = w[k];
                    for (int i = 0; i < n; ++i) orow[i] += wk * src[i];
                }
            }
        }
    }
    return r;
}

Grad gradient(const Field& f) { return {derivative(f, 1), derivative(f, 2)}; }

Field mollify(const Field& f, double l) {
    if (!(l > 0.0) || l > 1.0) throw Error("invalid-radius", "l=" + std::to_string(l));
    const GridSpec& g = f.spec();
    if (l < 2.0 * g.h) throw Error("kernel-unresolved", "l=" + std::to_string(l) + " < 2h=" + std::to_string(2 * g.h));
    check_finite(f, "mollify");

    const double R = l / g.h;
    const int P = static_cast<int>(std::ceil(R));
    struct Tap {
        int di, dj;
        double w;
    };
    std::vector<Tap> taps;
    double total = 0.0;
    for (int dj = -P; dj <= P; ++dj)
        for (int di = -P; di <= P; ++di) {
            const double r2 = (di * di + dj * dj) / (R * R);
            if (r2 >= 1.0) continue;
            const double w = std::exp(-1.0 / (1.0 - r2));
            taps.push_back({di, dj, w});
            total += w;
        }
    for (auto& t : taps) t.w /= total;

    // odd reflection through the boundary value keeps affine fields fixed
    const int n = g.n;
    const int m = n + 2 * P;
    std::vector<double> pad(static_cast<std::size_t>(m) * m);
    auto extend = [n, P](const double* src, std::ptrdiff_t stride, double* dst, std::ptrdiff_t dstride) {
        for (int i = 0; i < n + 2 * P; ++i) {
            const int k = i - P;
            double v;
            if (k < 0)
                v = 2.0 * src[0] - src[-k * stride];
            else if (k > n - 1)
                v = 2.0 * src[(n - 1) * stride] - src[(2 * (n - 1) - k) * stride];
            else
                v = src[k * stride];
            dst[i * dstride] = v;
        }
    };

    Field r(g, f.arity());
    for (int c = 0; c < f.ncomp(); ++c) {
        const double* in = f.comp(c);
        double* out = r.comp(c);
        const auto [lo, hi] = std::minmax_element(in, in + f.nodes());
        if (*lo == *hi) {
            std::fill(out, out + f.nodes(), *lo);
            continue;
        }
        for (int j = 0; j < n; ++j) extend(in + static_cast<std::size_t>(j) * n, 1, pad.data() + static_cast<std::size_t>(j + P) * m, 1);
        for (int i = 0; i < m; ++i) {
            std::vector<double> col(static_cast<std::size_t>(n));
            for (int j = 0; j < n; ++j) col[j] = pad[static_cast<std::size_t>(j + P) * m + i];
            extend(col.data(), 1, pad.data() + i, m);
        }
        std::fill(out, out + f.nodes(), 0.0);
        for (const auto& t : taps) {
            for (int j = 0; j < n; ++j) {
                const double* src = pad.data() + static_cast<std::size_t>(j + t.dj + P) * m + (t.di + P);
                double* orow = out + static_cast<std::size_t>(j) * n;
                for (int i = 0; i < n; ++i) orow[i] += t.w * src[i];
            }
        }
    }
    return r;
}

double max_abs(const Field& f) {
    double m = 0.0;
    for (double v : f.data()) m = std::max(m, std::abs(v));
    return m;
}

double sup_norm(const Field& f, int m) {
    if (m > g_max_deriv)
        throw Error("derivative-depth-exceeded", "sup_norm order " + std::to_string(m));
    double best = max_abs(f);
    for (int j = 1; j <= m; ++j)
        for (int a = 0; a <= j; ++a) {
            Field d = f;
            if (a > 0) d = derivative(d, 1, a);
            if (j - a > 0) d = derivative(d, 2, j - a);
            best = std::max(best, max_abs(d));
        }
    return best;
}

double holder_seminorm(const Field& f, double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0) throw Error("invalid-exponent", std::to_string(alpha));
    check_finite(f, "holder_seminorm");
    const int n = f.spec().n;
    const double h = f.spec().h;
    double best = 0.0;
    const int dirs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
    for (int s = 1; s <= n - 1; s *= 2) {
        for (const auto& d : dirs) {
            const int di = d[0] * s, dj = d[1] * s;
            const double dist = s * h * std::sqrt(double(d[0] * d[0] + d[1] * d[1]));
            const double inv = 1.0 / std::pow(dist, alpha);
            for (int c = 0; c < f.ncomp(); ++c) {
                const double* v = f.comp(c);
                for (int j = std::max(0, -dj); j < n - std::max(0, dj); ++j)
                    for (int i = 0; i + di < n; ++i) {
                        const double a = v[static_cast<std::size_t>(j) * n + i];
                        const double b = v[static_cast<std::size_t>(j + dj) * n + i + di];
                        best = std::max(best, std::abs(a - b) * inv);
                    }
            }
        }
    }
    return best;
}

namespace {
constexpr char kMagic[4] = {'N', 'K', 'G', 'F'};
}

void write_binary(const Field& f, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("io-error", "cannot open " + path.string());
    const std::int32_t n = f.spec().n;
    const std::int32_t ar = static_cast<std::int32_t>(f.arity());
    os.write(kMagic, 4);
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(&ar), sizeof ar);
    os.write(reinterpret_cast<const char*>(f.data().data()), static_cast<std::streamsize>(f.data().size() * sizeof(double)));
    if (!os) throw Error("io-error", "write failed: " + path.string());
}

Field read_binary(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("io-error", "cannot open " + path.string());
    char magic[4];
    std::int32_t n = 0, ar = 0;
    is.read(magic, 4);
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    is.read(reinterpret_cast<char*>(&ar), sizeof ar);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw Error("io-error", "bad field header: " + path.string());
    if (ar < 0 || ar > 3) throw Error("io-error", "bad arity tag in " + path.string());
    Field f(GridSpec::make(n), static_cast<Arity>(ar));
    is.read(reinterpret_cast<char*>(f.data().data()), static_cast<std::streamsize>(f.data().size() * sizeof(double)));
    if (!is) throw Error("io-error", "truncated payload: " + path.string());
    return f;
}

void write_csv(const Field& f, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("io-error", "cannot open " + path.string());
    os.precision(17);
    os << "i,j,x1,x2";
    for (int c = 0; c < f.ncomp(); ++c) os << ",c" << c;
    os << '\n';
    const int n = f.spec().n;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            os << i << ',' << j << ',' << f.spec().x(i) << ',' << f.spec().x(j);
            for (int c = 0; c < f.ncomp(); ++c) os << ',' << f(c, i, j);
            os << '\n';
        }
}

}  // namespace nkiso
