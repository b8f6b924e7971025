#include "nkiso/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nkiso/error.hpp"
#include "nkiso/metric.hpp"

namespace nkiso {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw Error("io-error", "cannot write " + path.string());
    os.precision(17);
    return os;
}

std::array<double, 3> project(const Projection& p, const Field& u, std::size_t node) {
    double x[4];
    for (int c = 0; c < 4; ++c) x[c] = u.comp(c)[node];
    std::array<double, 3> r{};
    if (p.use_matrix) {
        for (int i = 0; i < 3; ++i)
            for (int c = 0; c < 4; ++c) r[i] += p.matrix[i][c] * x[c];
        return r;
    }
    int k = 0;
    for (int c = 0; c < 4; ++c)
        if (c + 1 != p.drop[0] && c + 1 != p.drop[1] && k < 3) r[k++] = x[c];
    return r;
}

void check_projection(const Projection& p, const Field& u) {
    if (u.arity() != Arity::vec4) throw GateError("config-invalid", "mesh export needs a vec4 field");
    if (p.use_matrix) {
        for (const auto& row : p.matrix)
            for (double v : row)
                if (!std::isfinite(v)) throw GateError("config-invalid", "projection matrix not finite");
        return;
    }
    const auto [a, b] = p.drop;
    if (a < 1 || a > 4 || b < 1 || b > 4 || a == b)
        throw GateError("config-invalid", "projection must drop two distinct coordinates in 1..4");
}

void check_attributes(const Field& u, const std::vector<Attribute>& attrs) {
    for (const auto& [name, f] : attrs) {
        require_same_grid(u, f, "mesh attribute");
        if (f.arity() != Arity::scalar) throw GateError("config-invalid", "attribute " + name + " is not scalar");
        if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
            throw GateError("config-invalid", "attribute name '" + name + "' must be a single word");
    }
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
    KeyValues kv;
    kv.origin_ = origin;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw GateError("config-invalid", origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || key.find_first_of(" \t") != std::string::npos)
            throw GateError("config-invalid", origin + ":" + std::to_string(lineno) + ": bad key '" + key + "'");
        if (kv.values_.count(key))
            throw GateError("config-invalid", origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
        kv.values_[key] = value;
    }
    return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw GateError("config-invalid", "cannot read config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str(), path.string());
}

std::string KeyValues::str(const std::string& key, const std::string& fallback) const {
    read_[key] = true;
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValues::real(const std::string& key, double fallback) const {
    read_[key] = true;
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& s = it->second;
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
        throw GateError("config-invalid", origin_ + ": " + key + " = '" + s + "' is not a finite number");
    return v;
}

int KeyValues::integer(const std::string& key, int fallback) const {
    read_[key] = true;
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& s = it->second;
    int v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw GateError("config-invalid", origin_ + ": " + key + " = '" + s + "' is not an integer");
    return v;
}

bool KeyValues::flag(const std::string& key, bool fallback) const {
    read_[key] = true;
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& s = it->second;
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw GateError("config-invalid", origin_ + ": " + key + " = '" + s + "' is not a boolean");
}

std::vector<std::string> KeyValues::unused() const {
    std::vector<std::string> r;
    for (const auto& [k, v] : values_)
        if (!read_.count(k)) r.push_back(k);
    return r;
}

nlohmann::json RunConfig::to_json() const {
    return {{"grid", {{"n", n}}},
            {"metric", {{"preset", metric_preset}, {"amplitude", metric_amplitude}, {"file", metric_file.string()}}},
            {"immersion", {{"preset", immersion_preset}, {"scale", immersion_scale}}},
            {"stage", stage.to_json()},
            {"schedule", schedule.to_json()},
            {"tau_given", tau_given},
            {"measured_C", measured_C},
            {"sigma_floor", sigma_floor},
            {"initial", {{"C_bar", initial.C_bar}, {"r_beta", initial.r_beta}, {"attempts", initial.attempts},
                         {"ratio", initial.ratio}}},
            {"run", {{"alpha", alpha}, {"epsilon", epsilon}, {"iterations", iterations}}},
            {"output", {{"dir", output_dir.string()}, {"snapshots", snapshots}}},
            {"export", {{"obj", export_obj}, {"vtk", export_vtk}, {"drop", drop}}},
            {"warnings", warnings}};
}

RunConfig parse_config(const KeyValues& kv) {
    RunConfig c;
    c.n = kv.integer("grid.n", c.n);
    c.metric_preset = kv.str("metric.preset", c.metric_preset);
    c.metric_amplitude = kv.real("metric.amplitude", c.metric_amplitude);
    c.metric_file = kv.str("metric.file", "");
    c.immersion_preset = kv.str("immersion.preset", c.immersion_preset);
    c.immersion_scale = kv.real("immersion.scale", c.immersion_scale);

    StageParams& s = c.stage;
    s.N = kv.integer("stage.N", s.N);
    s.K = kv.integer("stage.K", s.K);
    s.sigma = kv.real("stage.sigma", s.sigma);
    s.delta = kv.real("stage.delta", s.delta);
    s.mu = kv.real("stage.mu", s.mu);
    s.gamma_lower = kv.real("stage.gamma_lower", s.gamma_lower);
    s.enforce_gates = kv.flag("stage.enforce_gates", s.enforce_gates);
    s.mollify = kv.flag("stage.mollify", s.mollify);
    s.mollify_C = kv.real("stage.mollify_C", s.mollify_C);
    s.rho = kv.real("stage.rho", s.rho);

    Schedule& q = c.schedule;
    q.a = kv.real("schedule.a", q.a);
    q.b = kv.real("schedule.b", q.b);
    q.theta = kv.real("schedule.theta", q.theta);
    c.tau_given = kv.has("schedule.tau");
    q.tau = kv.real("schedule.tau", q.tau);
    q.r_beta = kv.real("schedule.r_beta", q.r_beta);
    q.g_norm = kv.real("schedule.g_norm", 0.0);
    q = stage_rates(q, s.N, s.K);
    c.measured_C = kv.real("schedule.measured_C", c.measured_C);
    c.sigma_floor = kv.real("schedule.sigma_floor", c.sigma_floor);

    c.initial.C_bar = kv.real("initial.C_bar", c.initial.C_bar);
    c.initial.attempts = kv.integer("initial.attempts", c.initial.attempts);
    c.initial.ratio = kv.real("initial.ratio", c.initial.ratio);
    c.initial.r_beta = q.r_beta;

    c.alpha = kv.real("run.alpha", c.alpha);
    c.epsilon = kv.real("run.epsilon", c.epsilon);
    c.iterations = kv.integer("run.iterations", c.iterations);

    c.output_dir = kv.str("output.dir", c.output_dir.string());
    c.snapshots = kv.flag("output.snapshots", c.snapshots);
    c.export_obj = kv.flag("export.obj", c.export_obj);
    c.export_vtk = kv.flag("export.vtk", c.export_vtk);
    const std::string drop = kv.str("export.drop", "4,3");
    if (std::sscanf(drop.c_str(), "%d,%d", &c.drop[0], &c.drop[1]) != 2)
        throw GateError("config-invalid", "export.drop = '" + drop + "' must be two comma-separated indices");

    if (const auto u = kv.unused(); !u.empty()) throw GateError("config-invalid", "unknown key " + u.front());
    if (c.n < 9) throw GateError("config-invalid", "grid.n ≥ 9 violated: lhs=" + std::to_string(c.n) + ", rhs=9");
    if (c.iterations < 0) throw GateError("config-invalid", "run.iterations must be ≥ 0");
    if (c.metric_preset != "flat" && c.metric_preset != "conformal")
        throw GateError("config-invalid", "metric.preset must be flat or conformal");
    if (c.immersion_preset != "flat-scaled")
        throw GateError("config-invalid", "immersion.preset must be flat-scaled");
    if (!(c.immersion_scale > 0.0)) throw GateError("config-invalid", "immersion.scale must be positive");
    Projection::dropping(c.drop[0], c.drop[1]);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(KeyValues::load(path)); }

RunInputs prepare_run(RunConfig& cfg) {
    const GridSpec spec = GridSpec::make(cfg.n);
    RunInputs in;
    if (!cfg.metric_file.empty()) {
        in.g = read_binary(cfg.metric_file);
        if (in.g.arity() != Arity::sym2 || in.g.spec().n != cfg.n)
            throw GateError("config-invalid", "metric.file must hold a sym2 field on the configured grid");
    } else if (cfg.metric_preset == "flat") {
        in.g = constant_sym(spec, {1.0, 0.0, 1.0});
    } else {
        const double c = cfg.metric_amplitude;
        in.g = Field::sample(spec, Arity::sym2, [c](double x1, double x2, double* o) {
            const double f = 1.0 + c * (x1 * x1 + x2 * x2);
            o[0] = f;
            o[1] = 0.0;
            o[2] = f;
        });
    }
    const double sc = cfg.immersion_scale;
    in.u_bar = Field::sample(spec, Arity::vec4, [sc](double x1, double x2, double* o) {
        o[0] = sc * x1;
        o[1] = sc * x2;
        o[2] = 0.0;
        o[3] = 0.0;
    });

    Schedule& q = cfg.schedule;
    if (!(q.g_norm > 0.0)) q.g_norm = sup_norm(in.g, std::min(static_cast<int>(q.r_beta), max_deriv()));
    if (!cfg.tau_given) {
        // τ̲ from the initial stage's pass count, measured on the decomposition it will use
        const Field H = defect(in.g, in.u_bar) - constant_sym(spec, H0() * q.delta(0));
        double emin = 1e300, emax = 0.0;
        for (std::size_t i = 0; i < H.nodes(); ++i) {
            const auto ev = SymMat2{H.comp(0)[i], H.comp(1)[i], H.comp(2)[i]}.eigenvalues();
            emin = std::min(emin, ev[0]);
            emax = std::max(emax, ev[1]);
        }
        if (!(emin > 0.0))
            throw GateError("not-short", "𝒟(g − δ₀H₀, ū) > 0 violated: min eigenvalue=" + std::to_string(emin));
        const PouResult pou = pou_decompose(H, emin, emax);
        q.tau = default_tau(static_cast<int>(pou.terms.size()), q.r_beta);
    }

    std::vector<std::string> v;
    StageParams first = cfg.stage;
    if (cfg.iterations > 0) {
        first.delta = q.delta(0);
        first.mu = q.mu(0);
        first.sigma = q.sigma(1);
        for (auto& s : parameter_violations(first)) v.push_back(s);
    }
    for (auto& s : alpha_violations(q, cfg.alpha)) v.push_back(s);
    if (cfg.iterations > 0) {
        const FeasibilityReport f = validate_schedule(q, cfg.iterations - 1, cfg.measured_C, cfg.sigma_floor);
        if (!f.feasible) v.push_back(f.first_failure);
    }
    if (!v.empty()) {
        if (cfg.stage.enforce_gates) throw GateError("assumption-violated", v.front());
        cfg.warnings.insert(cfg.warnings.end(), v.begin(), v.end());
    }
    return in;
}

RunOptions run_options(const RunConfig& cfg) {
    RunOptions o;
    o.alpha = cfg.alpha;
    o.epsilon = cfg.epsilon;
    o.n_iters = cfg.iterations;
    o.schedule = cfg.schedule;
    o.stage = cfg.stage;
    o.measured_C = cfg.measured_C;
    o.sigma_floor = cfg.sigma_floor;
    o.initial = cfg.initial;
    if (cfg.snapshots) o.snapshot_dir = cfg.output_dir / "snapshots";
    return o;
}

void write_manifest(const std::filesystem::path& path, const RunConfig& cfg, const RunResult& res) {
    nlohmann::json j = res.to_json();
    j.erase("metrics");
    const GridSpec spec = GridSpec::make(cfg.n);
    j["config"] = cfg.to_json();
    j["grid"] = {{"n", spec.n}, {"h", spec.h}, {"frequency_ceiling", frequency_ceiling(spec)}};
    j["seeds"] = nlohmann::json::array();  // the pipeline draws no random numbers
    const ScheduleTable t = schedule_table(cfg.schedule, cfg.iterations);
    j["schedule_table"] = {{"delta", t.delta}, {"mu", t.mu}, {"sigma", t.sigma}};
    auto os = open_out(path);
    os << j.dump(1) << '\n';
}

void write_metrics_csv(const std::filesystem::path& path, const RunResult& res) {
    auto os = open_out(path);
    os << "kind,n,k,step,delta,mu,sigma,frequency,defect_before,defect_after,defect_sup,defect_shifted,target,"
          "c1_increment,c0_proximity,u2,interpolation,holder,frame_drift,orthonormality,normality\n";
    for (const auto& m : res.metrics)
        os << "iterate," << m.n << ",,," << m.delta << ',' << m.mu << ',' << m.sigma << ",,,," << m.defect_sup << ','
           << m.defect_shifted << ',' << m.shifted_target << ',' << m.c1_increment << ',' << m.c0_proximity << ','
           << m.u2 << ',' << m.interpolation << ',' << m.holder << ",,,\n";
    for (std::size_t s = 0; s < res.traces.size(); ++s) {
        const int n = res.first_index + static_cast<int>(s);
        for (const auto& r : res.traces[s].inner)
            os << "inner," << n << ',' << r.k << ",," << r.delta_k << ',' << r.mu_k << ",,," << r.defect_in << ','
               << r.defect_out << ",,," << r.delta_next << ',' << r.c1_drift << ",,,,," << r.frame_drift << ",,\n";
        for (const auto& r : res.traces[s].rows)
            os << "corrugation," << n << ',' << r.k << ',' << r.step << ",,,," << r.frequency << ','
               << r.defect_before << ',' << r.defect_after << ",,,,,,,,," << r.frame_drift << ','
               << r.orthonormality << ',' << r.normality << '\n';
    }
}

Projection Projection::dropping(int a, int b) {
    Projection p;
    p.drop = {a, b};
    if (a < 1 || a > 4 || b < 1 || b > 4 || a == b)
        throw GateError("config-invalid", "projection must drop two distinct coordinates in 1..4");
    return p;
}

Projection Projection::orthographic(const std::array<std::array<double, 4>, 3>& m) {
    Projection p;
    p.use_matrix = true;
    p.matrix = m;
    return p;
}

Field defect_attribute(const Field& g, const Grad& du) {
    const Field D = defect(g, du);
    Field r(g.spec(), Arity::scalar);
    for (std::size_t i = 0; i < r.nodes(); ++i)
        r.comp(0)[i] = std::max({std::abs(D.comp(0)[i]), std::abs(D.comp(1)[i]), std::abs(D.comp(2)[i])});
    return r;
}

void export_obj(const Field& u, const Projection& proj, const std::vector<Attribute>& attrs,
                const std::filesystem::path& path) {
    check_projection(proj, u);
    check_attributes(u, attrs);
    const int n = u.spec().n;
    auto os = open_out(path);
    os << "# nkiso surface, " << n << "x" << n << " nodes";
    for (const auto& a : attrs) os << ", vt:" << a.first;
    os << '\n';
    for (std::size_t i = 0; i < u.nodes(); ++i) {
        const auto p = project(proj, u, i);
        os << "v " << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
    }
    const bool tex = !attrs.empty();
    if (tex)
        for (std::size_t i = 0; i < u.nodes(); ++i)
            os << "vt " << attrs[0].second.comp(0)[i] << ' '
               << (attrs.size() > 1 ? attrs[1].second.comp(0)[i] : 0.0) << '\n';
    auto idx = [n](int i, int j) { return static_cast<long>(j) * n + i + 1; };
    for (int j = 0; j + 1 < n; ++j)
        for (int i = 0; i + 1 < n; ++i) {
            const long q[4] = {idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)};
            os << 'f';
            for (long v : q) {
                os << ' ' << v;
                if (tex) os << '/' << v;
            }
            os << '\n';
        }
}

void export_vtk(const Field& u, const Projection& proj, const std::vector<Attribute>& attrs,
                const std::filesystem::path& path) {
    check_projection(proj, u);
    check_attributes(u, attrs);
    const int n = u.spec().n;
    auto os = open_out(path);
    os << "# vtk DataFile Version 3.0\nnkiso surface\nASCII\nDATASET STRUCTURED_GRID\n";
    os << "DIMENSIONS " << n << ' ' << n << " 1\nPOINTS " << u.nodes() << " double\n";
    for (std::size_t i = 0; i < u.nodes(); ++i) {
        const auto p = project(proj, u, i);
        os << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
    }
    if (attrs.empty()) return;
    os << "POINT_DATA " << u.nodes() << '\n';
    for (const auto& [name, f] : attrs) {
        os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (std::size_t i = 0; i < f.nodes(); ++i) os << f.comp(0)[i] << '\n';
    }
}

}  // namespace nkiso
