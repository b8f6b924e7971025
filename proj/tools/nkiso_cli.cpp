#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nkiso/corrugation.hpp"
#include "nkiso/driver.hpp"
#include "nkiso/error.hpp"
#include "nkiso/io.hpp"
#include "nkiso/stage.hpp"
#include "nkiso/verify.hpp"

namespace fs = std::filesystem;
using namespace nkiso;

namespace {

constexpr const char* kOutputEnv = "NKISO_OUTPUT_DIR";

// --out beats the environment, which beats the config.
fs::path output_dir(const std::string& flag, const fs::path& fallback) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return fallback;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw Error("io-error", "cannot write " + path.string());
    os << j.dump(1) << '\n';
}

Projection parse_projection(const std::string& drop, const std::vector<double>& matrix) {
    if (!matrix.empty()) {
        if (matrix.size() != 12) throw GateError("config-invalid", "--matrix takes 12 numbers (3 rows of 4)");
        std::array<std::array<double, 4>, 3> m{};
        for (int i = 0; i < 3; ++i)
            for (int c = 0; c < 4; ++c) m[i][c] = matrix[static_cast<std::size_t>(4 * i + c)];
        return Projection::orthographic(m);
    }
    int a = 0, b = 0;
    char comma = 0;
    std::istringstream is(drop);
    if (!(is >> a >> comma >> b) || comma != ',') throw GateError("config-invalid", "--drop expects a,b");
    return Projection::dropping(a, b);
}

void export_state(const ImmersionState& s, const Field& g, const Projection& proj, const fs::path& obj,
                  const fs::path& vtk) {
    std::vector<Attribute> attrs;
    if (!g.empty()) attrs.push_back({"defect", defect_attribute(g, s.du)});
    if (!obj.empty()) export_obj(s.u, proj, attrs, obj);
    if (!vtk.empty()) export_vtk(s.u, proj, attrs, vtk);
}

int cmd_verify(const VerifyOptions& vo, const std::string& out_flag) {
    const auto results = run_verification(vo);
    nlohmann::json j = nlohmann::json::array();
    std::vector<std::string> failed;
    std::cout << std::left << std::setw(16) << "suite" << std::setw(14) << "residual" << std::setw(12) << "tolerance"
              << "status\n";
    for (const auto& r : results) {
        std::cout << std::left << std::setw(16) << r.name << std::setw(14) << std::setprecision(3) << std::scientific
                  << r.residual << std::setw(12) << r.tolerance << std::defaultfloat << (r.pass ? "PASS" : "FAIL")
                  << '\n';
        for (const auto& f : r.failures) std::cout << "    " << f << '\n';
        if (!r.pass) failed.push_back(r.name);
        j.push_back(r.to_json());
    }
    const fs::path dir = output_dir(out_flag, "");
    if (!dir.empty()) write_json(dir / "verify.json", {{"options", {{"n", vo.n}, {"lambda", vo.lambda},
                                                                    {"samples", vo.samples}, {"s3_scale", vo.s3_scale}}},
                                                       {"suites", j}});
    if (failed.empty()) {
        std::cout << "all suites passed\n";
        return 0;
    }
    std::cout << "failed suites:";
    for (const auto& f : failed) std::cout << ' ' << f;
    std::cout << '\n';
    return 1;
}

int cmd_run(const std::string& config, const std::string& resume, const std::string& out_flag) {
    RunConfig cfg = load_config(config);
    cfg.output_dir = output_dir(out_flag, cfg.output_dir);
    const RunInputs in = prepare_run(cfg);
    for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
    const RunOptions opts = run_options(cfg);
    Checkpoint cp;
    if (!resume.empty()) cp = load_snapshot(resume);
    const RunResult res = run(in.g, in.u_bar, opts, resume.empty() ? nullptr : &cp);
    fs::create_directories(cfg.output_dir);
    write_manifest(cfg.output_dir / "manifest.json", cfg, res);
    write_metrics_csv(cfg.output_dir / "metrics.csv", res);
    if (cfg.export_obj || cfg.export_vtk)
        export_state(res.iterates.back(), in.g, Projection::dropping(cfg.drop[0], cfg.drop[1]),
                     cfg.export_obj ? cfg.output_dir / "surface.obj" : fs::path{},
                     cfg.export_vtk ? cfg.output_dir / "surface.vtk" : fs::path{});
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "status: " << res.status << (res.note.empty() ? "" : " (" + res.note + ")") << '\n';
    std::cout << std::setprecision(6);
    for (const auto& m : res.metrics)
        std::cout << "n=" << m.n << " delta=" << m.delta << " defect=" << m.defect_sup
                  << " shifted=" << m.defect_shifted << " target=" << m.shifted_target << " c0=" << m.c0_proximity
                  << '\n';
    std::cout << "convergence: " << res.convergence.status << '\n';
    std::cout << "outputs in " << cfg.output_dir.string() << '\n';
    return 0;
}

int cmd_stage(const std::string& config, const std::string& snapshot, const std::string& out_flag) {
    RunConfig cfg = load_config(config);
    cfg.output_dir = output_dir(out_flag, cfg.output_dir);
    const RunInputs in = prepare_run(cfg);
    const Checkpoint cp = load_snapshot(snapshot);
    StageTrace trace;
    ImmersionState next = stage(in.g, cp.state, cfg.stage, &trace);
    const StageSchedule sch = stage_schedule(cfg.stage);
    next.delta = sch.delta.back();
    next.mu = sch.mu.back();
    fs::create_directories(cfg.output_dir);
    trace.write_csv(cfg.output_dir / "stage_trace.csv");
    write_json(cfg.output_dir / "stage_trace.json", {{"params", cfg.stage.to_json()}, {"trace", trace.to_json()}});
    save_snapshot(cfg.output_dir / "stage_snapshot", cp.index + 1, next, cp.metrics);
    for (const auto& w : trace.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "defect in " << trace.defect_in << ", out " << trace.defect_out << " (δ_K = " << sch.delta.back()
              << ")\n";
    return 0;
}

int cmd_export(const std::string& snapshot, const std::string& config, const std::string& drop,
               const std::vector<double>& matrix, const std::string& obj, const std::string& vtk) {
    if (obj.empty() && vtk.empty()) throw GateError("config-invalid", "nothing to export: pass --obj and/or --vtk");
    const Projection proj = parse_projection(drop, matrix);
    const Checkpoint cp = load_snapshot(snapshot);
    Field g;
    if (!config.empty()) {
        RunConfig cfg = load_config(config);
        if (cfg.n != cp.state.u.spec().n) throw GateError("config-invalid", "config grid does not match the snapshot");
        cfg.stage.enforce_gates = false;  // only the metric is needed here
        g = prepare_run(cfg).g;
    }
    export_state(cp.state, g, proj, obj, vtk);
    return 0;
}

int cmd_validate(const std::string& config, int horizon) {
    RunConfig cfg = load_config(config);
    const bool enforce = cfg.stage.enforce_gates;
    cfg.stage.enforce_gates = false;
    prepare_run(cfg);
    const int h = horizon >= 0 ? horizon : std::max(cfg.iterations - 1, 0);
    const FeasibilityReport rep = validate_schedule(cfg.schedule, h, cfg.measured_C, cfg.sigma_floor);
    const ScheduleTable t = schedule_table(cfg.schedule, h + 1);
    std::cout << std::setprecision(10);
    for (int n = 0; n <= h + 1; ++n)
        std::cout << "n=" << n << " delta=" << t.delta[n] << " mu=" << t.mu[n]
                  << (n > 0 ? " sigma=" + std::to_string(t.sigma[n]) : "") << '\n';
    for (const auto& c : rep.checks)
        if (!c.ok) std::cout << c.message() << '\n';
    for (const auto& w : cfg.warnings) std::cout << w << '\n';
    const bool ok = rep.feasible && cfg.warnings.empty();
    std::cout << (ok ? "feasible" : "infeasible") << '\n';
    if (!ok && enforce) return 2;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Convex-integration isometric immersion engine"};
    app.require_subcommand(1);

    VerifyOptions vo;
    bool fault = false;
    std::string out;
    auto* verify = app.add_subcommand("verify", "Run the identity suites");
    verify->add_option("--n", vo.n, "grid nodes per axis");
    verify->add_option("--lambda", vo.lambda, "step frequency");
    verify->add_option("--samples", vo.samples, "random inputs per step suite");
    verify->add_flag("--fault-s3", fault, "scale the Kuiper S3 term by 1.01 (harness self-test)");
    verify->add_option("--out", out, "directory for verify.json");

    std::string config, resume;
    auto* runc = app.add_subcommand("run", "Initial stage plus the outer iteration");
    runc->add_option("config", config, "key=value config file")->required();
    runc->add_option("--resume", resume, "snapshot directory to continue from");
    runc->add_option("--out", out, "output directory");

    std::string snapshot;
    auto* stagec = app.add_subcommand("stage", "One Stage on a snapshot, parameters from stage.*");
    stagec->add_option("config", config, "key=value config file")->required();
    stagec->add_option("--snapshot", snapshot, "snapshot directory")->required();
    stagec->add_option("--out", out, "output directory");

    std::string drop = "4,3", obj, vtk;
    std::vector<double> matrix;
    auto* exportc = app.add_subcommand("export-mesh", "Write OBJ/VTK meshes of a snapshot");
    exportc->add_option("--snapshot", snapshot, "snapshot directory")->required();
    exportc->add_option("--config", config, "config providing the metric for the defect attribute");
    exportc->add_option("--drop", drop, "two coordinates to drop, e.g. 4,3");
    exportc->add_option("--matrix", matrix, "3x4 orthographic projection, row-major");
    exportc->add_option("--obj", obj, "OBJ output path");
    exportc->add_option("--vtk", vtk, "VTK output path");

    int horizon = -1;
    auto* validate = app.add_subcommand("validate-schedule", "Evaluate the schedule feasibility inequalities");
    validate->add_option("config", config, "key=value config file")->required();
    validate->add_option("--horizon", horizon, "last n to check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*verify) {
            if (fault) vo.s3_scale = 1.01;
            return cmd_verify(vo, out);
        }
        if (*runc) return cmd_run(config, resume, out);
        if (*stagec) return cmd_stage(config, snapshot, out);
        if (*exportc) return cmd_export(snapshot, config, drop, matrix, obj, vtk);
        if (*validate) return cmd_validate(config, horizon);
    } catch (const GateError& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error [" << e.code() << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
