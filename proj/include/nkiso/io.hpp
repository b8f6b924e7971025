#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nkiso/driver.hpp"
#include "nkiso/grid.hpp"
#include "nkiso/stage.hpp"

namespace nkiso {

// Flat "key = value" text. '#' starts a comment, blank lines are ignored,
// sections are dotted key prefixes (grid.n, stage.N, schedule.a, ...).
class KeyValues {
public:
    static KeyValues parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValues load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string str(const std::string& key, const std::string& fallback) const;
    double real(const std::string& key, double fallback) const;
    int integer(const std::string& key, int fallback) const;
    bool flag(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& values() const { return values_; }
    // Keys never read through the accessors above.
    std::vector<std::string> unused() const;

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
    mutable std::map<std::string, bool> read_;
};

struct RunConfig {
    int n = 257;
    std::string metric_preset = "flat";  // flat | conformal
    double metric_amplitude = 0.1;
    std::filesystem::path metric_file;   // binary sym2 field, overrides the preset
    std::string immersion_preset = "flat-scaled";
    double immersion_scale = 0.5;

    StageParams stage;  // stage.delta/mu/sigma feed the single-stage command
    Schedule schedule;
    bool tau_given = false;
    double measured_C = 1.0;
    double sigma_floor = 1.0;
    InitialStageOptions initial;

    double alpha = 0.01;
    double epsilon = 0.5;
    int iterations = 1;

    std::filesystem::path output_dir = "nkiso-out";
    bool snapshots = false;
    bool export_obj = false, export_vtk = false;
    std::array<int, 2> drop = {4, 3};  // coordinates removed for mesh export, 1-based

    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

// Unknown keys and malformed values raise GateError("config-invalid").
RunConfig parse_config(const KeyValues& kv);
RunConfig load_config(const std::filesystem::path& path);

struct RunInputs {
    Field g, u_bar;
};

// Builds g and ū, fills the measured schedule quantities (‖g‖_{r,β}, τ when not
// configured) and re-validates every stage/driver gate. With enforce_gates the
// first violation raises GateError; otherwise it lands in cfg.warnings.
RunInputs prepare_run(RunConfig& cfg);

RunOptions run_options(const RunConfig& cfg);

void write_manifest(const std::filesystem::path& path, const RunConfig& cfg, const RunResult& res);
// One row per iterate, per inner step and per corrugation, 17 significant digits.
void write_metrics_csv(const std::filesystem::path& path, const RunResult& res);

// Either drop two coordinates or apply a 3×4 matrix.
struct Projection {
    bool use_matrix = false;
    std::array<int, 2> drop = {4, 3};
    std::array<std::array<double, 4>, 3> matrix{};

    static Projection dropping(int a, int b);
    static Projection orthographic(const std::array<std::array<double, 4>, 3>& m);
};

using Attribute = std::pair<std::string, Field>;

// Node-wise max-entry |𝒟(g, u)|.
Field defect_attribute(const Field& g, const Grad& du);

// Positions plus the first attribute as a texture coordinate; quads.
void export_obj(const Field& u, const Projection& proj, const std::vector<Attribute>& attrs,
                const std::filesystem::path& path);
// Legacy ASCII structured grid with point-data arrays.
void export_vtk(const Field& u, const Projection& proj, const std::vector<Attribute>& attrs,
                const std::filesystem::path& path);

}  // namespace nkiso
