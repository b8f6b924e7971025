#pragma once

#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "nkiso/frames.hpp"
#include "nkiso/grid.hpp"

namespace nkiso {

struct SuiteResult {
    std::string name;
    double residual = 0.0;   // worst measured value against `tolerance`
    double tolerance = 0.0;
    bool pass = false;
    std::vector<std::string> failures;
    nlohmann::json detail;

    nlohmann::json to_json() const;
};

struct VerifyOptions {
    int n = 257;
    double lambda = 8 * std::numbers::pi;
    int samples = 4;
    double s3_scale = 1.0;  // fault hook for the Kuiper suite
    unsigned long long seed = 7;
};

// Smooth curved immersion with its frame, a positive amplitude and a small w.
struct StepInputs {
    Field u;
    Grad du;
    NormalFrame E;
    Field a, w;
    Grad dw;
};
StepInputs random_step_inputs(const GridSpec& spec, std::mt19937_64& rng);

// Checks the resolution gate first ("grid-underresolved" as GateError),
// then runs profiles, decomposition, nash, kuiper, ibp, kallen and frames.
std::vector<SuiteResult> run_verification(const VerifyOptions& opts);

}  // namespace nkiso
