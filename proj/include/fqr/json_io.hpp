#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "fqr/inference.hpp"
#include "fqr/solver.hpp"
#include "fqr/tune.hpp"

namespace fqr {

inline constexpr const char* kToolVersion = "0.1.0";

nlohmann::json solver_config_to_json(const SolverConfig& config);
SolverConfig solver_config_from_json(const nlohmann::json& j);

nlohmann::json fit_result_to_json(const FitResult& fit);

nlohmann::json bootstrap_summary_to_json(const BootstrapSummary& summary);

// Run manifest: the command, the fully resolved configuration, the seed, and
// input-file fingerprints.  Embedded in every artifact so a run can be
// replayed bit-for-bit within one build.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    nlohmann::json input_hashes;  // {path: fnv1a hex}

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
    std::string compact() const;  // single-line form for CSV comment headers
};

}  // namespace fqr
