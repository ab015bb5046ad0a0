#pragma once

#include <cstdint>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "lpreform/datagen.hpp"
#include "lpreform/training.hpp"

namespace lpreform::cli {

/// Everything a subcommand may depend on. Serialized with one section per
/// module ("datagen", "simplex_env", "reformulate", "training"), so an echoed
/// config can be fed back through --config.
struct ExperimentConfig {
    std::string profile = "desk";
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    std::size_t k_shots = 3;
    ScenarioSpec datagen;
    TrainConfig training;  // training.reform carries clustering, metric and solver settings

    nlohmann::json to_json() const;
};

/// Defaults for "desk" or "paper"; throws ConfigError otherwise.
ExperimentConfig profile_defaults(const std::string& profile);

/// Overlays the keys present in `j`. Unknown keys are a ConfigError.
void apply_json(ExperimentConfig& cfg, const nlohmann::json& j);

/// Runs the command line and returns the exit code: 0 on success, 1 for
/// usage errors, 2 for library errors, 3 for anything else. Errors are
/// written to `err` as one JSON object.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lpreform::cli
