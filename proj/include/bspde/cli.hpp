#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bspde/config.hpp"
#include "bspde/report.hpp"

namespace bspde {

/// Overrides [output] dir when set.
inline constexpr const char* kOutputDirEnv = "SPDE_LAB_OUTPUT_DIR";

struct ExperimentInfo {
    std::string name;
    std::string description;
    std::string defaults;
};

const std::vector<ExperimentInfo>& experiment_catalog();

/// One line per experiment: name, description, default parameters.
void list_experiments(std::ostream& out);

/// Dispatches the configured experiment. backward_solve also writes the
/// solution fields to the output directory.
ExperimentReport run_experiment(const RunConfig& config);

/// Loads, validates and runs a config; writes <dir>/<experiment>.csv and
/// <dir>/<experiment>_params.csv and prints a summary. Returns 0 if every
/// asserted check passes, 1 on a failed check or solver failure, 2 on a
/// configuration error.
int run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);

/// Subcommands: run <config>, list.
int cli_main(int argc, char** argv);

}  // namespace bspde
