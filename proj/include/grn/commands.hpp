#pragma once

#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "grn/graph.hpp"
#include "grn/run_config.hpp"

namespace grn {

enum ExitCode : int {
    ExitOk = 0,
    ExitInternal = 1,
    ExitInputResolution = 2,
    ExitDataConflict = 3,
    ExitAllRunsFailed = 4,
};

/// Maps a library exception onto the CLI exit code contract.
int exit_code_for(const std::exception& e);

/// Runs `command`, reporting any exception on `err` and translating it into an exit code.
int run_guarded(const std::function<int()>& command, std::ostream& err);

struct Sample {
    std::string name;
    std::filesystem::path dir;
    RegulatoryNetwork network;
    std::optional<ExpressionMatrix> expression; ///< loaded only for expression features
};

/**
 * Sample networks selected by the config: either the explicit `network`
 * file, or the subdirectories of `dataset` whose names match a `samples`
 * glob and the dropout variant (`-50` / `-70` suffix, none for neither).
 * Sorted by name. Throws ResolutionError when nothing matches.
 */
std::vector<Sample> resolve_samples(const RunConfig& config);

/// Writes the config echo (`run_config.ini`) into `dir`.
void write_echo(const std::filesystem::path& dir, const RunConfig& config);

int cmd_aggregate(const RunConfig& config, std::ostream& log);
int cmd_metrics(const RunConfig& config, std::ostream& log);
int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_evaluate(const RunConfig& config, std::ostream& log);
int cmd_importance(const RunConfig& config, std::ostream& log);
int cmd_gradcheck(const RunConfig& config, std::ostream& log);
int cmd_export(const RunConfig& config, std::ostream& log);

/// `runs/<sample>/seed_<seed>` under the output directory.
std::filesystem::path run_directory(const RunConfig& config, const std::string& sample, std::uint64_t seed);

} // namespace grn
