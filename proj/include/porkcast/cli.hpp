#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace porkcast {

/// Exit codes of the command line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitRuntime = 3 };

/**
 * Runs one `porkcast` invocation. `args` excludes the program name.
 *
 * Subcommands: ingest, analyze, build-dataset, tune, train, evaluate,
 * forecast, serve, cycle. Normal output goes to `out`, diagnostics and usage
 * text to `err`. Identical arguments and inputs give identical `out`.
 */
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace porkcast
