#pragma once

#include <string>
#include <vector>

namespace fedsim {

/// Entry point behind the `fedsim` binary. Subcommands:
///   run <config>    one experiment, report files under --out
///   sweep <config>  the config's sweep grid, one cell directory per point
///   oracle <config> brute-force cross-checks on random small instances
/// Returns the process exit code; failures print a diagnostic to stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace fedsim
