#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace spamgan {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,  // bad flags, unknown or invalid config keys
  kExitMissingFile = 3,
  kExitNonFinite = 4,
  kExitCheckpoint = 5,
  kExitDataFormat = 6,
};

/// Runs one command line (args[0] is the program name). Results go to `out`,
/// the one-line failure cause to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spamgan
