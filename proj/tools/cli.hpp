#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace maskenc::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kFormat = 3,  // malformed file or I/O failure
  kNumerical = 4,
  kGeometry = 5,  // file does not fit the model or mask
};

/// Parses `args` (program name first) and runs one subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace maskenc::cli
