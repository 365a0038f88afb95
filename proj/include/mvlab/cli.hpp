#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mvlab {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitBlowUp = 2,
  kExitCertificationFailed = 3,
};

/// Runs `mvlab <args...>` (args exclude the program name). Messages go to
/// `out` and diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mvlab
