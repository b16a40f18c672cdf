#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace betarobust::cli {

enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kInput = 2,
  kConvergence = 3,
  kNumerical = 4,
};

/// Runs the command line tool. Results go to files named by --out or to
/// `out`; messages go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace betarobust::cli
