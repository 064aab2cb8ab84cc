#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tinyssd {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitCheckFailed = 3,
};

/// Entry point behind the `tinyssd` executable. Machine output goes to `out`,
/// diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tinyssd
