#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mensp {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitBackend = 4,
  kExitPartial = 5,
};

/// Entry point of the `mensp` tool: score, finetune, evaluate.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mensp
