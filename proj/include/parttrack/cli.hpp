#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace parttrack {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
  kExitTracking = 5,
  kExitCheckFailed = 6,
};

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "PARTTRACK_OUT";

/// Entry point of the parttrack command; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace parttrack
