#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hai::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kCheckFailed = 4 };

// Runs one invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hai::cli
