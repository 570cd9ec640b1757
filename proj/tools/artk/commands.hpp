#pragma once

#include <string>
#include <vector>

namespace artk::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

// Full command line without the program name. Output and diagnostics go to
// the given streams so tests can drive the CLI in-process.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace artk::cli
