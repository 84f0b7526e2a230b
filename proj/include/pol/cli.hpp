#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "pol/check.hpp"

namespace pol::cli {

enum ExitCode : int {
  kOk = 0,
  kValidation = 1,
  kRuntime = 2,
  kCheckFailed = 3,
};

/// Entry point of the `pol` tool. `args` excludes the program name.
/// Results go to `out` line by line; diagnostics go to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Prints one PASS/FAIL line per criterion and returns kOk or kCheckFailed.
int report_check(const CheckReport& report, std::ostream& out);

}  // namespace pol::cli
