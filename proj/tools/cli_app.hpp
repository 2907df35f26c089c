#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace flow360::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitMalformedInput = 3,
    kExitNumerical = 4,
};

/// Runs the command line (without the program name). Records go to `out`;
/// logs and the one-line JSON error record go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flow360::cli
