#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace upr::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kTransportError = 3,
};

/// Entry point behind the `upr` binary; argv[0] is the program name.
int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace upr::cli
