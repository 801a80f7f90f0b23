#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace coge::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,          // I/O, malformed input, numerical failure
    kUsage = 2,            // bad flags, unknown method or manifest key
    kThresholdFailed = 3,  // accuracy floor or report threshold not met
};

/// 0 quiet, 1 progress (default), 2 debug. Read from COGE_VERBOSITY.
int verbosity_from_env();

/// Entry point of the `coge` tool; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coge::cli
