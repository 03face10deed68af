#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ekt::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kConfigInvalid = 2,
    kEndpointFailure = 3,
    kInvalidInput = 4,
};

/// Entry point shared by the `ekt` binary and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ekt::cli
