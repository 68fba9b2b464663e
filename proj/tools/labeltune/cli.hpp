#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace labeltune::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitDivergence = 3,
};

// Runs one command. args excludes the program name. Documents go to `out`,
// logs and error messages to `err`.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace labeltune::cli
