#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pbc::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kDegenerate = 3, kIo = 4 };

/// Runs one command line (without the program name). Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pbc::cli
