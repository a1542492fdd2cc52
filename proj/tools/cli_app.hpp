#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bilimit::cli {

enum ExitCode : int { Success = 0, ValidationError = 2, SelectionError = 3 };

/// Entry point shared by the executable and the tests; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bilimit::cli
