#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace skelact {

/// Runs the command-line interface on `args` (program name excluded).
/// Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skelact
