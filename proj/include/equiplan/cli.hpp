#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace equiplan {

/// Runs the `equiplan` command line. Returns 0 on success, 1 on invalid
/// input or usage, 2 on internal errors. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace equiplan
