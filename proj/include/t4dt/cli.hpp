#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace t4dt {

/// Runs the t4dt command line with `args` (without the program name) and
/// returns the process exit code: 0 ok, 1 validation, 2 range, 3 I/O, 4 resource.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace t4dt
