#pragma once

#include <string>
#include <vector>

namespace laviter {

// Full command-line entry point, callable in-process for tests. `args`
// excludes the program name. Returns the process exit code; errors are
// printed, never thrown.
int run_cli(const std::vector<std::string>& args);

}  // namespace laviter
