#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cconn {

// Runs the command line `args` (args[0] is the program name) and returns the
// process exit code: 0 success, 2 usage/config/IO, 3 data, 4 numerical.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cconn
