#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace protrag::cli {

/// Runs the command line `args` (program name first). Returns the exit status:
/// 0 on success, 1 on runtime failure, 2 on usage or configuration errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace protrag::cli
