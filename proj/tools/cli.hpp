#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace seqtag::cli {

/// Runs the command line `args` (without the program name). Returns the exit
/// code: 0 on success, 1 for invalid arguments or configuration, 2 for IO and
/// runtime failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seqtag::cli
