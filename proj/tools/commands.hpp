#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cystseg::cli {

/// Process exit statuses.
enum ExitCode : int { kOk = 0, kIoError = 1, kUsageError = 2, kDataError = 3 };

/// Runs the command line `args` (args[0] is the program name) and returns the
/// exit status. Diagnostics go to `err`, results to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cystseg::cli
