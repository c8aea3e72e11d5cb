#pragma once

// Command-line front door shared by the rdrobin tool and its tests.

#include <iosfwd>
#include <string>
#include <vector>

namespace rdrobin::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3 };

/// Runs one subcommand. `args` excludes the program name. Returns 0 on
/// success, 2 on validation errors (bad flags, bad config, bad f) and 3 on
/// numerical failures.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rdrobin::cli
