#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dualdp::cli {

/// Runs one subcommand. args excludes the program name. Returns 0 on
/// success, 1 on user error, 2 on numerical failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dualdp::cli
