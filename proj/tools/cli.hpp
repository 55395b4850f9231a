#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace cobar::cli {

/// Users above which CoBaR refuses to cluster unless --max-users is given.
inline constexpr std::size_t kDefaultUserCeiling = 5000;

/// Runs the command line `args` (without the program name). Returns the
/// process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cobar::cli
