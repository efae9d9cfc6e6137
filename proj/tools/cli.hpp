#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace phireg::cli {

/// Runs one command line. Returns 0 on success, 1 on bad input, 2 on a
/// numerical failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace phireg::cli
