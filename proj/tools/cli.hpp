#pragma once

#include <ostream>

namespace rrm::cli {

/// Runs one subcommand. Exit codes: 0 success, 1 invalid usage, config or
/// input, 2 numeric contract violation. Errors are written to `err` as a
/// single JSON object.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rrm::cli
