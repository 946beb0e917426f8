#pragma once

#include <iosfwd>

namespace pdra::cli {

/// Runs one `pdra` subcommand. Results go to --out paths and `out`; failures
/// print {"error": <kind>, "message": ...} on `err` and return nonzero
/// (2 for usage errors, 1 otherwise).
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pdra::cli
