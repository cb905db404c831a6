#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qnode::cli {

/// Runs one subcommand. Returns 0 on success; on failure writes a single
/// line `error: <Category>: <message>` to `err` and returns nonzero.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qnode::cli
