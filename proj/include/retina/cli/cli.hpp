#pragma once

#include <iosfwd>

namespace retina::cli {

inline constexpr unsigned kDefaultSeed = 7;

/// Entry point of the `retina` tool. Returns 0 on success, 2 on a usage
/// error (message and usage on `err`), 1 on a runtime failure. Every
/// successful run writes one `RESULT <subcommand> <json>` line to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace retina::cli
