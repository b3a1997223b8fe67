#pragma once
// The fitodx command line. Kept apart from main() so tests can drive the
// subcommands in-process with their own streams.

#include <iosfwd>

namespace fitodx::cli {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kLintErrors = 1;
inline constexpr int kTooLarge = 1;
inline constexpr int kInputError = 2;
inline constexpr int kNoMatch = 3;
inline constexpr int kMissingAnswer = 4;
}  // namespace exit_code

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace fitodx::cli
