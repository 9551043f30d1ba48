#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace loceq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (without the program name). Returns the
/// process exit code: 0 ok, 1 domain error or failed check, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count: LOCEQ_THREADS when set to a positive integer, otherwise
/// the hardware concurrency.
unsigned thread_count();

/// "4..9", "4,6,8" or "8" (mixed forms allowed: "4..6,9").
std::vector<int> parse_int_list(const std::string& text);

}  // namespace loceq::cli
