#ifndef FINEVAL_CLI_HPP
#define FINEVAL_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace fineval::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;  // validation or analysis error
inline constexpr int kUsage = 2;

// args excludes the program name. Report JSON goes to `out` (or --out), any
// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fineval::cli

#endif  // FINEVAL_CLI_HPP
