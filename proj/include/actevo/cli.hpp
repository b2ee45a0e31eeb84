#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace actevo::cli {

// Exit codes: 0 success, 1 verification failure, 2 config error,
// 3 resume mismatch.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitResume = 3;

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);
int run(int argc, char** argv);

}  // namespace actevo::cli
