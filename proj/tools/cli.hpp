#ifndef TILT_CLI_HPP
#define TILT_CLI_HPP

#include <string>
#include <vector>

namespace tilt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitViolation = 2;

// args excludes the program name.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

std::string version();

}  // namespace tilt::cli

#endif
