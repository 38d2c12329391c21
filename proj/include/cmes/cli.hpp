#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cmes {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;

// Default directory for generated files when no explicit path is given.
inline constexpr const char* kOutputDirEnv = "CMES_OUTPUT_DIR";

// Entry point of the command-line front end; args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cmes
