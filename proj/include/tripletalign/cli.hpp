#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tripletalign::cli {

// Stable exit codes.
enum ExitCode : int {
  kSuccess = 0,
  kValidationFailure = 1,
  kConfigError = 2,
  kRuntimeFailure = 3,
};

// Entry point of the `triplet-align` executable. `args` excludes the program
// name. Regular output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Environment variable holding the provider credential.
inline constexpr const char* kApiKeyEnv = "TRIPLET_ALIGN_API_KEY";

// File-name-safe form of a model name.
std::string file_stem(const std::string& name);

}  // namespace tripletalign::cli
