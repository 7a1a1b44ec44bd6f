#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace causal_gate::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one command line (argv[0] is the program name). Failures print one
/// line "error <Code>: <message>" to `err`; usage failures add the help text.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace causal_gate::cli
