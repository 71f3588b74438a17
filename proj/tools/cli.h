#ifndef DGNET_TOOLS_CLI_H_
#define DGNET_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace dgnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dgnet::cli

#endif  // DGNET_TOOLS_CLI_H_
