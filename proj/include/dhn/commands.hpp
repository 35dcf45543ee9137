#ifndef DHN_COMMANDS_HPP
#define DHN_COMMANDS_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace dhn {

/// Parses argv-style arguments and runs one of the train / eval / predict /
/// synth subcommands. Returns the process exit code: 0 success, 1 usage
/// error, 2 data error, 3 numerical divergence. Used by both the binary's
/// main() and the test suite.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dhn

#endif
