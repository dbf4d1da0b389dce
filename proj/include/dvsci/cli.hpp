#ifndef DVSCI_CLI_HPP
#define DVSCI_CLI_HPP

#include <string>
#include <vector>

namespace dvsci::cli {

// Runs one command. Exit codes: 0 success, 2 validation failure (bad flags,
// malformed inputs, geometry inconsistencies), 3 runtime numeric failure.
int run(const std::vector<std::string>& args);

}  // namespace dvsci::cli

#endif
