#pragma once

#include <string>
#include <vector>

namespace t2s {

// Runs one subcommand. Exit codes: 0 success, 1 domain error, 2 usage error.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, char** argv);

} // namespace t2s
