#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace elicit::cli {

// Exit codes: 0 success, 2 invalid input, 1 solver or runtime failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace elicit::cli
