#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace attnablate::cli {

// Entry point of the `attnablate` command. Returns the process exit code:
// 0 on success, 1 on runtime failure, 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace attnablate::cli
