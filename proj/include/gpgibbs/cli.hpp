#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gpgibbs {

inline constexpr const char* kVersion = "0.1.0";

/// Entry point behind the `gpgibbs` binary. argv[0] is the program name.
/// Returns 0 on success, 1 on numerical or diagnostic failure, 2 on usage or
/// configuration errors.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& argv);

}  // namespace gpgibbs
