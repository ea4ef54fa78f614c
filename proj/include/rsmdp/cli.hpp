#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rsmdp::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kNumeric = 3, kGuard = 4 };

/// Runs one command line (without the program name); the report goes to `out` unless --out is given.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of `text`.
std::string sha256_hex(const std::string& text);

/// SHA-256 of the problem document re-serialized with sorted keys and no whitespace.
std::string problem_digest(const std::string& json_text);

}  // namespace rsmdp::cli
