#pragma once

#include <ostream>
#include <span>
#include <string>

namespace idsel {

// Exit codes: 0 success, 1 runtime failure, 2 invalid arguments or input.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

// Runs the command line tool; args excludes the program name.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace idsel
