#pragma once

#include <iosfwd>

#include "stylefuse/error.hpp"

namespace stylefuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitDependency = 3;

int exit_code_for(Errc code) noexcept;

// Parses argv and runs the selected subcommand. Normal output goes to `out`,
// diagnostics to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stylefuse::cli
