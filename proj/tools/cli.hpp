#pragma once

#include <iosfwd>

namespace cova {

/// Exit codes: 0 success, 1 internal failure, 2 configuration or usage error,
/// 3 data error.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace cova
