#pragma once

#include <iosfwd>

namespace koopgrip {

/// Exit codes: 0 ok, 1 usage, 2 input/format/config, 3 numeric failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace koopgrip
