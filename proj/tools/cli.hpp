#pragma once

#include <iosfwd>

namespace slim {

/// Exit codes: 0 success, 1 runtime failure, 2 bad arguments or config.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace slim
