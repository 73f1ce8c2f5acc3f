#pragma once

namespace fqr {

// Entry point of the command-line tool: fqr fit | tune | bootstrap | simulate
// | replay.  Returns the process exit code: 0 success, 2 input or usage
// error, 3 convergence failure.
int cli_main(int argc, const char* const* argv);

}  // namespace fqr
