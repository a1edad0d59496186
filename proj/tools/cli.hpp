#pragma once

#include <iosfwd>

namespace evtap::cli {

/// Runs the `evtap` command line against the given streams. Returns the
/// process exit status: 0 on success, 1 on configuration, input or output
/// errors, 2 on usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evtap::cli
