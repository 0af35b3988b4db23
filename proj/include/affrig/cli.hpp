#pragma once

// Command-line front end.  Commands: analyze, rank-map, holonomy, transport,
// classify, r2-example, zoo list.  Returns one of the ExitCode values.

namespace affrig {

int cli_main(int argc, const char* const* argv);

}  // namespace affrig
