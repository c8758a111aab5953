#pragma once

namespace trajdiff {

// Full command surface (train / eval / sample / ablate / plot). Exposed as a
// function so tests can drive commands in-process. Exit codes: 0 success,
// 1 usage error, 2 data error, 3 numeric failure.
int cli_main(int argc, const char* const* argv);

}  // namespace trajdiff
