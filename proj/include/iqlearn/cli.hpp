#pragma once

namespace iqlearn {

// Entry point behind the iqlearn binary; exposed for tests.
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
int cli_run(int argc, const char* const* argv);

}  // namespace iqlearn
