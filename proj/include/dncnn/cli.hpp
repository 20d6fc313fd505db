#pragma once

namespace dncnn {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitCheckFailed = 3,
};

/// Entry point of the `dncnn` tool: prepare-data, train, add-noise, denoise,
/// evaluate, colormap, gradcheck.
int run_cli(int argc, const char* const* argv);

} // namespace dncnn
