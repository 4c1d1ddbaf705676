// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace hetfl {

/// Full command-line entry point, callable in-process so tests can drive it.
/// Returns the process exit status. Failures print one `error: ...` line to
/// the diagnostic stream.
int run_cli(const std::vector<std::string>& args);

}  // namespace hetfl
