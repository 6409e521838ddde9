#pragma once

#include <string>
#include <vector>

#include "roomeq/baselines.hpp"
#include "roomeq/metrics.hpp"

namespace roomeq {

/// Command-line entry point; args exclude the program name.
/// Exit codes: 0 success, 1 domain/runtime failure, 2 usage error.
int run_cli(const std::vector<std::string>& args);

/// FIR tap file IO ("taps <n>" header, one tap per line).
void write_fir_file(const std::string& path, const FirEqualizer& fir);
FirEqualizer read_fir_file(const std::string& path);

}  // namespace roomeq
