#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "schedlab/nn.hpp"

namespace schedlab {

/// Entry point of the `schedlab` executable; returns the process exit code.
/// 0 success, 1 a failed check (oracle suites), 2 usage or configuration
/// error, 3 training diverged, 4 runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// --out, else $SCHEDLAB_OUT, else the working directory.
std::filesystem::path resolve_out_dir(const std::string& flag);

void write_params_file(const std::filesystem::path& path, const MlpParams& net);
MlpParams read_params_file(const std::filesystem::path& path, OutputMap output);

}  // namespace schedlab
