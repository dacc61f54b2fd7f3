#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedpop/config.hpp"

namespace fedpop::cli {

// Subcommand bodies; they throw (invalid_argument / numerical_error /
// io_error) and the entry point maps exceptions to exit codes
// 1 / 2 / 3. Artifacts land under the config's out.dir.
void cmd_ingest(const ExperimentConfig& config);
void cmd_train(const ExperimentConfig& config);
void cmd_predict(const ExperimentConfig& config);
void cmd_cache_sweep(const ExperimentConfig& config, bool plot);
void cmd_comm_bench(const ExperimentConfig& config,
                    const std::vector<std::uint32_t>& level_grid);

int run(int argc, const char* const* argv);

}  // namespace fedpop::cli
