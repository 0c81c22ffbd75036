#pragma once

#include "cfdg/checkpoint.hpp"
#include "cfdg/config.hpp"
#include "cfdg/diagnostics.hpp"

namespace cfdg {

// Output layout: <out_dir>/<exp_name>/<stage>/<seed>/ where stage is
// "offline" or one of the fine-tuning modes.
std::string run_dir(const ExperimentConfig& cfg, const std::string& stage, long seed);

void save_curve_csv(const std::vector<CurveRow>& rows, const std::string& path);
std::vector<CurveRow> load_curve_csv(const std::string& path);

// Subcommand bodies, shared by the CLI and the test suites. Deterministic
// given the config: reruns produce byte-identical files.
void cmd_gen_data(const ExperimentConfig& cfg);
void run_offline_for_seed(const ExperimentConfig& cfg, long seed);
void cmd_train_offline(const ExperimentConfig& cfg);
void run_finetune_for_seed(const ExperimentConfig& cfg, const std::string& mode, long seed);
void cmd_finetune(const ExperimentConfig& cfg, const std::string& mode);
void cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_path);

}  // namespace cfdg
