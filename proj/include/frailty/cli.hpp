#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "frailty/gbt.hpp"
#include "frailty/model.hpp"

namespace frailty {

struct BacktestConfig {
  std::string panel_path;
  std::string schema_path;
  std::string out_dir = ".";
  int first_test = 0;
  int last_test = 0;  // 0: the last period in the panel
  std::vector<ModelKind> models{ModelKind::linear_independent, ModelKind::linear_spatial,
                                ModelKind::linear_spacetime, ModelKind::boost_spacetime};
  int n_sims = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
  int nodes = 20;
  int ece_bins = 20;
  FitOptions fit;
  bool tune = true;           // tune the boosted model on inner-train / validation
  bool reuse_tuning = false;  // tune once (first window) and reuse
  TuningGrid grid;
  TreeTuning fixed_tuning;    // used when tune is false
  bool frailty_maps = true;
};

// Runs the expanding-window backtest and writes its CSV outputs into
// config.out_dir. Outputs are staged and moved into place only on success.
void run_backtest(const BacktestConfig& config);

// Writes text to path through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& text);

// Seed for a named sub-task, derived from the global seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace frailty
