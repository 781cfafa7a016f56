#ifndef CODIS_PIPELINE_HPP
#define CODIS_PIPELINE_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "codis/config.hpp"
#include "codis/fcn.hpp"
#include "codis/props.hpp"
#include "codis/types.hpp"

namespace codis::pipeline {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// exit codes: 0 ok, 2 config, 3 data, 4 convergence budget
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitBudget = 4;

struct RunOptions {
  std::string config_path;
  std::string out_dir;
  bool has_seed = false;
  std::uint64_t seed = 0;
  int workers = 0;  // 0: hardware default
};

// Dispatches one CLI subcommand; throws ConfigError/DataError/BudgetError.
void run_command(const std::string& subcommand, const RunOptions& opts);

// run_command wrapped into an exit code with the message on stderr.
int run_command_exit_code(const std::string& subcommand, const RunOptions& opts);

// ---- reusable pieces (also exercised directly by tests) ----

struct EvalCounts {
  std::array<std::array<long, 4>, 4> confusion{};          // [true-1][pred-1]
  std::array<std::array<long, 4>, 4> confusion_refined{};
  double accuracy = 0.0;
  double accuracy_refined = 0.0;
  long total_true = 0;
  long total_pred = 0;
  long total_pred_refined = 0;
};

// classify every signal, with and without peak-count refinement
EvalCounts evaluate_model(const fcn::FcnModel& model, const std::vector<LabeledSignal>& signals,
                          int workers);

// noise level for refinement/peak extraction: std of the leading samples
double estimate_signal_noise(const Waveform& x);

// calibration from the single-event signals of a labeled dataset
props::Calibration calibration_from_dataset(const std::vector<LabeledSignal>& signals);

int resolve_workers(int requested);

}  // namespace codis::pipeline

#endif
