#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace causaltree::cli {

// Exit codes: 0 success, 2 validation error, 3 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

struct FitOptions {
  std::string input_csv;
  std::string est_csv;  // optional separate estimation sample
  std::string outcome_column = "y";
  std::string treatment_column = "w";
  std::vector<std::string> covariate_columns;  // empty = all remaining
  std::string propensity_column;
  std::string estimator = "ct-h";
  long n_min = 25;
  long bucket_size = 4;
  int folds = 0;      // 0 = estimator default (5; 10 for tot)
  double level = 0.9;
  double train_fraction = 0.5;
  std::uint64_t seed = 1;
  bool weighted = false;
  double trim_low = 0.05;
  double trim_high = 0.95;
  std::string out_prefix = "fit";
};

struct PredictOptions {
  std::string tree_file;
  std::string estimates_file;
  std::string input_csv;
  std::vector<std::string> covariate_columns;  // empty = feature names from tree
  std::string output_csv = "predictions.csv";
};

struct SimulateOptions {
  std::string config_file;
};

// Programmatic entry points used by main() and exercised directly in tests.
void cmd_fit(const FitOptions& options);
void cmd_predict(const PredictOptions& options);
void cmd_simulate(const SimulateOptions& options);

// Full argv interface; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace causaltree::cli
