#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "causaltree/eval.hpp"
#include "causaltree/prune.hpp"

namespace causaltree {

// One of the three synthetic designs: y(w) = eta(x) + (2w-1)/2 * kappa(x) + eps,
// covariates standard normal, eps ~ N(0, noise_sd^2), treated share p.
struct DesignSpec {
  int id = 1;
  std::size_t k = 2;
  double noise_sd = 0.1;
  double p = 0.5;

  static DesignSpec design(int id);
  double eta(const double* x) const;
  double kappa(const double* x) const;
};

CausalDataset generate(const DesignSpec& design, std::size_t n, std::uint64_t seed);

// A named estimator in the study: the criterion plus its fold count.
struct EstimatorSpec {
  std::string name;  // e.g. "ct-h"
  Family family = Family::CT;
  bool honest = false;
  int folds = 5;

  static EstimatorSpec parse(const std::string& name);
  static std::vector<EstimatorSpec> all_eight();
};

struct SimConfig {
  DesignSpec design;
  std::size_t n_train = 500;
  std::size_t n_est = 500;
  std::size_t n_test = 6000;
  int replications = 200;
  std::vector<EstimatorSpec> estimators = EstimatorSpec::all_eight();
  std::uint64_t seed = 1;
  GrowParams grow;
  double ci_level = 0.9;
  int threads = 0;  // 0 = hardware concurrency
};

// Per-replication, per-estimator outcomes. The train-sample pipeline (tree
// built on the training sample with the estimator's own criteria, leaves
// estimated honestly on the estimation sample) feeds the leaf-count and
// MSE panels; adaptive estimators additionally run a union pipeline (tree and
// leaf estimates both from train+est) for the coverage and honest-vs-adaptive
// comparisons.
struct EstimatorResult {
  std::string name;
  double leaf_count = 0.0;
  EvalResult honest_eval;                  // train tree, est-sample estimates
  std::optional<EvalResult> adaptive_eval; // union tree, union estimates (-a only)
  long n_unavailable = 0;
};

struct ReplicationResult {
  int replication = 0;
  std::vector<EstimatorResult> estimators;
};

ReplicationResult run_replication(const SimConfig& config, int replication);

// One aggregated row of the report.
struct SimRow {
  std::string estimator;
  double leaf_count_mean = 0.0, leaf_count_se = 0.0;
  double mse_tau_raw_mean = 0.0, mse_tau_raw_se = 0.0;
  double mse_tau_adj_mean = 0.0, mse_tau_adj_se = 0.0;
  double mse_tot_mean = 0.0, mse_tot_se = 0.0;
  double coverage_mean = 0.0, coverage_se = 0.0;
  double coverage_leaf_mean = 0.0;
  // Ratios to the CT-H baseline (mean over replications of the per-replication
  // ratio, and the ratio of the means).
  double ratio_to_cth_mean = 0.0, ratio_to_cth_se = 0.0, ratio_of_means = 0.0;
  double tot_ratio_to_cth_mean = 0.0, tot_ratio_to_cth_se = 0.0;
  // Adaptive pipeline statistics (present for -a estimators).
  bool has_adaptive = false;
  double adaptive_coverage_mean = 0.0, adaptive_coverage_se = 0.0;
  double adaptive_mse_raw_mean = 0.0;
  // mean over replications of MSE(adaptive, union) / MSE(honest counterpart).
  double adaptive_over_honest_mean = 0.0, adaptive_over_honest_se = 0.0;
};

struct SimReport {
  SimConfig config;
  std::vector<SimRow> rows;
  long failed_replications = 0;

  std::string to_csv() const;
  std::string to_text() const;
};

SimReport aggregate(const SimConfig& config,
                    const std::vector<ReplicationResult>& results);

// Runs all replications (in parallel when threads != 1) and aggregates.
SimReport run_study(const SimConfig& config);

}  // namespace causaltree
