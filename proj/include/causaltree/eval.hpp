#pragma once

#include "causaltree/honest.hpp"
#include "causaltree/tree.hpp"

namespace causaltree {

// Test-sample metrics for one fitted tree plus leaf estimates. The adjusted
// MSE subtracts the (estimator-independent) mean of tau_i^2 so criteria can
// be compared without observing unit-level effects; the raw version adds it
// back. Units routed to leaves without an estimate are excluded and counted.
struct EvalResult {
  double mse_tau_infeasible = 0.0;  // mean((tau_i - tau_hat_i)^2 - tau_i^2)
  double mse_tau_raw = 0.0;         // mean((tau_i - tau_hat_i)^2)
  double tau_sq_mean = 0.0;         // mean(tau_i^2) over the evaluated units
  double mse_tot = 0.0;             // mean((y*_i - tau_hat_i)^2)
  double coverage = 0.0;            // unit-weighted CI coverage of tau(leaf)
  double coverage_leaf = 0.0;       // leaf-weighted secondary statistic
  long n_test = 0;                  // evaluated test units
  long n_skipped = 0;               // test units without a leaf estimate
};

// Adjusted infeasible MSE of the treatment effect on a test sample with known
// true effects.
double mse_tau_infeasible(const CausalDataset& test,
                          const std::vector<std::size_t>& test_indices,
                          const Tree& tree, const LeafEstimates& estimates);

// Feasible noisy surrogate built from the transformed outcome.
double mse_tot(const CausalDataset& test, const std::vector<std::size_t>& test_indices,
               const Tree& tree, const LeafEstimates& estimates);

// Fraction of test units whose routed leaf interval covers the leaf-level
// estimand tau(leaf) = mean of the true effect over test units in the leaf.
double coverage(const CausalDataset& test, const std::vector<std::size_t>& test_indices,
                const Tree& tree, const LeafEstimates& estimates);

// All of the above in one pass over the test sample.
EvalResult evaluate(const CausalDataset& test,
                    const std::vector<std::size_t>& test_indices, const Tree& tree,
                    const LeafEstimates& estimates);

}  // namespace causaltree
