#pragma once

#include <map>
#include <string>
#include <vector>

#include "causaltree/tree.hpp"

namespace causaltree {

enum class EstimateSource { Honest, Adaptive };

// Leaf-level treatment effect with a normal-approximation confidence
// interval. `level` is the two-sided confidence level the interval was built
// at.
struct LeafEstimate {
  double tau_hat = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.9;
  long n_treat = 0;
  long n_control = 0;
  EstimateSource source = EstimateSource::Honest;
};

// A leaf whose estimation-sample support was too thin to estimate.
struct UnsupportedLeaf {
  NodeId leaf = -1;
  long n_treat = 0;
  long n_control = 0;
};

struct LeafEstimates {
  std::map<NodeId, LeafEstimate> by_leaf;
  std::vector<UnsupportedLeaf> unavailable;

  bool available(NodeId leaf) const { return by_leaf.count(leaf) != 0; }
};

// Inverse-propensity weighting controls for observational data. Units with
// propensity outside [trim_low, trim_high] are dropped; weights are
// renormalized to sum to one within each leaf-by-arm cell.
struct WeightingConfig {
  double trim_low = 0.05;
  double trim_high = 0.95;
  bool renormalize = true;

  void validate() const;
};

// Two-sided normal critical value for the given confidence level.
double normal_quantile_two_sided(double level);

// Leaf estimates from the estimation sample: tau is the difference of arm
// means, se^2 = S2_treat/n_treat + S2_control/n_control, interval tau +- z se.
// With weighting, arms are Hajek-weighted by 1/e(x) and 1/(1-e(x)) and the
// variance follows the weighted-mean formula. Leaves with fewer than 2 units
// in either arm are reported as unavailable.
LeafEstimates estimate_leaves(const Tree& tree, const CausalDataset& data,
                              const std::vector<std::size_t>& est_indices,
                              double level,
                              const WeightingConfig* weighting = nullptr);

// Conventional adaptive practice: same computation on the union of training
// and estimation samples, marked EstimateSource::Adaptive.
LeafEstimates adaptive_estimate_leaves(const Tree& tree, const CausalDataset& data,
                                       const std::vector<std::size_t>& all_indices,
                                       double level,
                                       const WeightingConfig* weighting = nullptr);

// Route x and return the routed leaf's estimate; throws if that leaf has no
// estimate.
LeafEstimate predict(const Tree& tree, const LeafEstimates& estimates,
                     const std::vector<double>& x);

// Estimate table as CSV text: leaf id, region, tau_hat, se, interval, counts.
std::string estimates_to_csv(const Tree& tree, const LeafEstimates& estimates,
                             const std::vector<std::string>& feature_names = {});
LeafEstimates estimates_from_csv(const std::string& csv_text);

}  // namespace causaltree
