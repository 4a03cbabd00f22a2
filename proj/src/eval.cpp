#include "causaltree/eval.hpp"

#include <cmath>
#include <map>

namespace causaltree {

EvalResult evaluate(const CausalDataset& test,
                    const std::vector<std::size_t>& test_indices, const Tree& tree,
                    const LeafEstimates& estimates) {
  if (!test.has_true_cate())
    throw ValidationError("evaluation requires true treatment effects on the test sample");
  if (test_indices.empty()) throw ValidationError("empty test sample");

  // Leaf-level estimands: mean true effect over the test units in each leaf.
  std::map<NodeId, std::pair<double, long>> leaf_truth;
  std::vector<NodeId> routed(test_indices.size());
  for (std::size_t j = 0; j < test_indices.size(); ++j) {
    const std::size_t i = test_indices[j];
    routed[j] = tree.apply(test.row(i));
    auto& acc = leaf_truth[routed[j]];
    acc.first += test.true_cate(i);
    acc.second += 1;
  }
  for (auto& [leaf, acc] : leaf_truth) acc.first /= static_cast<double>(acc.second);

  const double p = test.marginal_p();
  EvalResult out;
  double sq_err = 0.0, tau_sq = 0.0, tot_err = 0.0;
  long covered_units = 0;
  std::map<NodeId, bool> leaf_covered;
  for (std::size_t j = 0; j < test_indices.size(); ++j) {
    const std::size_t i = test_indices[j];
    const auto it = estimates.by_leaf.find(routed[j]);
    if (it == estimates.by_leaf.end()) {
      ++out.n_skipped;
      continue;
    }
    const LeafEstimate& est = it->second;
    const double tau_i = test.true_cate(i);
    const double err = tau_i - est.tau_hat;
    sq_err += err * err;
    tau_sq += tau_i * tau_i;
    const double ystar = transformed_outcome(test.outcome(i), test.treated(i), p);
    tot_err += (ystar - est.tau_hat) * (ystar - est.tau_hat);

    const double target = leaf_truth[routed[j]].first;
    const bool covers = est.ci_lo <= target && target <= est.ci_hi;
    covered_units += covers ? 1 : 0;
    leaf_covered[routed[j]] = covers;
    ++out.n_test;
  }
  if (out.n_test == 0) throw ValidationError("no test units with available estimates");

  const double n = static_cast<double>(out.n_test);
  out.mse_tau_raw = sq_err / n;
  out.tau_sq_mean = tau_sq / n;
  out.mse_tau_infeasible = out.mse_tau_raw - out.tau_sq_mean;
  out.mse_tot = tot_err / n;
  out.coverage = static_cast<double>(covered_units) / n;
  long covered_leaves = 0;
  for (const auto& [leaf, covers] : leaf_covered) covered_leaves += covers ? 1 : 0;
  out.coverage_leaf =
      static_cast<double>(covered_leaves) / static_cast<double>(leaf_covered.size());
  return out;
}

double mse_tau_infeasible(const CausalDataset& test,
                          const std::vector<std::size_t>& test_indices,
                          const Tree& tree, const LeafEstimates& estimates) {
  return evaluate(test, test_indices, tree, estimates).mse_tau_infeasible;
}

double mse_tot(const CausalDataset& test, const std::vector<std::size_t>& test_indices,
               const Tree& tree, const LeafEstimates& estimates) {
  // The surrogate needs no true effects; reuse the single pass when they are
  // present, otherwise compute directly.
  if (test.has_true_cate())
    return evaluate(test, test_indices, tree, estimates).mse_tot;
  if (test_indices.empty()) throw ValidationError("empty test sample");
  const double p = test.marginal_p();
  double err = 0.0;
  long n = 0;
  for (std::size_t i : test_indices) {
    const auto it = estimates.by_leaf.find(tree.apply(test.row(i)));
    if (it == estimates.by_leaf.end()) continue;
    const double ystar = transformed_outcome(test.outcome(i), test.treated(i), p);
    err += (ystar - it->second.tau_hat) * (ystar - it->second.tau_hat);
    ++n;
  }
  if (n == 0) throw ValidationError("no test units with available estimates");
  return err / static_cast<double>(n);
}

double coverage(const CausalDataset& test, const std::vector<std::size_t>& test_indices,
                const Tree& tree, const LeafEstimates& estimates) {
  return evaluate(test, test_indices, tree, estimates).coverage;
}

}  // namespace causaltree
