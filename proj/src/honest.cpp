#include "causaltree/honest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

namespace causaltree {

void WeightingConfig::validate() const {
  if (!(trim_low >= 0.0 && trim_low < trim_high && trim_high <= 1.0))
    throw ValidationError("trim bounds must satisfy 0 <= low < high <= 1");
}

double normal_quantile_two_sided(double level) {
  if (!(level > 0.0 && level < 1.0))
    throw ValidationError("confidence level must lie in (0,1)");
  const boost::math::normal_distribution<double> std_normal;
  return boost::math::quantile(std_normal, 0.5 + level / 2.0);
}

namespace {

struct ArmSample {
  std::vector<double> y;
  std::vector<double> w;  // raw weights (1 when unweighted)
};

LeafEstimates estimate_impl(const Tree& tree, const CausalDataset& data,
                            const std::vector<std::size_t>& indices, double level,
                            const WeightingConfig* weighting, EstimateSource source) {
  if (weighting) {
    weighting->validate();
    if (!data.has_propensity())
      throw ValidationError("weighted estimation requires a propensity column");
  }
  const double z = normal_quantile_two_sided(level);

  std::map<NodeId, ArmSample> treat, control;
  for (std::size_t i : indices) {
    if (weighting) {
      const double e = data.propensity(i);
      if (e < weighting->trim_low || e > weighting->trim_high) continue;
    }
    const NodeId leaf = tree.apply(data.row(i));
    ArmSample& arm = data.treated(i) ? treat[leaf] : control[leaf];
    arm.y.push_back(data.outcome(i));
    if (weighting) {
      const double e = data.propensity(i);
      arm.w.push_back(data.treated(i) ? 1.0 / e : 1.0 / (1.0 - e));
    } else {
      arm.w.push_back(1.0);
    }
  }

  // Hajek mean and the weighted-mean variance sum w~^2 (y - mean)^2 per arm.
  auto arm_mean_var = [&](const ArmSample& arm) {
    double wsum = 0.0;
    for (double w : arm.w) wsum += w;
    double mean = 0.0;
    for (std::size_t j = 0; j < arm.y.size(); ++j) mean += (arm.w[j] / wsum) * arm.y[j];
    double var = 0.0;
    for (std::size_t j = 0; j < arm.y.size(); ++j) {
      const double wt = arm.w[j] / wsum;
      var += wt * wt * (arm.y[j] - mean) * (arm.y[j] - mean);
    }
    return std::pair<double, double>{mean, var};
  };
  // Unweighted path keeps the plain unbiased-variance standard error.
  auto plain_mean_var = [&](const ArmSample& arm) {
    const double n = static_cast<double>(arm.y.size());
    double mean = 0.0;
    for (double y : arm.y) mean += y;
    mean /= n;
    double ss = 0.0;
    for (double y : arm.y) ss += (y - mean) * (y - mean);
    return std::pair<double, double>{mean, ss / (n - 1.0) / n};
  };

  LeafEstimates out;
  for (NodeId leaf : tree.leaf_ids()) {
    const auto ti = treat.find(leaf);
    const auto ci = control.find(leaf);
    const long nt = ti == treat.end() ? 0 : static_cast<long>(ti->second.y.size());
    const long nc = ci == control.end() ? 0 : static_cast<long>(ci->second.y.size());
    if (nt < 2 || nc < 2) {
      out.unavailable.push_back({leaf, nt, nc});
      continue;
    }
    const auto [mt, vt] =
        weighting ? arm_mean_var(ti->second) : plain_mean_var(ti->second);
    const auto [mc, vc] =
        weighting ? arm_mean_var(ci->second) : plain_mean_var(ci->second);

    LeafEstimate est;
    est.tau_hat = mt - mc;
    est.se = std::sqrt(vt + vc);
    est.ci_lo = est.tau_hat - z * est.se;
    est.ci_hi = est.tau_hat + z * est.se;
    est.level = level;
    est.n_treat = nt;
    est.n_control = nc;
    est.source = source;
    out.by_leaf.emplace(leaf, est);
  }
  return out;
}

}  // namespace

LeafEstimates estimate_leaves(const Tree& tree, const CausalDataset& data,
                              const std::vector<std::size_t>& est_indices, double level,
                              const WeightingConfig* weighting) {
  return estimate_impl(tree, data, est_indices, level, weighting,
                       EstimateSource::Honest);
}

LeafEstimates adaptive_estimate_leaves(const Tree& tree, const CausalDataset& data,
                                       const std::vector<std::size_t>& all_indices,
                                       double level, const WeightingConfig* weighting) {
  return estimate_impl(tree, data, all_indices, level, weighting,
                       EstimateSource::Adaptive);
}

LeafEstimate predict(const Tree& tree, const LeafEstimates& estimates,
                     const std::vector<double>& x) {
  const NodeId leaf = tree.apply(x);
  const auto it = estimates.by_leaf.find(leaf);
  if (it == estimates.by_leaf.end())
    throw ValidationError("no estimate available for leaf " + std::to_string(leaf));
  return it->second;
}

std::string estimates_to_csv(const Tree& tree, const LeafEstimates& estimates,
                             const std::vector<std::string>& feature_names) {
  std::ostringstream os;
  os.precision(17);
  os << "leaf,region,tau_hat,se,ci_lo,ci_hi,level,n_treat,n_control,source\n";
  for (NodeId leaf : tree.leaf_ids()) {
    const auto it = estimates.by_leaf.find(leaf);
    if (it == estimates.by_leaf.end()) continue;
    const LeafEstimate& e = it->second;
    std::string region = tree.describe_region(leaf, feature_names);
    std::replace(region.begin(), region.end(), ',', ';');
    os << leaf << "," << region << "," << e.tau_hat << "," << e.se << "," << e.ci_lo
       << "," << e.ci_hi << "," << e.level << "," << e.n_treat << "," << e.n_control
       << "," << (e.source == EstimateSource::Honest ? "honest" : "adaptive") << "\n";
  }
  return os.str();
}

LeafEstimates estimates_from_csv(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty estimates table");

  LeafEstimates out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 10) throw ValidationError("malformed estimates row: " + line);

    LeafEstimate e;
    const NodeId leaf = std::stoi(cells[0]);
    e.tau_hat = std::stod(cells[2]);
    e.se = std::stod(cells[3]);
    e.ci_lo = std::stod(cells[4]);
    e.ci_hi = std::stod(cells[5]);
    e.level = std::stod(cells[6]);
    e.n_treat = std::stol(cells[7]);
    e.n_control = std::stol(cells[8]);
    e.source = cells[9] == "adaptive" ? EstimateSource::Adaptive : EstimateSource::Honest;
    out.by_leaf.emplace(leaf, e);
  }
  return out;
}

}  // namespace causaltree
