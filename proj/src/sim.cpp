#include "causaltree/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "causaltree/rng.hpp"

namespace causaltree {

DesignSpec DesignSpec::design(int id) {
  DesignSpec d;
  d.id = id;
  switch (id) {
    case 1:
      d.k = 2;
      break;
    case 2:
      d.k = 10;
      break;
    case 3:
      d.k = 20;
      break;
    default:
      throw ValidationError("design id must be 1, 2 or 3");
  }
  return d;
}

double DesignSpec::eta(const double* x) const {
  switch (id) {
    case 1:
      return 0.5 * x[0] + x[1];
    case 2:
      return 0.5 * (x[0] + x[1]) + x[2] + x[3] + x[4] + x[5];
    case 3:
      return 0.5 * (x[0] + x[1] + x[2] + x[3]) + x[4] + x[5] + x[6] + x[7];
  }
  throw ValidationError("design id must be 1, 2 or 3");
}

double DesignSpec::kappa(const double* x) const {
  auto positive_part_sum = [&](int count) {
    double s = 0.0;
    for (int k = 0; k < count; ++k)
      if (x[k] > 0.0) s += x[k];
    return s;
  };
  switch (id) {
    case 1:
      return 0.5 * x[0];
    case 2:
      return positive_part_sum(2);
    case 3:
      return positive_part_sum(4);
  }
  throw ValidationError("design id must be 1, 2 or 3");
}

CausalDataset generate(const DesignSpec& design, std::size_t n, std::uint64_t seed) {
  auto eng = make_engine(seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, design.noise_sd);
  std::bernoulli_distribution treat(design.p);

  std::vector<double> x(n * design.k);
  for (double& v : x) v = std_normal(eng);
  std::vector<std::uint8_t> w(n);
  for (auto& v : w) v = treat(eng) ? 1 : 0;

  std::vector<double> y(n), cate(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.data() + i * design.k;
    cate[i] = design.kappa(xi);
    const double sign = w[i] ? 1.0 : -1.0;
    y[i] = design.eta(xi) + 0.5 * sign * cate[i] + noise(eng);
  }
  return CausalDataset(std::move(y), std::move(w), std::move(x), design.k, design.p,
                       {}, std::move(cate));
}

EstimatorSpec EstimatorSpec::parse(const std::string& name) {
  EstimatorSpec spec;
  spec.name = name;
  std::string fam = name, variant;
  const std::size_t dash = name.rfind('-');
  if (dash != std::string::npos) {
    fam = name.substr(0, dash);
    variant = name.substr(dash + 1);
  }
  if (fam == "ct") {
    spec.family = Family::CT;
  } else if (fam == "tot") {
    spec.family = Family::TOT;
    spec.folds = 10;
  } else if (fam == "fit" || fam == "f") {
    spec.family = Family::Fit;
  } else if (fam == "ts") {
    spec.family = Family::TS;
  } else {
    throw ValidationError("unknown estimator '" + name + "'");
  }
  if (variant == "h" || variant == "honest") {
    spec.honest = true;
  } else if (variant == "a" || variant == "adaptive" || variant.empty()) {
    spec.honest = false;
  } else {
    throw ValidationError("unknown estimator variant '" + name + "'");
  }
  return spec;
}

std::vector<EstimatorSpec> EstimatorSpec::all_eight() {
  std::vector<EstimatorSpec> out;
  for (const char* n : {"ct-a", "ct-h", "tot-a", "tot-h", "f-a", "f-h", "ts-a", "ts-h"})
    out.push_back(parse(n));
  return out;
}

namespace {

CriterionSpec criterion_for(const EstimatorSpec& est, double p, long n_est) {
  CriterionSpec spec;
  spec.family = est.family;
  // TOT builds the same trees in both variants; honesty only moves the
  // estimation sample.
  spec.honest = est.honest && est.family != Family::TOT;
  spec.mode = Mode::Treatment;
  spec.p = p;
  spec.n_est = n_est;
  return spec;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

// Join two datasets drawn from the same design into one sample.
CausalDataset concat(const CausalDataset& a, const CausalDataset& b) {
  std::vector<double> y(a.outcomes());
  y.insert(y.end(), b.outcomes().begin(), b.outcomes().end());
  std::vector<std::uint8_t> w(a.treatments());
  w.insert(w.end(), b.treatments().begin(), b.treatments().end());
  std::vector<double> x;
  x.reserve((a.size() + b.size()) * a.n_features());
  for (std::size_t i = 0; i < a.size(); ++i)
    x.insert(x.end(), a.row(i), a.row(i) + a.n_features());
  for (std::size_t i = 0; i < b.size(); ++i)
    x.insert(x.end(), b.row(i), b.row(i) + b.n_features());
  std::vector<double> cate;
  if (a.has_true_cate() && b.has_true_cate()) {
    for (std::size_t i = 0; i < a.size(); ++i) cate.push_back(a.true_cate(i));
    for (std::size_t i = 0; i < b.size(); ++i) cate.push_back(b.true_cate(i));
  }
  return CausalDataset(std::move(y), std::move(w), std::move(x), a.n_features(),
                       a.marginal_p(), {}, std::move(cate));
}

}  // namespace

ReplicationResult run_replication(const SimConfig& config, int replication) {
  const std::uint64_t rep_seed = derive_seed(config.seed, static_cast<std::uint64_t>(replication));
  const CausalDataset train =
      generate(config.design, config.n_train, derive_seed(rep_seed, 1));
  const CausalDataset est = generate(config.design, config.n_est, derive_seed(rep_seed, 2));
  const CausalDataset test =
      generate(config.design, config.n_test, derive_seed(rep_seed, 3));
  // One combined frame: the training block feeds tree construction, the
  // estimation block honest leaf estimation, and the whole frame the adaptive
  // union pipeline.
  const CausalDataset train_union = concat(train, est);
  std::vector<std::size_t> train_idx(config.n_train), est_idx(config.n_est);
  std::iota(train_idx.begin(), train_idx.end(), 0);
  std::iota(est_idx.begin(), est_idx.end(), config.n_train);
  const std::vector<std::size_t> union_idx = iota_indices(train_union.size());
  const std::vector<std::size_t> test_idx = iota_indices(test.size());

  ReplicationResult out;
  out.replication = replication;
  for (std::size_t e = 0; e < config.estimators.size(); ++e) {
    const EstimatorSpec& est_spec = config.estimators[e];
    EstimatorResult res;
    res.name = est_spec.name;

    // Train-sample pipeline: tree per the estimator's criteria, honest
    // estimation on the estimation sample.
    {
      const CriterionSpec spec = criterion_for(est_spec, train_union.marginal_p(),
                                               static_cast<long>(config.n_est));
      CvConfig cv{est_spec.folds, derive_seed(rep_seed, 100 + e)};
      const Tree tree = fit_pruned_tree(train_union, train_idx, spec, config.grow, cv);
      res.leaf_count = static_cast<double>(tree.n_leaves());
      const LeafEstimates estimates =
          estimate_leaves(tree, train_union, est_idx, config.ci_level);
      res.n_unavailable = static_cast<long>(estimates.unavailable.size());
      res.honest_eval = evaluate(test, test_idx, tree, estimates);
    }

    // Union pipeline for adaptive estimators: tree, cross-validation and leaf
    // estimates all on train+est.
    if (!est_spec.honest) {
      CriterionSpec spec =
          criterion_for(est_spec, train_union.marginal_p(),
                        static_cast<long>(train_union.size()));
      CvConfig cv{est_spec.folds, derive_seed(rep_seed, 200 + e)};
      const Tree tree = fit_pruned_tree(train_union, union_idx, spec, config.grow, cv);
      const LeafEstimates estimates =
          adaptive_estimate_leaves(tree, train_union, union_idx, config.ci_level);
      res.adaptive_eval = evaluate(test, test_idx, tree, estimates);
    }

    out.estimators.push_back(std::move(res));
  }
  return out;
}

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  if (v.empty()) return out;
  const double n = static_cast<double>(v.size());
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

}  // namespace

SimReport aggregate(const SimConfig& config,
                    const std::vector<ReplicationResult>& results) {
  SimReport report;
  report.config = config;

  // Index of the CT-H baseline and of each adaptive estimator's honest
  // counterpart, when present.
  const auto find_estimator = [&](const std::string& name) -> int {
    for (std::size_t e = 0; e < config.estimators.size(); ++e)
      if (config.estimators[e].name == name) return static_cast<int>(e);
    return -1;
  };
  const int baseline = find_estimator("ct-h");

  for (std::size_t e = 0; e < config.estimators.size(); ++e) {
    const EstimatorSpec& est = config.estimators[e];
    SimRow row;
    row.estimator = est.name;

    std::vector<double> leaves, mse_raw, mse_adj, mse_tot, cov, cov_leaf;
    std::vector<double> ratio, tot_ratio, a_cov, a_mse, a_over_h;
    int honest_counterpart = -1;
    if (!est.honest) {
      std::string base = est.name;
      const std::size_t dash = base.rfind('-');
      if (dash != std::string::npos) base = base.substr(0, dash);
      honest_counterpart = find_estimator(base + "-h");
    }

    for (const ReplicationResult& rep : results) {
      const EstimatorResult& r = rep.estimators[e];
      leaves.push_back(r.leaf_count);
      mse_raw.push_back(r.honest_eval.mse_tau_raw);
      mse_adj.push_back(r.honest_eval.mse_tau_infeasible);
      mse_tot.push_back(r.honest_eval.mse_tot);
      cov.push_back(r.honest_eval.coverage);
      cov_leaf.push_back(r.honest_eval.coverage_leaf);
      if (baseline >= 0) {
        const EvalResult& b = rep.estimators[static_cast<std::size_t>(baseline)].honest_eval;
        ratio.push_back(r.honest_eval.mse_tau_raw / b.mse_tau_raw);
        tot_ratio.push_back(r.honest_eval.mse_tot / b.mse_tot);
      }
      if (r.adaptive_eval) {
        a_cov.push_back(r.adaptive_eval->coverage);
        a_mse.push_back(r.adaptive_eval->mse_tau_raw);
        if (honest_counterpart >= 0) {
          const EvalResult& h =
              rep.estimators[static_cast<std::size_t>(honest_counterpart)].honest_eval;
          a_over_h.push_back(r.adaptive_eval->mse_tau_raw / h.mse_tau_raw);
        }
      }
    }

    const MeanSe m_leaves = mean_se(leaves);
    row.leaf_count_mean = m_leaves.mean;
    row.leaf_count_se = m_leaves.se;
    const MeanSe m_raw = mean_se(mse_raw);
    row.mse_tau_raw_mean = m_raw.mean;
    row.mse_tau_raw_se = m_raw.se;
    const MeanSe m_adj = mean_se(mse_adj);
    row.mse_tau_adj_mean = m_adj.mean;
    row.mse_tau_adj_se = m_adj.se;
    const MeanSe m_tot = mean_se(mse_tot);
    row.mse_tot_mean = m_tot.mean;
    row.mse_tot_se = m_tot.se;
    const MeanSe m_cov = mean_se(cov);
    row.coverage_mean = m_cov.mean;
    row.coverage_se = m_cov.se;
    row.coverage_leaf_mean = mean_se(cov_leaf).mean;
    if (!ratio.empty()) {
      const MeanSe m_ratio = mean_se(ratio);
      row.ratio_to_cth_mean = m_ratio.mean;
      row.ratio_to_cth_se = m_ratio.se;
      double base_mean = 0.0;
      for (const ReplicationResult& rep : results)
        base_mean += rep.estimators[static_cast<std::size_t>(baseline)].honest_eval.mse_tau_raw;
      base_mean /= static_cast<double>(results.size());
      row.ratio_of_means = row.mse_tau_raw_mean / base_mean;
      const MeanSe m_tot_ratio = mean_se(tot_ratio);
      row.tot_ratio_to_cth_mean = m_tot_ratio.mean;
      row.tot_ratio_to_cth_se = m_tot_ratio.se;
    }
    if (!a_cov.empty()) {
      row.has_adaptive = true;
      const MeanSe m_acov = mean_se(a_cov);
      row.adaptive_coverage_mean = m_acov.mean;
      row.adaptive_coverage_se = m_acov.se;
      row.adaptive_mse_raw_mean = mean_se(a_mse).mean;
      if (!a_over_h.empty()) {
        const MeanSe m_aoh = mean_se(a_over_h);
        row.adaptive_over_honest_mean = m_aoh.mean;
        row.adaptive_over_honest_se = m_aoh.se;
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

SimReport run_study(const SimConfig& config) {
  if (config.replications < 1) throw ValidationError("need at least one replication");
  std::vector<ReplicationResult> results(static_cast<std::size_t>(config.replications));
  std::vector<std::string> errors(static_cast<std::size_t>(config.replications));

  unsigned n_threads = config.threads > 0
                           ? static_cast<unsigned>(config.threads)
                           : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(config.replications));

  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= config.replications) break;
      try {
        results[static_cast<std::size_t>(r)] = run_replication(config, r);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(r)] = e.what();
      }
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::vector<ReplicationResult> ok;
  long failed = 0;
  for (std::size_t r = 0; r < results.size(); ++r) {
    if (errors[r].empty()) {
      ok.push_back(std::move(results[r]));
    } else {
      ++failed;
    }
  }
  if (ok.empty())
    throw NumericalError("every replication failed; first error: " + errors[0]);
  SimReport report = aggregate(config, ok);
  report.failed_replications = failed;
  return report;
}

// ---------------------------------------------------------------------------
// Report rendering.

std::string SimReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "estimator,design,n_train,n_est,replications,"
     << "leaves_mean,leaves_se,mse_tau_raw_mean,mse_tau_raw_se,"
     << "mse_tau_adj_mean,mse_tau_adj_se,mse_tot_mean,mse_tot_se,"
     << "coverage_mean,coverage_se,coverage_leaf_mean,"
     << "ratio_to_cth_mean,ratio_to_cth_se,ratio_of_means,"
     << "mse_tot_ratio_to_cth_mean,mse_tot_ratio_to_cth_se,"
     << "adaptive_coverage_mean,adaptive_coverage_se,adaptive_mse_raw_mean,"
     << "adaptive_over_honest_mean,adaptive_over_honest_se\n";
  for (const SimRow& r : rows) {
    os << r.estimator << "," << config.design.id << "," << config.n_train << ","
       << config.n_est << "," << config.replications << "," << r.leaf_count_mean << ","
       << r.leaf_count_se << "," << r.mse_tau_raw_mean << "," << r.mse_tau_raw_se << ","
       << r.mse_tau_adj_mean << "," << r.mse_tau_adj_se << "," << r.mse_tot_mean << ","
       << r.mse_tot_se << "," << r.coverage_mean << "," << r.coverage_se << ","
       << r.coverage_leaf_mean << "," << r.ratio_to_cth_mean << "," << r.ratio_to_cth_se
       << "," << r.ratio_of_means << "," << r.tot_ratio_to_cth_mean << ","
       << r.tot_ratio_to_cth_se << ",";
    if (r.has_adaptive) {
      os << r.adaptive_coverage_mean << "," << r.adaptive_coverage_se << ","
         << r.adaptive_mse_raw_mean << "," << r.adaptive_over_honest_mean << ","
         << r.adaptive_over_honest_se;
    } else {
      os << ",,,,";
    }
    os << "\n";
  }
  return os.str();
}

std::string SimReport::to_text() const {
  std::ostringstream os;
  os << std::fixed;
  os << "Simulation study: design " << config.design.id << ", n_train=" << config.n_train
     << ", n_est=" << config.n_est << ", n_test=" << config.n_test
     << ", replications=" << config.replications << ", seed=" << config.seed << "\n";
  if (failed_replications > 0)
    os << "  (" << failed_replications << " replications failed and were dropped)\n";
  os << "\n";

  auto header = [&](const std::string& title) {
    os << title << "\n";
    os << std::setw(10) << "estimator" << std::setw(12) << "value" << std::setw(12)
       << "mc se" << "\n";
  };

  header("Number of leaves (train-sample trees)");
  for (const SimRow& r : rows)
    os << std::setw(10) << r.estimator << std::setw(12) << std::setprecision(2)
       << r.leaf_count_mean << std::setw(12) << std::setprecision(3) << r.leaf_count_se
       << "\n";
  os << "\n";

  header("Infeasible MSE relative to ct-h (mean of per-replication ratios)");
  for (const SimRow& r : rows)
    os << std::setw(10) << r.estimator << std::setw(12) << std::setprecision(3)
       << r.ratio_to_cth_mean << std::setw(12) << r.ratio_to_cth_se << "\n";
  os << "\n";

  header("Infeasible MSE levels (train tree, honest estimates)");
  for (const SimRow& r : rows)
    os << std::setw(10) << r.estimator << std::setw(12) << std::setprecision(4)
       << r.mse_tau_raw_mean << std::setw(12) << r.mse_tau_raw_se << "\n";
  os << "\n";

  header("Surrogate MSE relative to ct-h (transformed-outcome surrogate)");
  for (const SimRow& r : rows)
    os << std::setw(10) << r.estimator << std::setw(12) << std::setprecision(4)
       << r.tot_ratio_to_cth_mean << std::setw(12) << r.tot_ratio_to_cth_se << "\n";
  os << "\n";

  header("MSE ratio: adaptive (union sample) / honest counterpart");
  for (const SimRow& r : rows) {
    if (!r.has_adaptive) continue;
    os << std::setw(10) << r.estimator << std::setw(12) << std::setprecision(3)
       << r.adaptive_over_honest_mean << std::setw(12) << r.adaptive_over_honest_se
       << "\n";
  }
  os << "\n";

  header("Coverage of confidence intervals - adaptive (union sample)");
  for (const SimRow& r : rows) {
    if (!r.has_adaptive) continue;
    os << std::setw(10) << r.estimator << std::setw(12) << std::setprecision(3)
       << r.adaptive_coverage_mean << std::setw(12) << r.adaptive_coverage_se << "\n";
  }
  os << "\n";

  header("Coverage of confidence intervals - honest estimation");
  for (const SimRow& r : rows)
    os << std::setw(10) << r.estimator << std::setw(12) << std::setprecision(3)
       << r.coverage_mean << std::setw(12) << r.coverage_se << "\n";
  return os.str();
}

}  // namespace causaltree
