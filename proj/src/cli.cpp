#include "causaltree/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "causaltree/honest.hpp"
#include "causaltree/sim.hpp"

namespace causaltree::cli {

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

void cmd_fit(const FitOptions& options) {
  CsvSchema schema;
  schema.outcome_column = options.outcome_column;
  schema.treatment_column = options.treatment_column;
  schema.covariate_columns = options.covariate_columns;
  schema.propensity_column = options.propensity_column;
  if (options.weighted && options.propensity_column.empty())
    throw ValidationError("--weighted requires --propensity-col");

  const EstimatorSpec est_spec = EstimatorSpec::parse(options.estimator);
  GrowParams params;
  params.n_min = options.n_min;
  params.bucket_size = options.bucket_size;
  const int folds = options.folds > 0 ? options.folds : est_spec.folds;

  // Honest fits need a training/estimation separation: either a second file
  // or a seeded split of the input.
  LoadedCsv loaded = load_csv(options.input_csv, schema);
  std::vector<std::size_t> train_idx, est_idx;
  CausalDataset data = std::move(loaded.data);
  if (est_spec.honest && !options.est_csv.empty()) {
    LoadedCsv est_loaded = load_csv(options.est_csv, schema);
    if (est_loaded.data.n_features() != data.n_features())
      throw ValidationError("estimation file has a different covariate count");
    // Concatenate: training rows first, estimation rows after.
    std::vector<double> y(data.outcomes());
    std::vector<std::uint8_t> w(data.treatments());
    std::vector<double> x;
    for (std::size_t i = 0; i < data.size(); ++i)
      x.insert(x.end(), data.row(i), data.row(i) + data.n_features());
    std::vector<double> e;
    if (data.has_propensity())
      for (std::size_t i = 0; i < data.size(); ++i) e.push_back(data.propensity(i));
    const std::size_t n_train_rows = data.size();
    const CausalDataset& ed = est_loaded.data;
    for (std::size_t i = 0; i < ed.size(); ++i) {
      y.push_back(ed.outcome(i));
      w.push_back(ed.treated(i) ? 1 : 0);
      x.insert(x.end(), ed.row(i), ed.row(i) + ed.n_features());
      if (!e.empty()) e.push_back(ed.propensity(i));
    }
    data = CausalDataset(std::move(y), std::move(w), std::move(x), ed.n_features(),
                         std::nullopt, std::move(e));
    train_idx = iota_indices(n_train_rows);
    est_idx.resize(data.size() - n_train_rows);
    std::iota(est_idx.begin(), est_idx.end(), n_train_rows);
  } else if (est_spec.honest) {
    const SampleSplit split = split_sample(data, options.train_fraction,
                                           1.0 - options.train_fraction, 0.0,
                                           options.seed);
    train_idx = split.train_indices;
    est_idx = split.est_indices;
  } else {
    train_idx = iota_indices(data.size());
    est_idx = train_idx;
  }

  CriterionSpec spec;
  spec.family = est_spec.family;
  spec.honest = est_spec.honest && est_spec.family != Family::TOT;
  spec.p = data.marginal_p();
  spec.n_est = static_cast<long>(est_idx.size());

  CvConfig cv{folds, options.seed};
  const Tree tree = fit_pruned_tree(data, train_idx, spec, params, cv);

  const WeightingConfig weighting{options.trim_low, options.trim_high, true};
  const WeightingConfig* wptr = options.weighted ? &weighting : nullptr;
  const LeafEstimates estimates =
      est_spec.honest ? estimate_leaves(tree, data, est_idx, options.level, wptr)
                      : adaptive_estimate_leaves(tree, data, est_idx, options.level, wptr);

  write_file(options.out_prefix + ".tree.json",
             tree_to_json(tree, loaded.covariate_names));
  write_file(options.out_prefix + ".estimates.csv",
             estimates_to_csv(tree, estimates, loaded.covariate_names));

  std::ostringstream report;
  report.precision(4);
  report << "estimator: " << options.estimator << "\n"
         << "rows: " << data.size() << " (train " << train_idx.size() << ", estimate "
         << est_idx.size() << ")\n"
         << "leaves: " << tree.n_leaves() << "\n\n"
         << tree_to_text(tree, loaded.covariate_names) << "\n"
         << "Subgroups (" << options.level * 100 << "% confidence intervals):\n";
  for (NodeId leaf : tree.leaf_ids()) {
    report << "  leaf " << leaf << ": "
           << tree.describe_region(leaf, loaded.covariate_names) << "\n";
    const auto it = estimates.by_leaf.find(leaf);
    if (it == estimates.by_leaf.end()) {
      report << "    estimate unavailable (too few estimation units per arm)\n";
      continue;
    }
    const LeafEstimate& e = it->second;
    report << "    tau_hat=" << e.tau_hat << "  se=" << e.se << "  ci=[" << e.ci_lo
           << ", " << e.ci_hi << "]  n_treat=" << e.n_treat
           << "  n_control=" << e.n_control << "\n";
  }
  write_file(options.out_prefix + ".report.txt", report.str());
}

void cmd_predict(const PredictOptions& options) {
  const Tree tree = tree_from_json(read_file(options.tree_file));
  const LeafEstimates estimates = estimates_from_csv(read_file(options.estimates_file));

  // Read covariates only; outcome and treatment are not needed for routing.
  std::ifstream in(options.input_csv);
  if (!in) throw ValidationError("cannot open file: " + options.input_csv);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty file: " + options.input_csv);

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t b = cell.find_first_not_of(" \t\r");
      std::size_t e = cell.find_last_not_of(" \t\r");
      header.push_back(b == std::string::npos ? std::string()
                                              : cell.substr(b, e - b + 1));
    }
  }

  std::vector<std::string> wanted = options.covariate_columns;
  if (wanted.empty()) {
    for (std::size_t f = 0; f < tree.n_features; ++f) wanted.push_back("x" + std::to_string(f));
  }
  if (wanted.size() != tree.n_features)
    throw ValidationError("covariate count does not match the tree");
  std::vector<std::size_t> cols;
  for (const std::string& name : wanted) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ValidationError("missing column '" + name + "' in " + options.input_csv);
    cols.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  std::ostringstream out;
  out.precision(10);
  out << "row,leaf,tau_hat,ci_lo,ci_hi\n";
  std::size_t row = 1;
  std::vector<double> x(tree.n_features);
  while (std::getline(in, line)) {
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size())
      throw ValidationError("wrong number of fields at row " + std::to_string(row));
    for (std::size_t f = 0; f < cols.size(); ++f) {
      try {
        x[f] = std::stod(cells[cols[f]]);
      } catch (const std::exception&) {
        throw ValidationError("cannot parse numeric value at row " + std::to_string(row));
      }
    }
    const LeafEstimate est = predict(tree, estimates, x);
    out << row << "," << tree.apply(x) << "," << est.tau_hat << "," << est.ci_lo << ","
        << est.ci_hi << "\n";
    ++row;
  }
  write_file(options.output_csv, out.str());
}

namespace {

// simulate config files are flat key=value text.
std::map<std::string, std::string> parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const std::size_t b = s.find_first_not_of(" \t\r");
      const std::size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = value;
  }
  return kv;
}

}  // namespace

void cmd_simulate(const SimulateOptions& options) {
  const auto kv = parse_config(options.config_file);
  auto get = [&](const std::string& key, const std::string& fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  };

  SimConfig config;
  config.design = DesignSpec::design(std::stoi(get("design", "1")));
  config.n_train = static_cast<std::size_t>(std::stoul(get("n_train", "500")));
  config.n_est = static_cast<std::size_t>(std::stoul(get("n_est", "500")));
  config.n_test = static_cast<std::size_t>(std::stoul(get("n_test", "6000")));
  config.replications = std::stoi(get("replications", "200"));
  config.seed = std::stoull(get("seed", "1"));
  config.grow.n_min = std::stol(get("n_min", "25"));
  config.grow.bucket_size = std::stol(get("bucket_size", "4"));
  config.ci_level = std::stod(get("level", "0.9"));
  config.threads = std::stoi(get("threads", "0"));

  const std::string estimators = get("estimators", "");
  if (!estimators.empty()) {
    config.estimators.clear();
    std::stringstream ss(estimators);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (!name.empty()) config.estimators.push_back(EstimatorSpec::parse(name));
    }
  }
  const std::string folds = get("folds", "");
  if (!folds.empty()) {
    for (EstimatorSpec& est : config.estimators)
      if (est.family != Family::TOT) est.folds = std::stoi(folds);
  }
  const std::string tot_folds = get("tot_folds", "");
  if (!tot_folds.empty()) {
    for (EstimatorSpec& est : config.estimators)
      if (est.family == Family::TOT) est.folds = std::stoi(tot_folds);
  }

  const std::string out_prefix = get("out_prefix", "sim");
  const SimReport report = run_study(config);
  write_file(out_prefix + ".csv", report.to_csv());
  write_file(out_prefix + ".txt", report.to_text());
  std::cout << report.to_text();
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Honest recursive partitioning for heterogeneous treatment effects"};
  app.require_subcommand(1);

  FitOptions fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a tree on a CSV sample");
  fit_cmd->add_option("--input", fit.input_csv, "input CSV")->required();
  fit_cmd->add_option("--est-input", fit.est_csv, "separate estimation CSV");
  fit_cmd->add_option("--outcome-col", fit.outcome_column, "outcome column name");
  fit_cmd->add_option("--treatment-col", fit.treatment_column, "treatment column name");
  fit_cmd->add_option("--covariate-cols", fit.covariate_columns,
                      "covariate column names (default: all remaining)");
  fit_cmd->add_option("--propensity-col", fit.propensity_column, "propensity column");
  fit_cmd->add_option("--estimator", fit.estimator,
                      "ct|tot|fit|ts with -a or -h suffix");
  fit_cmd->add_option("--n-min", fit.n_min, "minimum per-arm leaf count");
  fit_cmd->add_option("--buckets", fit.bucket_size, "target observations per bucket");
  fit_cmd->add_option("--folds", fit.folds, "cross-validation folds");
  fit_cmd->add_option("--level", fit.level, "confidence level");
  fit_cmd->add_option("--train-frac", fit.train_fraction,
                      "training fraction for honest fits");
  fit_cmd->add_option("--seed", fit.seed, "random seed");
  fit_cmd->add_flag("--weighted", fit.weighted, "propensity-weighted estimation");
  fit_cmd->add_option("--trim", [&fit](const std::vector<std::string>& vals) {
    if (vals.size() != 1) return false;
    const std::size_t comma = vals[0].find(',');
    if (comma == std::string::npos) return false;
    fit.trim_low = std::stod(vals[0].substr(0, comma));
    fit.trim_high = std::stod(vals[0].substr(comma + 1));
    return true;
  }, "propensity trim bounds lo,hi");
  fit_cmd->add_option("--out-prefix", fit.out_prefix, "output file prefix");

  PredictOptions pred;
  CLI::App* pred_cmd = app.add_subcommand("predict", "predict with a fitted tree");
  pred_cmd->add_option("--tree", pred.tree_file, "tree JSON file")->required();
  pred_cmd->add_option("--estimates", pred.estimates_file, "estimates CSV")->required();
  pred_cmd->add_option("--input", pred.input_csv, "input CSV")->required();
  pred_cmd->add_option("--covariate-cols", pred.covariate_columns,
                       "covariate column names");
  pred_cmd->add_option("--output", pred.output_csv, "output CSV");

  SimulateOptions sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run a simulation study");
  sim_cmd->add_option("--config", sim.config_file, "key=value config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (fit_cmd->parsed()) cmd_fit(fit);
    if (pred_cmd->parsed()) cmd_predict(pred);
    if (sim_cmd->parsed()) cmd_simulate(sim);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace causaltree::cli
