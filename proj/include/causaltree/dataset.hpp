#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace causaltree {

// Validation failures (bad input data, infeasible requests). The CLI maps
// these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failures (degenerate criterion values and the like). Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Experimental or observational sample: outcome, binary treatment, covariate
// matrix, optional unit-level propensity scores and (in simulations) the true
// conditional average treatment effect. Immutable after construction and safe
// to share read-only across threads.
class CausalDataset {
 public:
  CausalDataset(std::vector<double> outcomes, std::vector<std::uint8_t> treatments,
                std::vector<double> covariates_row_major, std::size_t n_features,
                std::optional<double> marginal_p = std::nullopt,
                std::vector<double> propensity = {},
                std::vector<double> true_cate = {});

  std::size_t size() const { return outcomes_.size(); }
  std::size_t n_features() const { return k_; }

  double outcome(std::size_t i) const { return outcomes_[i]; }
  bool treated(std::size_t i) const { return treatments_[i] != 0; }
  double covariate(std::size_t i, std::size_t f) const {
    return covariates_[i * k_ + f];
  }
  const double* row(std::size_t i) const { return covariates_.data() + i * k_; }

  double marginal_p() const { return marginal_p_; }
  bool has_propensity() const { return !propensity_.empty(); }
  double propensity(std::size_t i) const { return propensity_[i]; }
  bool has_true_cate() const { return !true_cate_.empty(); }
  double true_cate(std::size_t i) const { return true_cate_[i]; }

  const std::vector<double>& outcomes() const { return outcomes_; }
  const std::vector<std::uint8_t>& treatments() const { return treatments_; }

 private:
  std::vector<double> outcomes_;
  std::vector<std::uint8_t> treatments_;
  std::vector<double> covariates_;  // row-major, size() * k_
  std::size_t k_ = 0;
  double marginal_p_ = 0.5;
  std::vector<double> propensity_;
  std::vector<double> true_cate_;
};

// Disjoint train / estimation / test index sets into a parent dataset.
struct SampleSplit {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> est_indices;
  std::vector<std::size_t> test_indices;
  std::uint64_t seed = 0;
};

// Column-name mapping for CSV ingestion. covariate_columns empty means
// "every column not otherwise claimed".
struct CsvSchema {
  std::string outcome_column = "y";
  std::string treatment_column = "w";
  std::vector<std::string> covariate_columns;
  std::string propensity_column;          // empty = none
  std::optional<double> override_p;       // overrides the empirical share
};

struct LoadedCsv {
  CausalDataset data;
  std::vector<std::string> covariate_names;
};

LoadedCsv load_csv(const std::string& path, const CsvSchema& schema);

// Uniform random partition without replacement into train/est/test. Each
// nonempty part must contain at least one treated and one control unit;
// draws are retried (fresh permutations, same stream) up to 100 times.
SampleSplit split_sample(const CausalDataset& data,
                         double train_fraction, double est_fraction,
                         double test_fraction, std::uint64_t seed);

// Outcome rescaling whose conditional expectation equals the CATE:
//   y* = y * (w - p) / (p * (1 - p)).
std::vector<double> transformed_outcome(const CausalDataset& data);
double transformed_outcome(double y, bool treated, double p);

}  // namespace causaltree
