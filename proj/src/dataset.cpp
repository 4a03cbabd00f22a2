#include "causaltree/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "causaltree/rng.hpp"

namespace causaltree {

CausalDataset::CausalDataset(std::vector<double> outcomes,
                             std::vector<std::uint8_t> treatments,
                             std::vector<double> covariates_row_major,
                             std::size_t n_features,
                             std::optional<double> marginal_p,
                             std::vector<double> propensity,
                             std::vector<double> true_cate)
    : outcomes_(std::move(outcomes)),
      treatments_(std::move(treatments)),
      covariates_(std::move(covariates_row_major)),
      k_(n_features),
      propensity_(std::move(propensity)),
      true_cate_(std::move(true_cate)) {
  const std::size_t n = outcomes_.size();
  if (n == 0) throw ValidationError("dataset must contain at least one row");
  if (treatments_.size() != n)
    throw ValidationError("treatment column length does not match outcomes");
  if (k_ == 0 || covariates_.size() != n * k_)
    throw ValidationError("covariate matrix shape does not match outcomes");
  if (!propensity_.empty() && propensity_.size() != n)
    throw ValidationError("propensity column length does not match outcomes");
  if (!true_cate_.empty() && true_cate_.size() != n)
    throw ValidationError("true-effect column length does not match outcomes");

  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(outcomes_[i]))
      throw ValidationError("non-finite outcome at row " + std::to_string(i + 1));
    if (treatments_[i] > 1)
      throw ValidationError("treatment must be 0 or 1 at row " + std::to_string(i + 1));
  }
  for (std::size_t i = 0; i < covariates_.size(); ++i) {
    if (!std::isfinite(covariates_[i]))
      throw ValidationError("non-finite covariate at row " +
                            std::to_string(i / k_ + 1));
  }
  for (std::size_t i = 0; i < propensity_.size(); ++i) {
    if (!(propensity_[i] > 0.0 && propensity_[i] < 1.0))
      throw ValidationError("propensity outside (0,1) at row " + std::to_string(i + 1));
  }

  if (marginal_p.has_value()) {
    marginal_p_ = *marginal_p;
  } else {
    const double treated_share =
        static_cast<double>(std::accumulate(treatments_.begin(), treatments_.end(), 0L)) /
        static_cast<double>(n);
    marginal_p_ = treated_share;
  }
  if (!(marginal_p_ > 0.0 && marginal_p_ < 1.0))
    throw ValidationError("marginal treatment probability must lie in (0,1)");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim spaces and a trailing CR from windows line endings
    std::size_t b = cell.find_first_not_of(" \t\r");
    std::size_t e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value))
    throw ValidationError("cannot parse numeric value '" + cell + "' in column '" +
                          col + "' at row " + std::to_string(row));
  return value;
}

}  // namespace

LoadedCsv load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty file: " + path);
  const std::vector<std::string> header = split_line(line);

  auto column_index = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ValidationError("missing column '" + name + "' in " + path);
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t y_col = column_index(schema.outcome_column);
  const std::size_t w_col = column_index(schema.treatment_column);
  std::size_t e_col = header.size();
  if (!schema.propensity_column.empty()) e_col = column_index(schema.propensity_column);

  std::vector<std::string> cov_names = schema.covariate_columns;
  if (cov_names.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == y_col || c == w_col || (e_col < header.size() && c == e_col)) continue;
      cov_names.push_back(header[c]);
    }
  }
  if (cov_names.empty())
    throw ValidationError("no covariate columns available in " + path);
  std::vector<std::size_t> cov_cols;
  cov_cols.reserve(cov_names.size());
  for (const auto& name : cov_names) cov_cols.push_back(column_index(name));

  std::vector<double> outcomes;
  std::vector<std::uint8_t> treatments;
  std::vector<double> covariates;
  std::vector<double> propensity;

  std::size_t row = 1;  // data rows are 1-based in error messages
  while (std::getline(in, line)) {
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw ValidationError("wrong number of fields at row " + std::to_string(row));

    outcomes.push_back(parse_number(cells[y_col], row, schema.outcome_column));
    const double w = parse_number(cells[w_col], row, schema.treatment_column);
    if (w != 0.0 && w != 1.0)
      throw ValidationError("treatment value must be 0 or 1 at row " +
                            std::to_string(row));
    treatments.push_back(static_cast<std::uint8_t>(w));
    for (std::size_t c : cov_cols)
      covariates.push_back(parse_number(cells[c], row, header[c]));
    if (e_col < header.size()) {
      const double e = parse_number(cells[e_col], row, schema.propensity_column);
      if (!(e > 0.0 && e < 1.0))
        throw ValidationError("propensity outside (0,1) at row " + std::to_string(row));
      propensity.push_back(e);
    }
    ++row;
  }
  if (outcomes.empty()) throw ValidationError("no data rows in " + path);

  CausalDataset data(std::move(outcomes), std::move(treatments), std::move(covariates),
                     cov_cols.size(), schema.override_p, std::move(propensity));
  return LoadedCsv{std::move(data), std::move(cov_names)};
}

namespace {

bool has_both_arms(const CausalDataset& data, const std::vector<std::size_t>& idx) {
  bool t = false, c = false;
  for (std::size_t i : idx) {
    (data.treated(i) ? t : c) = true;
    if (t && c) return true;
  }
  return false;
}

}  // namespace

SampleSplit split_sample(const CausalDataset& data, double train_fraction,
                         double est_fraction, double test_fraction,
                         std::uint64_t seed) {
  const std::size_t n = data.size();
  const double fractions[3] = {train_fraction, est_fraction, test_fraction};
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ValidationError("split fractions must be nonnegative");
    total += f;
  }
  if (total > 1.0 + 1e-12) throw ValidationError("split fractions must sum to at most 1");

  std::size_t counts[3];
  for (int s = 0; s < 3; ++s)
    counts[s] = static_cast<std::size_t>(std::floor(fractions[s] * static_cast<double>(n) + 1e-9));
  if (counts[0] + counts[1] + counts[2] > n)
    throw ValidationError("split fractions request more rows than available");

  auto eng = make_engine(seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  for (int attempt = 0; attempt < 100; ++attempt) {
    shuffle_indices(perm.begin(), perm.end(), eng);
    SampleSplit split;
    split.seed = seed;
    std::size_t offset = 0;
    std::vector<std::size_t>* parts[3] = {&split.train_indices, &split.est_indices,
                                          &split.test_indices};
    for (int s = 0; s < 3; ++s) {
      parts[s]->assign(perm.begin() + offset, perm.begin() + offset + counts[s]);
      std::sort(parts[s]->begin(), parts[s]->end());
      offset += counts[s];
    }
    bool ok = true;
    for (int s = 0; s < 3 && ok; ++s)
      if (!parts[s]->empty() && !has_both_arms(data, *parts[s])) ok = false;
    if (ok) return split;
  }
  throw ValidationError(
      "could not produce a split with both treatment arms in every nonempty set "
      "after 100 attempts");
}

double transformed_outcome(double y, bool treated, double p) {
  const double w = treated ? 1.0 : 0.0;
  return y * (w - p) / (p * (1.0 - p));
}

std::vector<double> transformed_outcome(const CausalDataset& data) {
  const double p = data.marginal_p();
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    out[i] = transformed_outcome(data.outcome(i), data.treated(i), p);
  return out;
}

}  // namespace causaltree
