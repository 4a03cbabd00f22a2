#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "causaltree/dataset.hpp"
#include "causaltree/rng.hpp"

using namespace causaltree;

namespace {

struct TempCsv {
  std::string path;
  explicit TempCsv(const std::string& name, const std::string& content)
      : path("data_" + name + ".csv") {
    std::ofstream out(path);
    out << content;
  }
  ~TempCsv() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("load_csv computes the empirical treated share") {
  TempCsv file("share",
               "y,w,x0\n"
               "1.0,0,0.1\n"
               "2.0,1,0.2\n"
               "3.0,0,0.3\n"
               "4.0,1,0.4\n");
  const LoadedCsv loaded = load_csv(file.path, CsvSchema{});
  CHECK(loaded.data.size() == 4);
  CHECK(loaded.data.marginal_p() == doctest::Approx(0.5));
  CHECK(loaded.covariate_names == std::vector<std::string>{"x0"});
}

TEST_CASE("load_csv rejects non-binary treatment naming the row") {
  TempCsv file("badw",
               "y,w,x0\n"
               "1.0,0,0.1\n"
               "2.0,1,0.2\n"
               "3.0,2,0.3\n");
  try {
    load_csv(file.path, CsvSchema{});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("load_csv override wins over the empirical share") {
  TempCsv file("override",
               "y,w,x0\n"
               "1,1,0\n2,1,0\n3,1,0\n4,0,0\n5,0,0\n6,0,0\n");
  CsvSchema schema;
  schema.override_p = 0.5;
  const LoadedCsv loaded = load_csv(file.path, schema);
  CHECK(loaded.data.marginal_p() == doctest::Approx(0.5));
}

TEST_CASE("load_csv validation errors carry row numbers") {
  TempCsv bad_cell("badcell", "y,w,x0\n1.0,0,0.1\nnope,1,0.2\n");
  CHECK_THROWS_AS(load_csv(bad_cell.path, CsvSchema{}), ValidationError);

  TempCsv bad_prop("badprop", "y,w,x0,e\n1.0,0,0.1,0.5\n2.0,1,0.2,1.5\n");
  CsvSchema schema;
  schema.propensity_column = "e";
  try {
    load_csv(bad_prop.path, schema);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }

  TempCsv ok("okschema", "y,w,x0\n1.0,0,0.1\n");
  CsvSchema missing;
  missing.outcome_column = "outcome";
  CHECK_THROWS_AS(load_csv(ok.path, missing), ValidationError);
}

namespace {

CausalDataset alternating_dataset(std::size_t n) {
  std::vector<double> y(n), x(n);
  std::vector<std::uint8_t> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<double>(i);
    w[i] = i % 2;
    x[i] = static_cast<double>(i);
  }
  return CausalDataset(std::move(y), std::move(w), std::move(x), 1);
}

}  // namespace

TEST_CASE("split_sample produces disjoint sets of the requested sizes") {
  const CausalDataset data = alternating_dataset(1000);
  const SampleSplit split = split_sample(data, 0.5, 0.5, 0.0, 7);
  CHECK(split.train_indices.size() == 500);
  CHECK(split.est_indices.size() == 500);
  CHECK(split.test_indices.empty());

  std::set<std::size_t> seen(split.train_indices.begin(), split.train_indices.end());
  for (std::size_t i : split.est_indices) CHECK(seen.insert(i).second);
  CHECK(seen.size() == 1000);
}

TEST_CASE("split_sample with full train fraction returns every index") {
  const CausalDataset data = alternating_dataset(20);
  const SampleSplit split = split_sample(data, 1.0, 0.0, 0.0, 3);
  CHECK(split.train_indices.size() == 20);
}

TEST_CASE("split_sample is deterministic in the seed") {
  const CausalDataset data = alternating_dataset(100);
  const SampleSplit a = split_sample(data, 0.4, 0.3, 0.3, 99);
  const SampleSplit b = split_sample(data, 0.4, 0.3, 0.3, 99);
  CHECK(a.train_indices == b.train_indices);
  CHECK(a.est_indices == b.est_indices);
  CHECK(a.test_indices == b.test_indices);
}

TEST_CASE("split_sample small-sample sweep: disjoint and deterministic") {
  for (std::size_t n = 4; n <= 12; ++n) {
    // A part of exactly one unit can never hold both arms; skip those sizes.
    const auto count = [&](double f) {
      return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
    };
    if (count(0.5) == 1 || count(0.25) == 1) continue;
    const CausalDataset data = alternating_dataset(n);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const SampleSplit a = split_sample(data, 0.5, 0.25, 0.25, seed);
      const SampleSplit b = split_sample(data, 0.5, 0.25, 0.25, seed);
      CHECK(a.train_indices == b.train_indices);
      CHECK(a.est_indices == b.est_indices);
      CHECK(a.test_indices == b.test_indices);
      std::set<std::size_t> seen;
      for (const auto* part : {&a.train_indices, &a.est_indices, &a.test_indices})
        for (std::size_t i : *part) CHECK(seen.insert(i).second);
    }
  }
}

TEST_CASE("split_sample rejects infeasible requests") {
  const CausalDataset data = alternating_dataset(10);
  CHECK_THROWS_AS(split_sample(data, 0.8, 0.8, 0.0, 1), ValidationError);

  // One treated unit only: asking for two nonempty sets cannot give each a
  // treated unit.
  std::vector<double> y{1, 2, 3, 4};
  std::vector<std::uint8_t> w{1, 0, 0, 0};
  std::vector<double> x{1, 2, 3, 4};
  const CausalDataset lone(std::move(y), std::move(w), std::move(x), 1);
  CHECK_THROWS_AS(split_sample(lone, 0.5, 0.5, 0.0, 1), ValidationError);
}

TEST_CASE("transformed outcome evaluates the rescaling") {
  CHECK(transformed_outcome(1.0, true, 0.5) == doctest::Approx(2.0));
  CHECK(transformed_outcome(0.0, true, 0.3) == doctest::Approx(0.0));
  CHECK(transformed_outcome(0.0, false, 0.7) == doctest::Approx(0.0));
  CHECK(transformed_outcome(1.0, false, 0.5) == doctest::Approx(-2.0));
}

TEST_CASE("transformed outcome recovers the cell-level effect in expectation") {
  // Constant effect tau, mean shift eta, p = e(x): the sample mean of y* over
  // many draws must sit within 4 Monte Carlo standard errors of tau.
  const double tau = 1.5, eta = 0.7, p = 0.35;
  const std::size_t n = 100000;
  auto eng = make_engine(12345);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::bernoulli_distribution treat(p);

  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool w = treat(eng);
    const double y = eta + (w ? 0.5 : -0.5) * tau + noise(eng);
    const double ystar = transformed_outcome(y, w, p);
    sum += ystar;
    sumsq += ystar * ystar;
  }
  const double mean = sum / n;
  const double var = (sumsq - n * mean * mean) / (n - 1.0);
  const double mc_se = std::sqrt(var / n);
  CHECK(std::abs(mean - tau) < 4.0 * mc_se);
}
