#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "causaltree/dataset.hpp"

namespace causaltree {

// Running first and second moments for one treatment arm.
struct ArmMoments {
  long n = 0;
  double sum = 0.0;
  double sumsq = 0.0;

  void add(double y) {
    ++n;
    sum += y;
    sumsq += y * y;
  }
  double mean() const { return sum / static_cast<double>(n); }
  // Unbiased sample variance, NaN when n < 2.
  double variance() const {
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean();
    const double v = (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
    return v < 0.0 ? 0.0 : v;
  }
  // Sum of squared deviations about the arm mean (>= 0).
  double ss() const {
    if (n == 0) return 0.0;
    const double m = mean();
    const double s = sumsq - static_cast<double>(n) * m * m;
    return s < 0.0 ? 0.0 : s;
  }
};

// Moments of the working outcome within a tree node, split by arm.
struct NodeMoments {
  ArmMoments treat;
  ArmMoments control;

  long n() const { return treat.n + control.n; }
  double pooled_mean() const {
    return (treat.sum + control.sum) / static_cast<double>(n());
  }
  double pooled_variance() const {
    if (n() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = pooled_mean();
    const double v = (treat.sumsq + control.sumsq -
                      static_cast<double>(n()) * m * m) /
                     static_cast<double>(n() - 1);
    return v < 0.0 ? 0.0 : v;
  }
};

// Per-leaf sufficient statistics: per-arm counts, means and unbiased sample
// variances, plus the pooled versions used by prediction-style criteria.
// Means are NaN for an empty arm; variances are NaN when the count is < 2.
struct LeafStats {
  long n_treat = 0;
  long n_control = 0;
  double mean_treat = std::numeric_limits<double>::quiet_NaN();
  double mean_control = std::numeric_limits<double>::quiet_NaN();
  double var_treat = std::numeric_limits<double>::quiet_NaN();
  double var_control = std::numeric_limits<double>::quiet_NaN();
  double mean_all = std::numeric_limits<double>::quiet_NaN();
  double var_all = std::numeric_limits<double>::quiet_NaN();
  double weight_treat = 0.0;
  double weight_control = 0.0;

  long n() const { return n_treat + n_control; }
  bool has_arm_means() const { return n_treat >= 1 && n_control >= 1; }
  bool has_arm_variances() const { return n_treat >= 2 && n_control >= 2; }

  static LeafStats from_moments(const NodeMoments& m);
  NodeMoments to_moments() const;
};

// Sample statistics of the rows given by `indices`. When `weights` is
// nonempty (one entry per dataset row) the means are weighted; variances stay
// unweighted with the n-1 divisor.
LeafStats leaf_stats(const CausalDataset& data,
                     const std::vector<std::size_t>& indices,
                     const std::vector<double>& weights = {});

}  // namespace causaltree
