#include "causaltree/criteria.hpp"

#include <cmath>
#include <limits>

namespace causaltree {

LeafStats LeafStats::from_moments(const NodeMoments& m) {
  LeafStats s;
  s.n_treat = m.treat.n;
  s.n_control = m.control.n;
  if (m.treat.n > 0) s.mean_treat = m.treat.mean();
  if (m.control.n > 0) s.mean_control = m.control.mean();
  s.var_treat = m.treat.variance();
  s.var_control = m.control.variance();
  if (m.n() > 0) {
    s.mean_all = m.pooled_mean();
    s.var_all = m.pooled_variance();
  }
  s.weight_treat = static_cast<double>(m.treat.n);
  s.weight_control = static_cast<double>(m.control.n);
  return s;
}

NodeMoments LeafStats::to_moments() const {
  NodeMoments m;
  m.treat.n = n_treat;
  if (n_treat > 0) {
    m.treat.sum = mean_treat * static_cast<double>(n_treat);
    m.treat.sumsq = static_cast<double>(n_treat) * mean_treat * mean_treat +
                    (n_treat >= 2 ? static_cast<double>(n_treat - 1) * var_treat : 0.0);
  }
  m.control.n = n_control;
  if (n_control > 0) {
    m.control.sum = mean_control * static_cast<double>(n_control);
    m.control.sumsq =
        static_cast<double>(n_control) * mean_control * mean_control +
        (n_control >= 2 ? static_cast<double>(n_control - 1) * var_control : 0.0);
  }
  return m;
}

LeafStats leaf_stats(const CausalDataset& data,
                     const std::vector<std::size_t>& indices,
                     const std::vector<double>& weights) {
  if (indices.empty()) throw ValidationError("leaf_stats requires a nonempty index set");
  const bool weighted = !weights.empty();
  if (weighted && weights.size() != data.size())
    throw ValidationError("weights length does not match dataset");

  NodeMoments m;
  double wsum_t = 0.0, wysum_t = 0.0, wsum_c = 0.0, wysum_c = 0.0;
  for (std::size_t i : indices) {
    const double y = data.outcome(i);
    const double w = weighted ? weights[i] : 1.0;
    if (data.treated(i)) {
      m.treat.add(y);
      wsum_t += w;
      wysum_t += w * y;
    } else {
      m.control.add(y);
      wsum_c += w;
      wysum_c += w * y;
    }
  }
  LeafStats s = LeafStats::from_moments(m);
  s.weight_treat = wsum_t;
  s.weight_control = wsum_c;
  if (weighted) {
    if (s.n_treat > 0) s.mean_treat = wysum_t / wsum_t;
    if (s.n_control > 0) s.mean_control = wysum_c / wsum_c;
    if (s.n() > 0) s.mean_all = (wysum_t + wysum_c) / (wsum_t + wsum_c);
  }
  return s;
}

void CriterionSpec::validate() const {
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("criterion treated share must lie in (0,1)");
  if (honest && n_est < 1)
    throw ValidationError("honest criteria require an estimation-sample size >= 1");
  if (family == Family::TS && mode != Mode::Treatment)
    throw ValidationError("the squared t-statistic criterion requires treatment mode");
  if ((family == Family::TOT || family == Family::Fit) && mode != Mode::Treatment)
    throw ValidationError("TOT and fit criteria require treatment mode");
}

double tau_hat(const LeafStats& stats) {
  if (!stats.has_arm_means())
    throw ValidationError("treatment effect undefined: a leaf arm is empty");
  return stats.mean_treat - stats.mean_control;
}

namespace {

double require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ") + what);
  return v;
}

}  // namespace

CriterionValue adaptive_ct_value(std::span<const LeafStats> leaves, long n_total) {
  double total = 0.0;
  for (const LeafStats& s : leaves) {
    const double tau = tau_hat(s);
    total += static_cast<double>(s.n()) * tau * tau;
  }
  return {require_finite(total / static_cast<double>(n_total), "criterion value")};
}

CriterionValue honest_ct_value(std::span<const LeafStats> leaves, long n_train,
                               long n_est, double p) {
  double fit = 0.0, penalty = 0.0;
  for (const LeafStats& s : leaves) {
    if (!s.has_arm_variances())
      throw ValidationError("honest criterion requires >= 2 units per arm per leaf");
    const double tau = tau_hat(s);
    fit += static_cast<double>(s.n()) * tau * tau;
    penalty += s.var_treat / p + s.var_control / (1.0 - p);
  }
  const double value =
      fit / static_cast<double>(n_train) -
      (1.0 / static_cast<double>(n_train) + 1.0 / static_cast<double>(n_est)) * penalty;
  return {require_finite(value, "criterion value")};
}

CriterionValue adaptive_prediction_value(std::span<const LeafStats> leaves,
                                         long n_total) {
  double total = 0.0;
  for (const LeafStats& s : leaves) {
    if (s.n() < 1) throw ValidationError("empty leaf in prediction criterion");
    total += static_cast<double>(s.n()) * s.mean_all * s.mean_all;
  }
  return {require_finite(total / static_cast<double>(n_total), "criterion value")};
}

CriterionValue honest_prediction_value(std::span<const LeafStats> leaves,
                                       long n_train, long n_est) {
  double fit = 0.0, penalty = 0.0;
  for (const LeafStats& s : leaves) {
    if (s.n() < 2)
      throw ValidationError("honest prediction criterion requires >= 2 units per leaf");
    fit += static_cast<double>(s.n()) * s.mean_all * s.mean_all;
    penalty += s.var_all;
  }
  const double value =
      fit / static_cast<double>(n_train) -
      (1.0 / static_cast<double>(n_train) + 1.0 / static_cast<double>(n_est)) * penalty;
  return {require_finite(value, "criterion value")};
}

CriterionValue tot_value(std::span<const LeafStats> leaves, long n_total) {
  return adaptive_prediction_value(leaves, n_total);
}

CriterionValue fit_value(std::span<const LeafStats> leaves, bool honest, long n_total,
                         long n_est) {
  double fit = 0.0, penalty = 0.0;
  for (const LeafStats& s : leaves) {
    if (!s.has_arm_means())
      throw ValidationError("fit criterion requires both arms in every leaf");
    fit += static_cast<double>(s.n_treat) * s.mean_treat * s.mean_treat +
           static_cast<double>(s.n_control) * s.mean_control * s.mean_control;
    if (honest) {
      if (!s.has_arm_variances())
        throw ValidationError("honest fit criterion requires >= 2 units per arm per leaf");
      penalty += s.var_treat + s.var_control;
    }
  }
  double value = fit / static_cast<double>(n_total);
  if (honest)
    value -= (1.0 / static_cast<double>(n_total) + 1.0 / static_cast<double>(n_est)) *
             penalty;
  return {require_finite(value, "criterion value")};
}

double ts_pooled_variance(const LeafStats& left, const LeafStats& right) {
  auto cell_ss = [](long n, double var) {
    return n >= 2 ? static_cast<double>(n - 1) * var : 0.0;
  };
  const double ss = cell_ss(left.n_treat, left.var_treat) +
                    cell_ss(left.n_control, left.var_control) +
                    cell_ss(right.n_treat, right.var_treat) +
                    cell_ss(right.n_control, right.var_control);
  const long dof = std::max(0L, left.n_treat - 1) + std::max(0L, left.n_control - 1) +
                   std::max(0L, right.n_treat - 1) + std::max(0L, right.n_control - 1);
  if (dof == 0) return 0.0;
  return ss / static_cast<double>(dof);
}

double ts_split_stat(const LeafStats& left, const LeafStats& right,
                     double pooled_variance) {
  if (!left.has_arm_means() || !right.has_arm_means())
    throw ValidationError("squared t-statistic requires both arms in both leaves");
  const double vhat =
      pooled_variance * (1.0 / static_cast<double>(left.n_treat) +
                         1.0 / static_cast<double>(left.n_control) +
                         1.0 / static_cast<double>(right.n_treat) +
                         1.0 / static_cast<double>(right.n_control));
  if (!(vhat > 0.0)) throw NumericalError("zero variance in squared t-statistic");
  const double diff = tau_hat(left) - tau_hat(right);
  return diff * diff / vhat;
}

CriterionValue cv_value(const CriterionSpec& spec, std::span<const CvLeaf> leaves,
                        long n_cv_total) {
  spec.validate();
  if (n_cv_total < 1) throw ValidationError("empty cross-validation sample");
  const double n_cv = static_cast<double>(n_cv_total);

  // Honest CT/Fit (and TS-H via CT-H) evaluate the honest criterion on the
  // cv sample alone, with the cv-sample size in both variance factors.
  if (spec.honest && spec.family != Family::TOT) {
    double fit = 0.0, penalty = 0.0;
    for (const CvLeaf& l : leaves) {
      switch (spec.family) {
        case Family::CT:
        case Family::TS:
          if (spec.mode == Mode::Prediction) {
            if (l.cv.n() < 2)
              throw ValidationError("cv leaf lacks support for the honest criterion");
            fit += static_cast<double>(l.w_total) * l.cv.mean_all * l.cv.mean_all;
            penalty += l.cv.var_all;
          } else {
            if (!l.cv.has_arm_variances())
              throw ValidationError("cv leaf has an undersupported arm");
            const double tau = tau_hat(l.cv);
            fit += static_cast<double>(l.w_total) * tau * tau;
            penalty += l.cv.var_treat / spec.p + l.cv.var_control / (1.0 - spec.p);
          }
          break;
        case Family::Fit:
          if (!l.cv.has_arm_variances())
            throw ValidationError("cv leaf has an undersupported arm");
          fit += static_cast<double>(l.w_treat) * l.cv.mean_treat * l.cv.mean_treat +
                 static_cast<double>(l.w_control) * l.cv.mean_control * l.cv.mean_control;
          penalty += l.cv.var_treat + l.cv.var_control;
          break;
        default:
          break;
      }
    }
    return {require_finite(fit / n_cv - (2.0 / n_cv) * penalty, "cv criterion value")};
  }

  // Adaptive families (and TOT in both variants): unbiased cross-sample form
  //   (1/N_cv) sum_l n_l^cv (2 est_cv est_train - est_train^2)
  // per arm for Fit, pooled for TOT/prediction, tau for CT/TS.
  double total = 0.0;
  for (const CvLeaf& l : leaves) {
    switch (spec.family) {
      case Family::CT:
      case Family::TS: {
        if (l.w_total == 0) break;
        if (spec.mode == Mode::Prediction) {
          if (l.cv.n() < 1)
            throw ValidationError("cv leaf has no cross-validation units");
          const double est_cv = l.cv.mean_all;
          const double est_tr = l.train.mean_all;
          total += static_cast<double>(l.w_total) *
                   (2.0 * est_cv * est_tr - est_tr * est_tr);
        } else {
          if (!l.cv.has_arm_means())
            throw ValidationError("cv leaf has an empty arm");
          const double est_cv = tau_hat(l.cv);
          const double est_tr = tau_hat(l.train);
          total += static_cast<double>(l.w_total) *
                   (2.0 * est_cv * est_tr - est_tr * est_tr);
        }
        break;
      }
      case Family::TOT: {
        if (l.w_total == 0) break;
        if (l.cv.n() < 1) throw ValidationError("cv leaf has no cross-validation units");
        const double est_cv = l.cv.mean_all;
        const double est_tr = l.train.mean_all;
        total += static_cast<double>(l.w_total) *
                 (2.0 * est_cv * est_tr - est_tr * est_tr);
        break;
      }
      case Family::Fit: {
        if (l.w_total == 0) break;
        if (!l.cv.has_arm_means() || !l.train.has_arm_means())
          throw ValidationError("fit cross-validation requires both arms");
        total += static_cast<double>(l.w_treat) *
                     (2.0 * l.cv.mean_treat * l.train.mean_treat -
                      l.train.mean_treat * l.train.mean_treat) +
                 static_cast<double>(l.w_control) *
                     (2.0 * l.cv.mean_control * l.train.mean_control -
                      l.train.mean_control * l.train.mean_control);
        break;
      }
    }
  }
  return {require_finite(total / n_cv, "cv criterion value")};
}

// ---------------------------------------------------------------------------
// Growth internals.

namespace {

double variance_penalty_factor(const GrowthContext& ctx) {
  return 1.0 + static_cast<double>(ctx.n_norm) / static_cast<double>(ctx.n_est);
}

}  // namespace

double leaf_contribution(const CriterionSpec& spec, const GrowthContext& ctx,
                         const NodeMoments& m) {
  switch (spec.family) {
    case Family::TS:
      throw NumericalError("the squared t-statistic criterion is not leaf-additive");
    case Family::TOT: {
      const double mu = m.pooled_mean();
      return static_cast<double>(m.n()) * mu * mu;
    }
    case Family::CT: {
      if (spec.mode == Mode::Prediction) {
        const double mu = m.pooled_mean();
        double c = static_cast<double>(m.n()) * mu * mu;
        if (spec.honest) c -= variance_penalty_factor(ctx) * m.pooled_variance();
        return c;
      }
      const double tau = m.treat.mean() - m.control.mean();
      double c = static_cast<double>(m.n()) * tau * tau;
      if (spec.honest)
        c -= variance_penalty_factor(ctx) *
             (m.treat.variance() / ctx.p + m.control.variance() / (1.0 - ctx.p));
      return c;
    }
    case Family::Fit: {
      const double mt = m.treat.mean();
      const double mc = m.control.mean();
      double c = static_cast<double>(m.treat.n) * mt * mt +
                 static_cast<double>(m.control.n) * mc * mc;
      if (spec.honest)
        c -= variance_penalty_factor(ctx) * (m.treat.variance() + m.control.variance());
      return c;
    }
  }
  return 0.0;
}

double split_gain(const CriterionSpec& spec, const GrowthContext& ctx,
                  const NodeMoments& parent, const NodeMoments& left,
                  const NodeMoments& right) {
  if (spec.family == Family::TS) {
    auto cell_ss = [](const ArmMoments& a) { return a.ss(); };
    const double ss = cell_ss(left.treat) + cell_ss(left.control) +
                      cell_ss(right.treat) + cell_ss(right.control);
    const long dof = std::max(0L, left.treat.n - 1) + std::max(0L, left.control.n - 1) +
                     std::max(0L, right.treat.n - 1) + std::max(0L, right.control.n - 1);
    const double s2 = dof > 0 ? ss / static_cast<double>(dof) : 0.0;
    const double vhat = s2 * (1.0 / static_cast<double>(left.treat.n) +
                              1.0 / static_cast<double>(left.control.n) +
                              1.0 / static_cast<double>(right.treat.n) +
                              1.0 / static_cast<double>(right.control.n));
    if (!(vhat > 0.0)) return 0.0;
    const double diff = (left.treat.mean() - left.control.mean()) -
                        (right.treat.mean() - right.control.mean());
    return diff * diff / vhat;
  }
  const double gain = leaf_contribution(spec, ctx, left) +
                      leaf_contribution(spec, ctx, right) -
                      leaf_contribution(spec, ctx, parent);
  return gain / static_cast<double>(ctx.n_norm);
}

// ---------------------------------------------------------------------------
// Closed-form identities for a single binary-covariate split.

namespace {

struct CellSummary {
  long n = 0;
  double mean = 0.0;
  double ss = 0.0;  // squared deviations about the cell mean
};

CellSummary summarize(const std::vector<double>& y) {
  CellSummary c;
  c.n = static_cast<long>(y.size());
  if (c.n == 0) return c;
  double sum = 0.0;
  for (double v : y) sum += v;
  c.mean = sum / static_cast<double>(c.n);
  for (double v : y) c.ss += (v - c.mean) * (v - c.mean);
  return c;
}

// Divisor-n variance of a merged pair of cells about the merged mean.
double merged_ss(const CellSummary& a, const CellSummary& b) {
  const long n = a.n + b.n;
  const double mean =
      (a.mean * static_cast<double>(a.n) + b.mean * static_cast<double>(b.n)) /
      static_cast<double>(n);
  return a.ss + static_cast<double>(a.n) * (a.mean - mean) * (a.mean - mean) + b.ss +
         static_cast<double>(b.n) * (b.mean - mean) * (b.mean - mean);
}

}  // namespace

ComparisonResult comparison_identities(const ComparisonInput& input) {
  const CellSummary l0 = summarize(input.y_left_control);
  const CellSummary l1 = summarize(input.y_left_treat);
  const CellSummary r0 = summarize(input.y_right_control);
  const CellSummary r1 = summarize(input.y_right_treat);
  if (l0.n < 1 || l1.n < 1 || r0.n < 1 || r1.n < 1)
    throw ValidationError("comparison identities require all four cells populated");

  const long n_total = l0.n + l1.n + r0.n + r1.n;
  const double n = static_cast<double>(n_total);
  const double p = static_cast<double>(l1.n + r1.n) / n;

  const double ss_split = l0.ss + l1.ss + r0.ss + r1.ss;
  const double ss_nosplit = merged_ss(l0, r0) + merged_ss(l1, r1);
  if (!(ss_split > 0.0))
    throw ValidationError("comparison identities require within-cell variation");

  ComparisonResult out;
  out.s_sq_split = ss_split / n;
  out.s_sq_nosplit = ss_nosplit / n;

  // Fit gain. The closed form uses the pooled given-split variance on the
  // per-arm scale (divisor N/2); with that convention it reproduces the raw
  // sum-of-squares improvement of the four-cell model over the two-arm model
  // exactly, for any cell sizes.
  const double s2_arm = ss_split / (n / 2.0);
  out.t0_sq = (l0.mean - r0.mean) * (l0.mean - r0.mean) /
              (s2_arm * (1.0 / static_cast<double>(l0.n) + 1.0 / static_cast<double>(r0.n)));
  out.t1_sq = (l1.mean - r1.mean) * (l1.mean - r1.mean) /
              (s2_arm * (1.0 / static_cast<double>(l1.n) + 1.0 / static_cast<double>(r1.n)));
  const double u = out.t0_sq + out.t1_sq;
  out.f_formula = out.s_sq_nosplit * 2.0 * u / (1.0 + 2.0 * u / n);
  out.f_direct = ss_nosplit - ss_split;

  // Honest-CT gain. The closed form uses the divisor-N pooled variance inside
  // T^2. The direct route evaluates the honest criterion (divisor-n cell
  // variances, estimation factor 2/N) for the split and no-split partitions
  // and scales the difference by N.
  const double tau_l = l1.mean - l0.mean;
  const double tau_r = r1.mean - r0.mean;
  const double vhat = out.s_sq_split * (1.0 / static_cast<double>(l1.n) +
                                        1.0 / static_cast<double>(l0.n) +
                                        1.0 / static_cast<double>(r1.n) +
                                        1.0 / static_cast<double>(r0.n));
  out.t_sq = (tau_l - tau_r) * (tau_l - tau_r) / vhat;
  out.ct_gain_formula =
      ((out.t_sq - 4.0) * (out.s_sq_nosplit - out.f_formula / n) + 2.0 * out.s_sq_nosplit) /
      (p * (1.0 - p));

  auto value_split = [&]() {
    const double fit = static_cast<double>(l0.n + l1.n) * tau_l * tau_l +
                       static_cast<double>(r0.n + r1.n) * tau_r * tau_r;
    const double penalty = (l1.ss / static_cast<double>(l1.n) +
                            r1.ss / static_cast<double>(r1.n)) / p +
                           (l0.ss / static_cast<double>(l0.n) +
                            r0.ss / static_cast<double>(r0.n)) / (1.0 - p);
    return fit / n - (2.0 / n) * penalty;
  };
  auto value_nosplit = [&]() {
    const CellSummary c0 = {l0.n + r0.n,
                            (l0.mean * l0.n + r0.mean * r0.n) / static_cast<double>(l0.n + r0.n),
                            merged_ss(l0, r0)};
    const CellSummary c1 = {l1.n + r1.n,
                            (l1.mean * l1.n + r1.mean * r1.n) / static_cast<double>(l1.n + r1.n),
                            merged_ss(l1, r1)};
    const double tau = c1.mean - c0.mean;
    const double penalty = (c1.ss / static_cast<double>(c1.n)) / p +
                           (c0.ss / static_cast<double>(c0.n)) / (1.0 - p);
    return tau * tau - (2.0 / n) * penalty;
  };
  out.ct_gain_direct = n * (value_split() - value_nosplit());
  return out;
}

}  // namespace causaltree
