#pragma once

#include <span>
#include <vector>

#include "causaltree/stats.hpp"

namespace causaltree {

enum class Family { CT, TOT, Fit, TS };
enum class Mode { Prediction, Treatment };

// Which of the eight estimators drives splitting and cross-validation.
// `p` is the marginal treated share and `n_est` the assumed size of the
// estimation sample (used by the honest variance terms).
struct CriterionSpec {
  Family family = Family::CT;
  bool honest = false;
  Mode mode = Mode::Treatment;
  double p = 0.5;
  long n_est = 0;

  void validate() const;
  // TS splits on the squared t-statistic in both variants; honesty enters only
  // through cross-validation and the estimation sample.
  bool uses_variance_penalty() const {
    return honest && (family == Family::CT || family == Family::Fit);
  }
};

// Criterion values are oriented so that larger is better (negated MSEs).
struct CriterionValue {
  double value = 0.0;
};

// Difference of within-leaf arm means.
double tau_hat(const LeafStats& stats);

// In-sample treatment criterion: (1/N) sum_l n_l * tau_l^2.
CriterionValue adaptive_ct_value(std::span<const LeafStats> leaves, long n_total);

// Estimate of the negated expected MSE under honest re-estimation:
//   (1/N) sum_l n_l tau_l^2
//   - (1/N + 1/n_est) sum_l (S2_treat(l)/p + S2_control(l)/(1-p)).
CriterionValue honest_ct_value(std::span<const LeafStats> leaves, long n_train,
                               long n_est, double p);

// Prediction-mode analogues on pooled leaf means/variances.
CriterionValue adaptive_prediction_value(std::span<const LeafStats> leaves,
                                         long n_total);
CriterionValue honest_prediction_value(std::span<const LeafStats> leaves,
                                       long n_train, long n_est);

// Plain anova criterion on the transformed outcome: (1/N) sum n_l mean_l^2.
CriterionValue tot_value(std::span<const LeafStats> leaves, long n_total);

// Within-leaf model is intercept plus treatment indicator; the criterion is
// the per-arm goodness of fit, with the honest version subtracting
// (1/N + 1/n_est) sum_l (S2_treat + S2_control).
CriterionValue fit_value(std::span<const LeafStats> leaves, bool honest,
                         long n_total, long n_est);

// Unbiased pooled within-(leaf x arm) variance across the four cells of a
// candidate split.
double ts_pooled_variance(const LeafStats& left, const LeafStats& right);

// Squared t-statistic for equality of the two leaves' treatment effects:
//   T^2 = (tau_L - tau_R)^2 / (S2 * (1/n_L1 + 1/n_L0 + 1/n_R1 + 1/n_R0)).
double ts_split_stat(const LeafStats& left, const LeafStats& right,
                     double pooled_variance);

// One leaf of a pruned tree as seen by cross-validation: statistics computed
// on the cv sample next to the statistics the tree carries from training.
// When the leaf's own cv units cannot support the criterion (an arm missing,
// a variance undefined) `cv` holds the nearest sufficient ancestor's
// statistics; the weights always stay the leaf's own cv counts so the fit
// terms still normalize over the cv sample.
struct CvLeaf {
  LeafStats cv;
  LeafStats train;
  long w_total = 0;
  long w_treat = 0;
  long w_control = 0;
};

// Cross-validation criterion. Honest families evaluate their honest criterion
// on the cv-sample statistics alone; adaptive CT/TOT/Fit use the unbiased
// cross-sample form normalized by the cv-sample size; TS delegates to the CT
// criteria.
CriterionValue cv_value(const CriterionSpec& spec, std::span<const CvLeaf> leaves,
                        long n_cv_total);

// ---------------------------------------------------------------------------
// Growth internals: split gains computed from running moments.

struct GrowthContext {
  long n_norm = 0;  // sample size the criterion is normalized by
  long n_est = 0;
  double p = 0.5;
};

// Unnormalized additive per-leaf contribution (not defined for TS).
double leaf_contribution(const CriterionSpec& spec, const GrowthContext& ctx,
                         const NodeMoments& m);

// Criterion improvement of a candidate split; additive families return
// (c(left) + c(right) - c(parent)) / n_norm, TS returns T^2.
double split_gain(const CriterionSpec& spec, const GrowthContext& ctx,
                  const NodeMoments& parent, const NodeMoments& left,
                  const NodeMoments& right);

// ---------------------------------------------------------------------------
// Closed-form identities for a single split on a binary covariate.

struct ComparisonInput {
  std::vector<double> y_left_control;
  std::vector<double> y_left_treat;
  std::vector<double> y_right_control;
  std::vector<double> y_right_treat;
};

// Two algebraic routes to the fit gain and the honest-CT criterion gain.
// The formula route evaluates the closed forms; the direct route evaluates
// the criteria themselves under the same conventions (variance divisors n,
// no degrees-of-freedom correction). On balanced cells both pairs agree to
// floating-point accuracy.
struct ComparisonResult {
  double t0_sq = 0.0;  // control means equal across leaves
  double t1_sq = 0.0;  // treated means equal across leaves
  double t_sq = 0.0;   // treatment effects equal across leaves
  double s_sq_split = 0.0;    // pooled variance given the split (divisor N)
  double s_sq_nosplit = 0.0;  // pooled variance without the split (divisor N)
  double f_formula = 0.0;
  double f_direct = 0.0;
  double ct_gain_formula = 0.0;
  double ct_gain_direct = 0.0;
};

ComparisonResult comparison_identities(const ComparisonInput& input);

}  // namespace causaltree
