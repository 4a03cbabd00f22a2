#include "causaltree/prune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "causaltree/rng.hpp"

namespace causaltree {

void CvConfig::validate() const {
  if (folds < 2) throw ValidationError("cross-validation requires at least 2 folds");
}

const Tree& PruneSequence::tree_for(double alpha) const {
  if (entries.empty()) throw ValidationError("empty prune sequence");
  if (alpha < 0.0) throw ValidationError("penalty must be nonnegative");
  std::size_t pick = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].alpha <= alpha) pick = i;
  }
  return entries[pick].tree;
}

std::vector<double> PruneSequence::alphas() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const Entry& e : entries) out.push_back(e.alpha);
  return out;
}

namespace {

// Split gain of an internal node recomputed from the stored training stats
// (same quantity recorded during growth, derived from the node rather than
// the sample so pruning needs no data access).
double node_gain(const Tree& tree, NodeId id, const CriterionSpec& spec,
                 const GrowthContext& ctx) {
  const Node& nd = tree.node(id);
  const LeafStats& ls = tree.node(nd.left).stats;
  const LeafStats& rs = tree.node(nd.right).stats;
  if (spec.family == Family::TS) {
    const double s2 = ts_pooled_variance(ls, rs);
    if (!(s2 > 0.0)) return 0.0;
    return ts_split_stat(ls, rs, s2);
  }
  return split_gain(spec, ctx, nd.stats.to_moments(), ls.to_moments(), rs.to_moments());
}

void collapse(Tree& tree, NodeId id) {
  Node& nd = tree.node(id);
  nd.split.reset();
  nd.left = -1;
  nd.right = -1;
}

// Aggregate gain and leaf count of the live subtree rooted at id.
void subtree_summary(const Tree& tree, NodeId id, const std::vector<double>& gains,
                     double& gain_sum, long& leaves) {
  const Node& nd = tree.node(id);
  if (nd.is_leaf()) {
    ++leaves;
    return;
  }
  gain_sum += gains[static_cast<std::size_t>(id)];
  subtree_summary(tree, nd.left, gains, gain_sum, leaves);
  subtree_summary(tree, nd.right, gains, gain_sum, leaves);
}

}  // namespace

PruneSequence cost_complexity_sequence(const Tree& tree, const CriterionSpec& spec,
                                       long n_train) {
  spec.validate();
  GrowthContext ctx{n_train, spec.honest ? spec.n_est : n_train, spec.p};

  std::vector<double> gains(tree.nodes.size(), 0.0);
  for (NodeId id : tree.internal_ids())
    gains[static_cast<std::size_t>(id)] = node_gain(tree, id, spec, ctx);

  PruneSequence seq;
  Tree work = tree;
  seq.entries.push_back({0.0, work});

  double prev_alpha = 0.0;
  while (true) {
    const std::vector<NodeId> internal = work.internal_ids();
    if (internal.empty()) break;

    double weakest = std::numeric_limits<double>::infinity();
    std::vector<NodeId> weakest_ids;
    for (NodeId id : internal) {
      double gain_sum = 0.0;
      long leaves = 0;
      subtree_summary(work, id, gains, gain_sum, leaves);
      const double g = gain_sum / static_cast<double>(leaves - 1);
      if (g < weakest) {
        weakest = g;
        weakest_ids = {id};
      } else if (g == weakest) {
        weakest_ids.push_back(id);
      }
    }

    for (NodeId id : weakest_ids) collapse(work, id);
    const double alpha = std::max(weakest, prev_alpha);
    if (alpha == seq.entries.back().alpha) {
      seq.entries.back().tree = work;  // merge equal-alpha steps, keep most collapsed
    } else {
      seq.entries.push_back({alpha, work});
    }
    prev_alpha = alpha;
  }
  return seq;
}

Tree prune(const Tree& tree, const CriterionSpec& spec, long n_train, double alpha) {
  return cost_complexity_sequence(tree, spec, n_train).tree_for(alpha);
}

std::vector<CvLeaf> cv_leaves_for_tree(const Tree& tree, const CausalDataset& data,
                                       const std::vector<double>& working_outcome,
                                       const std::vector<std::size_t>& cv_indices,
                                       const CriterionSpec& spec) {
  std::vector<NodeMoments> node_moments(tree.nodes.size());
  std::vector<long> treat_counts(tree.nodes.size(), 0);
  std::vector<long> control_counts(tree.nodes.size(), 0);

  for (std::size_t i : cv_indices) {
    const double yv = working_outcome[i];
    NodeId id = tree.root;
    while (true) {
      NodeMoments& m = node_moments[static_cast<std::size_t>(id)];
      if (data.treated(i)) {
        m.treat.add(yv);
        ++treat_counts[static_cast<std::size_t>(id)];
      } else {
        m.control.add(yv);
        ++control_counts[static_cast<std::size_t>(id)];
      }
      if (tree.node(id).is_leaf()) break;
      const Split& s = *tree.node(id).split;
      id = data.covariate(i, static_cast<std::size_t>(s.feature)) <= s.threshold
               ? tree.node(id).left
               : tree.node(id).right;
    }
  }

  auto sufficient = [&](const NodeMoments& m) {
    switch (spec.family) {
      case Family::TOT:
        return m.n() >= 1;
      case Family::Fit:
      case Family::CT:
      case Family::TS:
        if (spec.mode == Mode::Prediction) return m.n() >= (spec.honest ? 2L : 1L);
        if (spec.honest && spec.family != Family::TS)
          return m.treat.n >= 2 && m.control.n >= 2;
        if (spec.honest && spec.family == Family::TS)
          return m.treat.n >= 2 && m.control.n >= 2;
        return m.treat.n >= 1 && m.control.n >= 1;
    }
    return false;
  };

  std::vector<CvLeaf> out;
  for (NodeId leaf : tree.leaf_ids()) {
    NodeId source = leaf;
    while (!sufficient(node_moments[static_cast<std::size_t>(source)])) {
      const NodeId parent = tree.node(source).parent;
      if (parent < 0)
        throw ValidationError(
            "cross-validation sample cannot support the criterion at the root");
      source = parent;
    }
    CvLeaf l;
    l.cv = LeafStats::from_moments(node_moments[static_cast<std::size_t>(source)]);
    l.train = tree.node(leaf).stats;
    l.w_treat = treat_counts[static_cast<std::size_t>(leaf)];
    l.w_control = control_counts[static_cast<std::size_t>(leaf)];
    l.w_total = l.w_treat + l.w_control;
    out.push_back(std::move(l));
  }
  return out;
}

namespace {

// Fold labels for the training indices; every fold must keep both arms and
// every fold complement must satisfy the root minimums.
std::vector<int> assign_folds(const CausalDataset& data,
                              const std::vector<std::size_t>& train_indices,
                              const CriterionSpec& spec, const GrowParams& params,
                              const CvConfig& cv) {
  const int k = cv.folds;
  const std::size_t n = train_indices.size();
  if (static_cast<std::size_t>(k) > n)
    throw ValidationError("more cross-validation folds than training rows");

  auto eng = make_engine(derive_seed(cv.seed, 0x666f6c64ULL));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  const bool per_arm = spec.mode == Mode::Treatment && spec.family != Family::TOT;
  const long min_total = spec.family == Family::TOT ? 2 * params.n_min : params.n_min;

  for (int attempt = 0; attempt < 100; ++attempt) {
    shuffle_indices(perm.begin(), perm.end(), eng);
    std::vector<int> fold(n);
    for (std::size_t j = 0; j < n; ++j) fold[perm[j]] = static_cast<int>(j % k);

    bool ok = true;
    for (int f = 0; f < k && ok; ++f) {
      long fold_t = 0, fold_c = 0, rest_t = 0, rest_c = 0, rest_n = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const bool treated = data.treated(train_indices[j]);
        if (fold[j] == f) {
          (treated ? fold_t : fold_c) += 1;
        } else {
          (treated ? rest_t : rest_c) += 1;
          ++rest_n;
        }
      }
      if (fold_t < 1 || fold_c < 1) ok = false;
      if (per_arm) {
        if (rest_t < params.n_min || rest_c < params.n_min) ok = false;
      } else if (rest_n < min_total) {
        ok = false;
      }
    }
    if (ok) return fold;
  }
  throw ValidationError("could not build feasible cross-validation folds");
}

}  // namespace

double select_alpha(const CausalDataset& data,
                    const std::vector<std::size_t>& train_indices,
                    const CriterionSpec& spec, const GrowParams& params,
                    const CvConfig& cv) {
  spec.validate();
  params.validate();
  cv.validate();

  const std::vector<int> fold = assign_folds(data, train_indices, spec, params, cv);
  const std::vector<double> working_y = spec.family == Family::TOT
                                            ? transformed_outcome(data)
                                            : data.outcomes();

  struct FoldRun {
    PruneSequence seq;
    std::vector<std::size_t> cv_idx;
  };
  std::vector<FoldRun> runs;
  std::set<double> grid;
  for (int f = 0; f < cv.folds; ++f) {
    FoldRun run;
    std::vector<std::size_t> grow_idx;
    for (std::size_t j = 0; j < train_indices.size(); ++j)
      (fold[j] == f ? run.cv_idx : grow_idx).push_back(train_indices[j]);

    const Tree tree = grow_tree(data, grow_idx, spec, params);
    run.seq = cost_complexity_sequence(tree, spec, static_cast<long>(grow_idx.size()));

    const std::vector<double> alphas = run.seq.alphas();
    for (std::size_t i = 0; i + 1 < alphas.size(); ++i)
      grid.insert(std::sqrt(alphas[i] * alphas[i + 1]));
    grid.insert(alphas.back());
    runs.push_back(std::move(run));
  }

  double best_alpha = 0.0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (double alpha : grid) {
    double total = 0.0;
    for (const FoldRun& run : runs) {
      const Tree& pruned = run.seq.tree_for(alpha);
      const std::vector<CvLeaf> leaves =
          cv_leaves_for_tree(pruned, data, working_y, run.cv_idx, spec);
      total += cv_value(spec, leaves, static_cast<long>(run.cv_idx.size())).value;
    }
    const double value = total / static_cast<double>(runs.size());
    if (value >= best_value) {  // ties resolve toward the larger alpha
      best_value = value;
      best_alpha = alpha;
    }
  }
  return best_alpha;
}

Tree fit_pruned_tree(const CausalDataset& data,
                     const std::vector<std::size_t>& train_indices,
                     const CriterionSpec& spec, const GrowParams& params,
                     const CvConfig& cv) {
  const Tree full = grow_tree(data, train_indices, spec, params);
  const double alpha = select_alpha(data, train_indices, spec, params, cv);
  return cost_complexity_sequence(full, spec, static_cast<long>(train_indices.size()))
      .tree_for(alpha);
}

}  // namespace causaltree
