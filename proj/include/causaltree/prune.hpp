#pragma once

#include <cstdint>
#include <vector>

#include "causaltree/tree.hpp"

namespace causaltree {

// Nested subtree sequence from weakest-link cost-complexity pruning.
// Alphas are strictly increasing; the first entry (alpha 0) is the full tree,
// the last is the root-only tree; each tree is a pruned subtree of its
// predecessor.
struct PruneSequence {
  struct Entry {
    double alpha = 0.0;
    Tree tree;
  };
  std::vector<Entry> entries;

  // The subtree whose alpha interval contains the given alpha.
  const Tree& tree_for(double alpha) const;
  std::vector<double> alphas() const;
};

struct CvConfig {
  int folds = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

// Weakest-link pruning. Per-node split gains are recomputed from the training
// statistics stored on the tree under the given criterion; the node whose
// per-leaf improvement is smallest is collapsed first, at the alpha where
// collapsing becomes optimal for value - alpha * #leaves.
PruneSequence cost_complexity_sequence(const Tree& tree, const CriterionSpec& spec,
                                       long n_train);

Tree prune(const Tree& tree, const CriterionSpec& spec, long n_train, double alpha);

// Cross-validated penalty selection: for each fold, grow a tree on the
// retained folds, build its prune sequence, and score every candidate alpha
// (geometric means of adjacent fold alphas, union across folds) with the
// criterion's cv value on the held-out fold. Returns the alpha maximizing the
// across-fold average, ties broken toward the larger alpha.
double select_alpha(const CausalDataset& data, const std::vector<std::size_t>& train_indices,
                    const CriterionSpec& spec, const GrowParams& params,
                    const CvConfig& cv);

// Convenience pipeline: grow, select alpha by cross-validation, prune.
Tree fit_pruned_tree(const CausalDataset& data,
                     const std::vector<std::size_t>& train_indices,
                     const CriterionSpec& spec, const GrowParams& params,
                     const CvConfig& cv);

// Cross-validation statistics for every leaf of a (pruned) tree: cv units are
// routed through the tree, and leaves whose own cv units cannot support the
// criterion inherit the nearest sufficient ancestor's statistics.
std::vector<CvLeaf> cv_leaves_for_tree(const Tree& tree, const CausalDataset& data,
                                       const std::vector<double>& working_outcome,
                                       const std::vector<std::size_t>& cv_indices,
                                       const CriterionSpec& spec);

}  // namespace causaltree
