#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "causaltree/criteria.hpp"
#include "causaltree/dataset.hpp"
#include "causaltree/stats.hpp"

namespace causaltree {

using NodeId = int;

struct Split {
  int feature = -1;
  double threshold = 0.0;
};

// Tree node. Internal nodes carry a split and children; every node keeps the
// training statistics of its region (of the criterion's working outcome) so
// that any node can serve as a leaf after pruning. `gain` is the criterion
// improvement recorded when the split was chosen.
struct Node {
  std::optional<Split> split;
  NodeId left = -1;
  NodeId right = -1;
  NodeId parent = -1;
  LeafStats stats;
  double gain = 0.0;

  bool is_leaf() const { return !split.has_value(); }
};

// Binary partition of the covariate space. Routing sends x left iff
// x[feature] <= threshold. Node ids are stable across pruning: a pruned tree
// reuses the ids of the tree it was derived from (unreachable nodes are
// simply never visited).
struct Tree {
  std::vector<Node> nodes;
  NodeId root = 0;
  std::size_t n_features = 0;

  const Node& node(NodeId id) const { return nodes[static_cast<std::size_t>(id)]; }
  Node& node(NodeId id) { return nodes[static_cast<std::size_t>(id)]; }

  NodeId apply(const double* x) const;
  NodeId apply(const std::vector<double>& x) const;

  std::vector<NodeId> leaf_ids() const;       // reachable leaves, preorder
  std::vector<NodeId> internal_ids() const;   // reachable internal nodes, preorder
  std::size_t n_leaves() const { return leaf_ids().size(); }

  // Axis-aligned box of a node's region: per-feature (lo, hi] bounds with
  // +-infinity where unconstrained.
  struct Box {
    std::vector<double> lo;
    std::vector<double> hi;
    bool contains(const double* x) const;
  };
  Box region(NodeId id) const;
  std::string describe_region(NodeId id,
                              const std::vector<std::string>& feature_names = {}) const;
};

// Growth controls. n_min is the minimum per-arm leaf count for treatment-mode
// criteria; TOT and prediction-mode growth constrain the total leaf count
// (2 * n_min for TOT, n_min for prediction) instead. Honesty and the assumed
// estimation-sample size live on the CriterionSpec.
struct GrowParams {
  long n_min = 25;
  long bucket_size = 4;
  std::optional<int> max_depth;

  void validate() const;
};

// Candidate thresholds for one feature within a leaf, following the bucket
// scheme: treated and control units are sorted separately, grouped into
// buckets of bucket_size observations (reducing the bucket size to reach at
// least n_min buckets per arm), and each boundary becomes the average of the
// maximum covariate value in the corresponding treated and control buckets.
// Thresholds whose induced children would violate the per-arm n_min, or that
// route identically to an earlier one, are dropped.
std::vector<double> candidate_splits(const CausalDataset& data,
                                     const std::vector<std::size_t>& leaf_indices,
                                     std::size_t feature, const GrowParams& params);

// Candidate thresholds for total-count criteria (TOT, prediction mode):
// midpoints between consecutive distinct values, children constrained to
// min_total units each.
std::vector<double> candidate_splits_all_values(
    const CausalDataset& data, const std::vector<std::size_t>& leaf_indices,
    std::size_t feature, long min_total);

// Greedy recursive growth: at each leaf take the gain-maximizing candidate
// split if its gain is strictly positive (ties broken by lowest feature
// index, then lowest threshold), and recurse. Returns the deep unpruned tree.
Tree grow_tree(const CausalDataset& data, const std::vector<std::size_t>& indices,
               const CriterionSpec& spec, const GrowParams& params);

// Serialization: JSON document with a node list, and an indented text form.
std::string tree_to_json(const Tree& tree,
                         const std::vector<std::string>& feature_names = {});
Tree tree_from_json(const std::string& json_text);
std::string tree_to_text(const Tree& tree,
                         const std::vector<std::string>& feature_names = {});

}  // namespace causaltree
