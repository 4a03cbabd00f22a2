#include "causaltree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace causaltree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string feature_label(std::size_t f, const std::vector<std::string>& names) {
  if (f < names.size()) return names[f];
  return "x" + std::to_string(f);
}

}  // namespace

void GrowParams::validate() const {
  if (n_min < 2) throw ValidationError("minimum leaf count must be at least 2");
  if (bucket_size < 1) throw ValidationError("bucket size must be at least 1");
  if (max_depth && *max_depth < 0) throw ValidationError("max depth must be nonnegative");
}

NodeId Tree::apply(const double* x) const {
  NodeId id = root;
  while (!node(id).is_leaf()) {
    const Split& s = *node(id).split;
    id = x[s.feature] <= s.threshold ? node(id).left : node(id).right;
  }
  return id;
}

NodeId Tree::apply(const std::vector<double>& x) const {
  if (x.size() != n_features)
    throw ValidationError("covariate vector has wrong dimension");
  return apply(x.data());
}

std::vector<NodeId> Tree::leaf_ids() const {
  std::vector<NodeId> out, stack{root};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (node(id).is_leaf()) {
      out.push_back(id);
    } else {
      stack.push_back(node(id).right);
      stack.push_back(node(id).left);
    }
  }
  return out;
}

std::vector<NodeId> Tree::internal_ids() const {
  std::vector<NodeId> out, stack{root};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (!node(id).is_leaf()) {
      out.push_back(id);
      stack.push_back(node(id).right);
      stack.push_back(node(id).left);
    }
  }
  return out;
}

bool Tree::Box::contains(const double* x) const {
  for (std::size_t f = 0; f < lo.size(); ++f)
    if (!(x[f] > lo[f] && x[f] <= hi[f])) return false;
  return true;
}

Tree::Box Tree::region(NodeId id) const {
  Box box;
  box.lo.assign(n_features, -kInf);
  box.hi.assign(n_features, kInf);
  NodeId cur = id;
  while (node(cur).parent >= 0) {
    const NodeId par = node(cur).parent;
    const Split& s = *node(par).split;
    if (node(par).left == cur) {
      box.hi[s.feature] = std::min(box.hi[s.feature], s.threshold);
    } else {
      box.lo[s.feature] = std::max(box.lo[s.feature], s.threshold);
    }
    cur = par;
  }
  return box;
}

std::string Tree::describe_region(NodeId id,
                                  const std::vector<std::string>& names) const {
  const Box box = region(id);
  std::ostringstream os;
  os.precision(6);
  bool first = true;
  for (std::size_t f = 0; f < n_features; ++f) {
    if (box.lo[f] == -kInf && box.hi[f] == kInf) continue;
    if (!first) os << " & ";
    first = false;
    if (box.lo[f] != -kInf && box.hi[f] != kInf) {
      os << box.lo[f] << " < " << feature_label(f, names) << " <= " << box.hi[f];
    } else if (box.hi[f] != kInf) {
      os << feature_label(f, names) << " <= " << box.hi[f];
    } else {
      os << feature_label(f, names) << " > " << box.lo[f];
    }
  }
  if (first) return "(all)";
  return os.str();
}

// ---------------------------------------------------------------------------
// Candidate split enumeration.

namespace {

// Last index (exclusive) of bucket j when n units are grouped with b per
// bucket into n_buckets buckets; the remainder joins the last bucket.
std::size_t bucket_end(std::size_t j, std::size_t b, std::size_t n_buckets,
                       std::size_t n) {
  return (j + 1 == n_buckets) ? n : (j + 1) * b;
}

// Bucket count for one arm: b observations per bucket, reduced if that yields
// fewer than n_min buckets (b clamped at 1).
std::pair<std::size_t, std::size_t> arm_buckets(std::size_t n, long bucket_size,
                                                long n_min) {
  std::size_t b = static_cast<std::size_t>(bucket_size);
  std::size_t n_buckets = n / b;
  if (n_buckets < static_cast<std::size_t>(n_min)) {
    b = std::max<std::size_t>(1, n / static_cast<std::size_t>(n_min));
    n_buckets = n / b;
  }
  return {b, n_buckets};
}

}  // namespace

std::vector<double> candidate_splits(const CausalDataset& data,
                                     const std::vector<std::size_t>& leaf_indices,
                                     std::size_t feature, const GrowParams& params) {
  params.validate();
  std::vector<double> treat_vals, control_vals;
  for (std::size_t i : leaf_indices)
    (data.treated(i) ? treat_vals : control_vals).push_back(data.covariate(i, feature));

  const long n_min = params.n_min;
  if (static_cast<long>(treat_vals.size()) < 2 * n_min ||
      static_cast<long>(control_vals.size()) < 2 * n_min)
    return {};

  std::sort(treat_vals.begin(), treat_vals.end());
  std::sort(control_vals.begin(), control_vals.end());

  const auto [bt, n_bt] = arm_buckets(treat_vals.size(), params.bucket_size, n_min);
  const auto [bc, n_bc] = arm_buckets(control_vals.size(), params.bucket_size, n_min);
  const std::size_t n_buckets = std::min(n_bt, n_bc);
  if (n_buckets < 2) return {};

  // Moving from one kept threshold to the next must shift at least one unit
  // in each arm; boundaries that fail that (or the child minimums) drop out.
  std::vector<double> thresholds;
  long prev_left_t = 0, prev_left_c = 0;
  for (std::size_t j = 0; j + 1 < n_buckets; ++j) {
    const double max_t = treat_vals[bucket_end(j, bt, n_bt, treat_vals.size()) - 1];
    const double max_c = control_vals[bucket_end(j, bc, n_bc, control_vals.size()) - 1];
    const double thr = 0.5 * (max_t + max_c);

    const long left_t = static_cast<long>(
        std::upper_bound(treat_vals.begin(), treat_vals.end(), thr) - treat_vals.begin());
    const long left_c = static_cast<long>(std::upper_bound(control_vals.begin(),
                                                           control_vals.end(), thr) -
                                          control_vals.begin());
    if (left_t < n_min || left_c < n_min) continue;
    if (static_cast<long>(treat_vals.size()) - left_t < n_min ||
        static_cast<long>(control_vals.size()) - left_c < n_min)
      continue;
    if (left_t <= prev_left_t || left_c <= prev_left_c) continue;
    prev_left_t = left_t;
    prev_left_c = left_c;
    thresholds.push_back(thr);
  }
  return thresholds;
}

std::vector<double> candidate_splits_all_values(
    const CausalDataset& data, const std::vector<std::size_t>& leaf_indices,
    std::size_t feature, long min_total) {
  std::vector<double> vals;
  vals.reserve(leaf_indices.size());
  for (std::size_t i : leaf_indices) vals.push_back(data.covariate(i, feature));
  std::sort(vals.begin(), vals.end());

  std::vector<double> thresholds;
  const long n = static_cast<long>(vals.size());
  for (long i = 0; i + 1 < n; ++i) {
    if (vals[i] == vals[i + 1]) continue;
    const long left = i + 1;
    if (left < min_total || n - left < min_total) continue;
    thresholds.push_back(0.5 * (vals[i] + vals[i + 1]));
  }
  return thresholds;
}

// ---------------------------------------------------------------------------
// Greedy growth.

namespace {

struct BestSplit {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  bool found = false;
};

NodeMoments moments_of(const std::vector<double>& y, const CausalDataset& data,
                       const std::vector<std::size_t>& idx) {
  NodeMoments m;
  for (std::size_t i : idx) (data.treated(i) ? m.treat : m.control).add(y[i]);
  return m;
}

NodeMoments subtract(const NodeMoments& a, const NodeMoments& b) {
  NodeMoments r;
  r.treat.n = a.treat.n - b.treat.n;
  r.treat.sum = a.treat.sum - b.treat.sum;
  r.treat.sumsq = a.treat.sumsq - b.treat.sumsq;
  r.control.n = a.control.n - b.control.n;
  r.control.sum = a.control.sum - b.control.sum;
  r.control.sumsq = a.control.sumsq - b.control.sumsq;
  return r;
}

}  // namespace

Tree grow_tree(const CausalDataset& data, const std::vector<std::size_t>& indices,
               const CriterionSpec& spec, const GrowParams& params) {
  spec.validate();
  params.validate();
  if (indices.empty()) throw ValidationError("cannot grow a tree on an empty sample");

  const bool per_arm = spec.mode == Mode::Treatment && spec.family != Family::TOT;
  const long min_total = spec.family == Family::TOT ? 2 * params.n_min : params.n_min;

  std::vector<double> y;
  if (spec.family == Family::TOT) {
    y = transformed_outcome(data);
  } else {
    y = data.outcomes();
  }

  GrowthContext ctx;
  ctx.n_norm = static_cast<long>(indices.size());
  ctx.n_est = spec.honest ? spec.n_est : ctx.n_norm;
  ctx.p = spec.p;

  Tree tree;
  tree.n_features = data.n_features();

  struct Work {
    NodeId id;
    std::vector<std::size_t> idx;
    int depth;
  };
  std::vector<Work> stack;

  {
    const NodeMoments root_m = moments_of(y, data, indices);
    if (per_arm) {
      if (root_m.treat.n < params.n_min || root_m.control.n < params.n_min)
        throw ValidationError("root violates the per-arm minimum leaf count");
    } else if (root_m.n() < min_total) {
      throw ValidationError("root violates the minimum leaf count");
    }
    tree.nodes.emplace_back();
    stack.push_back({0, indices, 0});
  }

  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();

    const NodeMoments m = moments_of(y, data, w.idx);
    tree.node(w.id).stats = LeafStats::from_moments(m);

    if (params.max_depth && w.depth >= *params.max_depth) continue;

    BestSplit best;
    std::vector<std::pair<double, std::size_t>> order(w.idx.size());
    for (std::size_t f = 0; f < data.n_features(); ++f) {
      const std::vector<double> thresholds =
          per_arm ? candidate_splits(data, w.idx, f, params)
                  : candidate_splits_all_values(data, w.idx, f, min_total);
      if (thresholds.empty()) continue;

      for (std::size_t j = 0; j < w.idx.size(); ++j)
        order[j] = {data.covariate(w.idx[j], f), w.idx[j]};
      std::sort(order.begin(), order.end());

      NodeMoments left;
      std::size_t pos = 0;
      for (double thr : thresholds) {
        while (pos < order.size() && order[pos].first <= thr) {
          const std::size_t i = order[pos].second;
          (data.treated(i) ? left.treat : left.control).add(y[i]);
          ++pos;
        }
        const NodeMoments right = subtract(m, left);
        const double gain = split_gain(spec, ctx, m, left, right);
        if (!best.found || gain > best.gain) {
          best = {gain, static_cast<int>(f), thr, true};
        }
      }
    }

    if (!best.found || !(best.gain > 0.0)) continue;

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : w.idx)
      (data.covariate(i, static_cast<std::size_t>(best.feature)) <= best.threshold
           ? left_idx
           : right_idx)
          .push_back(i);

    const NodeId left_id = static_cast<NodeId>(tree.nodes.size());
    tree.nodes.emplace_back();
    const NodeId right_id = static_cast<NodeId>(tree.nodes.size());
    tree.nodes.emplace_back();
    Node& nd = tree.node(w.id);
    nd.split = Split{best.feature, best.threshold};
    nd.left = left_id;
    nd.right = right_id;
    nd.gain = best.gain;
    tree.node(left_id).parent = w.id;
    tree.node(right_id).parent = w.id;

    stack.push_back({right_id, std::move(right_idx), w.depth + 1});
    stack.push_back({left_id, std::move(left_idx), w.depth + 1});
  }

  return tree;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace {

using nlohmann::json;

json stats_to_json(const LeafStats& s) {
  json j;
  j["n_treat"] = s.n_treat;
  j["n_control"] = s.n_control;
  if (s.n_treat >= 1) j["mean_treat"] = s.mean_treat;
  if (s.n_control >= 1) j["mean_control"] = s.mean_control;
  if (s.n_treat >= 2) j["var_treat"] = s.var_treat;
  if (s.n_control >= 2) j["var_control"] = s.var_control;
  if (s.n() >= 1) j["mean_all"] = s.mean_all;
  if (s.n() >= 2) j["var_all"] = s.var_all;
  j["weight_treat"] = s.weight_treat;
  j["weight_control"] = s.weight_control;
  return j;
}

LeafStats stats_from_json(const json& j) {
  LeafStats s;
  s.n_treat = j.at("n_treat").get<long>();
  s.n_control = j.at("n_control").get<long>();
  if (j.contains("mean_treat")) s.mean_treat = j["mean_treat"].get<double>();
  if (j.contains("mean_control")) s.mean_control = j["mean_control"].get<double>();
  if (j.contains("var_treat")) s.var_treat = j["var_treat"].get<double>();
  if (j.contains("var_control")) s.var_control = j["var_control"].get<double>();
  if (j.contains("mean_all")) s.mean_all = j["mean_all"].get<double>();
  if (j.contains("var_all")) s.var_all = j["var_all"].get<double>();
  if (j.contains("weight_treat")) s.weight_treat = j["weight_treat"].get<double>();
  if (j.contains("weight_control")) s.weight_control = j["weight_control"].get<double>();
  return s;
}

}  // namespace

std::string tree_to_json(const Tree& tree, const std::vector<std::string>& names) {
  json doc;
  doc["format"] = "causaltree-v1";
  doc["k"] = tree.n_features;
  doc["root"] = tree.root;
  if (!names.empty()) doc["feature_names"] = names;

  json nodes = json::array();
  std::vector<NodeId> stack{tree.root};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    const Node& nd = tree.node(id);
    json j;
    j["id"] = id;
    if (nd.is_leaf()) {
      j["leaf"] = stats_to_json(nd.stats);
    } else {
      j["feature"] = nd.split->feature;
      j["threshold"] = nd.split->threshold;
      j["left"] = nd.left;
      j["right"] = nd.right;
      stack.push_back(nd.right);
      stack.push_back(nd.left);
    }
    nodes.push_back(std::move(j));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(2);
}

Tree tree_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid tree JSON: ") + e.what());
  }
  if (!doc.contains("format") || doc["format"] != "causaltree-v1")
    throw ValidationError("unrecognized tree format");

  Tree tree;
  tree.n_features = doc.at("k").get<std::size_t>();
  tree.root = doc.at("root").get<NodeId>();

  NodeId max_id = tree.root;
  for (const json& j : doc.at("nodes")) max_id = std::max(max_id, j.at("id").get<NodeId>());
  tree.nodes.resize(static_cast<std::size_t>(max_id) + 1);

  for (const json& j : doc.at("nodes")) {
    const NodeId id = j.at("id").get<NodeId>();
    Node& nd = tree.node(id);
    if (j.contains("leaf")) {
      nd.stats = stats_from_json(j["leaf"]);
    } else {
      Split s;
      s.feature = j.at("feature").get<int>();
      s.threshold = j.at("threshold").get<double>();
      if (s.feature < 0 || static_cast<std::size_t>(s.feature) >= tree.n_features)
        throw ValidationError("tree JSON references an out-of-range feature");
      nd.split = s;
      nd.left = j.at("left").get<NodeId>();
      nd.right = j.at("right").get<NodeId>();
    }
  }
  for (NodeId id : tree.internal_ids()) {
    const Node& nd = tree.node(id);
    if (nd.left < 0 || nd.right < 0 || nd.left > max_id || nd.right > max_id)
      throw ValidationError("tree JSON references missing children");
    tree.node(nd.left).parent = id;
    tree.node(nd.right).parent = id;
  }
  return tree;
}

std::string tree_to_text(const Tree& tree, const std::vector<std::string>& names) {
  std::ostringstream os;
  os.precision(6);

  struct Item {
    NodeId id;
    int depth;
  };
  std::vector<Item> stack{{tree.root, 0}};
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    const Node& nd = tree.node(it.id);
    for (int d = 0; d < it.depth; ++d) os << "  ";
    if (nd.is_leaf()) {
      os << "leaf " << it.id << ": n=" << nd.stats.n() << " (treat=" << nd.stats.n_treat
         << ", control=" << nd.stats.n_control << ")";
      if (nd.stats.has_arm_means())
        os << " tau_hat=" << nd.stats.mean_treat - nd.stats.mean_control;
      os << "\n";
    } else {
      os << "node " << it.id << ": " << feature_label(nd.split->feature, names)
         << " <= " << nd.split->threshold << " (n=" << nd.stats.n() << ")\n";
      stack.push_back({nd.right, it.depth + 1});
      stack.push_back({nd.left, it.depth + 1});
    }
  }
  return os.str();
}

}  // namespace causaltree
