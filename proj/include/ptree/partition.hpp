#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "ptree/base_measure.hpp"
#include "ptree/dataset.hpp"
#include "ptree/errors.hpp"

// Recursive dyadic partition trees over a rectangular sample space.
//
// Two splitting modes are supported:
//  - MedianOnData: each node is cut at an observed order statistic (the
//    empirical p-quantile, p = 0.5 by default). The splitting observation is
//    removed from both children; in d dimensions one candidate anchor per
//    dimension is selected and all d anchors are removed from every child.
//    Observations tied with the cut value are removed as well.
//  - FixedMidpoint: each node is cut at the geometric midpoint of its extent;
//    nothing is removed, and a point sitting exactly on a cut goes left.
//
// Nodes record child counts for every dimension, not just the realized split
// dimension, so that models with latent splitting directions can reuse them.

namespace ptree {

enum class SplitMode { MedianOnData, FixedMidpoint };

struct PartitionNode {
  Region region;
  int depth = 0;
  std::int64_t n_total = 0;

  // Realized split (round-robin over dimensions for d > 1). -1 on leaves.
  int split_dim = -1;
  double cut = 0.0;
  std::int64_t order_index = 0;  // k(A), MedianOnData only

  // Per-dimension candidate cuts and the child counts they induce.
  // removed[j] counts anchors plus duplicates excluded on dimension j.
  std::vector<double> anchor_cuts;
  std::vector<std::int64_t> counts_left, counts_right, removed;

  int left = -1, right = -1;

  bool is_leaf() const { return split_dim < 0; }
};

struct PartitionTree {
  SplitMode mode = SplitMode::MedianOnData;
  int max_depth = 0;
  double quantile = 0.5;
  std::size_t dim = 1;
  std::int64_t n = 0;
  Region bounds;
  std::vector<PartitionNode> nodes;  // preorder, root at index 0

  const PartitionNode& root() const { return nodes.front(); }
  const PartitionNode& node(int id) const { return nodes[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes.size(); }

  // Index of the child of `node` on the side containing coordinate x along
  // the realized split. Median cuts send the (removed) cut value right by
  // the strict `<` rule; midpoint cuts send it left.
  int descend(const PartitionNode& nd, double x) const {
    bool go_left = mode == SplitMode::FixedMidpoint ? x <= nd.cut : x < nd.cut;
    return go_left ? nd.left : nd.right;
  }
};

inline std::int64_t quantile_order_index(std::int64_t n, double p) {
  auto k = static_cast<std::int64_t>(std::ceil(static_cast<double>(n) * p));
  return std::min(std::max<std::int64_t>(k, 1), n);
}

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, SplitMode mode, int max_depth, double quantile,
              bool split_small_nodes)
      : data_(data), mode_(mode), max_depth_(max_depth), quantile_(quantile) {
    if (max_depth < 0) throw depth_negative("max_depth must be >= 0");
    if (!data.bounds.valid()) throw empty_domain("sample space is degenerate");
    if (mode == SplitMode::MedianOnData && !(quantile > 0.0 && quantile < 1.0))
      throw config_error("split quantile must lie in (0,1)");
    leaf_cutoff_ = 1;
    if (mode == SplitMode::MedianOnData && !split_small_nodes)
      leaf_cutoff_ = static_cast<std::int64_t>(data.d);
  }

  PartitionTree build() {
    PartitionTree tree;
    tree.mode = mode_;
    tree.max_depth = max_depth_;
    tree.quantile = quantile_;
    tree.dim = data_.d;
    tree.n = static_cast<std::int64_t>(data_.n);
    tree.bounds = data_.bounds;
    std::vector<std::int64_t> ids(data_.n);
    for (std::size_t i = 0; i < data_.n; ++i) ids[i] = static_cast<std::int64_t>(i);
    grow(std::move(ids), data_.bounds, 0);
    tree.nodes = std::move(nodes_);
    return tree;
  }

 private:
  double coord(std::int64_t id, std::size_t j) const {
    return data_.at(static_cast<std::size_t>(id), j);
  }

  int grow(std::vector<std::int64_t> ids, Region region, int depth) {
    const std::size_t d = data_.d;
    int self = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    {
      PartitionNode& nd = nodes_.back();
      nd.region = region;
      nd.depth = depth;
      nd.n_total = static_cast<std::int64_t>(ids.size());
    }
    auto n = static_cast<std::int64_t>(ids.size());
    bool leaf = depth >= max_depth_ || (mode_ == SplitMode::MedianOnData ? n <= leaf_cutoff_ : n <= 1);
    if (leaf) return self;

    std::vector<double> cuts(d);
    std::vector<std::int64_t> anchor_ids;
    std::int64_t k = 0;
    if (mode_ == SplitMode::MedianOnData) {
      k = quantile_order_index(n, quantile_);
      std::vector<std::int64_t> scratch = ids;
      for (std::size_t j = 0; j < d; ++j) {
        auto cmp = [&](std::int64_t a, std::int64_t b) {
          double xa = coord(a, j), xb = coord(b, j);
          return xa < xb || (xa == xb && a < b);
        };
        std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end(), cmp);
        std::int64_t aid = scratch[static_cast<std::size_t>(k - 1)];
        cuts[j] = coord(aid, j);
        if (std::find(anchor_ids.begin(), anchor_ids.end(), aid) == anchor_ids.end())
          anchor_ids.push_back(aid);
      }
    } else {
      for (std::size_t j = 0; j < d; ++j) cuts[j] = 0.5 * (region.lower[j] + region.upper[j]);
    }

    // Per-dimension child counts, excluding anchors and cut-value ties in
    // MedianOnData mode.
    std::vector<std::int64_t> cl(d, 0), cr(d, 0);
    for (std::size_t j = 0; j < d; ++j) {
      for (std::int64_t id : ids) {
        if (mode_ == SplitMode::MedianOnData) {
          if (std::find(anchor_ids.begin(), anchor_ids.end(), id) != anchor_ids.end()) continue;
          double x = coord(id, j);
          if (x < cuts[j]) ++cl[j];
          else if (x > cuts[j]) ++cr[j];
        } else {
          if (coord(id, j) <= cuts[j]) ++cl[j];
          else ++cr[j];
        }
      }
    }

    int jr = depth % static_cast<int>(d);  // realized split dimension
    if (mode_ == SplitMode::MedianOnData &&
        !(cuts[static_cast<std::size_t>(jr)] > region.lower[static_cast<std::size_t>(jr)] &&
          cuts[static_cast<std::size_t>(jr)] < region.upper[static_cast<std::size_t>(jr)]))
      throw zero_mass("split coincides with region boundary on dimension " + std::to_string(jr));

    {
      PartitionNode& nd = nodes_[static_cast<std::size_t>(self)];
      nd.split_dim = jr;
      nd.cut = cuts[static_cast<std::size_t>(jr)];
      nd.order_index = k;
      nd.anchor_cuts = cuts;
      nd.counts_left = cl;
      nd.counts_right = cr;
      nd.removed.resize(d);
      for (std::size_t j = 0; j < d; ++j) nd.removed[j] = n - cl[j] - cr[j];
    }

    std::vector<std::int64_t> left_ids, right_ids;
    left_ids.reserve(static_cast<std::size_t>(cl[static_cast<std::size_t>(jr)]));
    right_ids.reserve(static_cast<std::size_t>(cr[static_cast<std::size_t>(jr)]));
    double cut = cuts[static_cast<std::size_t>(jr)];
    for (std::int64_t id : ids) {
      double x = coord(id, static_cast<std::size_t>(jr));
      if (mode_ == SplitMode::MedianOnData) {
        if (std::find(anchor_ids.begin(), anchor_ids.end(), id) != anchor_ids.end()) continue;
        if (x < cut) left_ids.push_back(id);
        else if (x > cut) right_ids.push_back(id);
      } else {
        (x <= cut ? left_ids : right_ids).push_back(id);
      }
    }
    ids.clear();
    ids.shrink_to_fit();

    Region lregion = region, rregion = region;
    lregion.upper[static_cast<std::size_t>(jr)] = cut;
    rregion.lower[static_cast<std::size_t>(jr)] = cut;

    int lid = grow(std::move(left_ids), std::move(lregion), depth + 1);
    int rid = grow(std::move(right_ids), std::move(rregion), depth + 1);
    nodes_[static_cast<std::size_t>(self)].left = lid;
    nodes_[static_cast<std::size_t>(self)].right = rid;
    return self;
  }

  const Dataset& data_;
  SplitMode mode_;
  int max_depth_;
  double quantile_;
  std::int64_t leaf_cutoff_;
  std::vector<PartitionNode> nodes_;
};

}  // namespace detail

// Data-dependent tree: cuts at the empirical p-quantile of each node, with
// the splitting observations removed from the children.
inline PartitionTree build_partial_tree(const Dataset& data, int max_depth, double quantile = 0.5,
                                        bool split_small_nodes = false) {
  return detail::TreeBuilder(data, SplitMode::MedianOnData, max_depth, quantile, split_small_nodes)
      .build();
}

// Fixed dyadic tree: midpoint cuts, nothing removed.
inline PartitionTree build_fixed_tree(const Dataset& data, int max_depth) {
  return detail::TreeBuilder(data, SplitMode::FixedMidpoint, max_depth, 0.5, false).build();
}

// Conditional base masses (H(A_{j,l}|A), H(A_{j,r}|A)) of the two children
// induced by the node's candidate cut on dimension j.
inline std::pair<double, double> node_base_mass(const PartitionNode& node, const BaseMeasure& base,
                                                std::size_t j) {
  if (node.is_leaf()) throw config_error("node_base_mass: leaf node has no cut");
  double left = base.conditional_left(j, node.region.lower[j], node.region.upper[j], node.anchor_cuts[j]);
  return {left, 1.0 - left};
}

}  // namespace ptree
