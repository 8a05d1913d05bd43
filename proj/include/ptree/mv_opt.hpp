#pragma once

#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ptree/grid.hpp"
#include "ptree/latent.hpp"
#include "ptree/numeric.hpp"
#include "ptree/partition.hpp"
#include "ptree/pt_kernel.hpp"
#include "ptree/rng.hpp"

// Multivariate trees with latent splitting dimensions J(A) and latent Markov
// states S(A). The exact joint posterior of (J, S) requires message passing
// over every node reachable by any sequence of (dimension, side) choices.
//
// Under median splits the cuts do not commute across dimensions, so the
// expansion is a tree over such sequences, pruned where n(A) <= d (fewer
// points than anchors) or at max_depth; its size is O((2d)^depth) and a node
// budget guards against runaway configurations. Under midpoint splits cuts
// do commute, distinct sequences reach identical dyadic rectangles, and
// region-keyed memoization collapses the expansion into a DAG.
//
// The posterior is used two ways: exact joint transition matrices per node,
// and top-down Monte Carlo tree draws whose tree-conditional predictives are
// averaged into the posterior-mean density.

namespace ptree {

struct SplitPrior {
  std::vector<double> lambda;

  static SplitPrior uniform(std::size_t d) {
    return SplitPrior{std::vector<double>(d, 1.0 / static_cast<double>(d))};
  }

  void validate(std::size_t d) const {
    if (lambda.size() != d) throw config_error("SplitPrior: need one weight per dimension");
    double sum = 0.0;
    for (double w : lambda) {
      if (w < 0.0) throw config_error("SplitPrior: negative weight");
      sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw config_error("SplitPrior: weights must sum to 1");
  }
};

inline std::size_t default_node_budget() {
  if (const char* env = std::getenv("PTREE_NODE_BUDGET")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 2'000'000;
}

struct MvOptions {
  int max_depth = 6;
  double quantile = 0.5;
  SplitMode mode = SplitMode::MedianOnData;
  std::size_t node_budget = 0;   // 0: PTREE_NODE_BUDGET or 2e6
  bool memoize = true;           // midpoint-mode DAG collapse
  std::int64_t leaf_cutoff = -1; // -1: d under median splits, 1 under midpoint
};

struct MvNode {
  Region region;
  int depth = 0;
  std::int64_t n = 0;
  bool leaf = true;
  // Per-dimension split data (empty on leaves).
  std::vector<double> cut, hmass_left;
  std::vector<std::int64_t> cl, cr;
  std::vector<int> left, right;
  std::vector<double> log_eta;  // d * S, own-state indexed; 0 for stopping states
  std::vector<double> log_phi;  // S, parent-state indexed
};

struct JointPosterior {
  SplitMode mode = SplitMode::MedianOnData;
  int max_depth = 0;
  double quantile = 0.5;
  std::size_t dim = 1;
  std::int64_t n = 0;
  BaseMeasure base;
  StateModel states;
  SplitPrior split_prior;
  std::vector<MvNode> nodes;  // root at 0
  std::int64_t pruned_count = 0;  // leaves forced by the point-count cutoff

  double log_phi_entry() const {
    return nodes.front().log_phi[static_cast<std::size_t>(states.entry_state)];
  }

  const Region& bounds() const { return base.bounds; }

  // P(J(A)=j', S(A)=s' | S(A_p)=s, x) as a d x S row (flat j'*S+s').
  void joint_transition(int node_id, int parent_state, std::span<double> out) const {
    const MvNode& nd = nodes[static_cast<std::size_t>(node_id)];
    auto S = static_cast<std::size_t>(states.n_states);
    double lphi = nd.log_phi[static_cast<std::size_t>(parent_state)];
    for (std::size_t j = 0; j < dim; ++j) {
      for (std::size_t t = 0; t < S; ++t) {
        double rho = states.rho_at(parent_state, static_cast<int>(t));
        double lam = split_prior.lambda[j];
        double v = 0.0;
        if (rho > 0.0 && lam > 0.0 && !nd.leaf) {
          double num = std::log(lam) + std::log(rho) + nd.log_eta[j * S + t] +
                       nodes[static_cast<std::size_t>(nd.left[j])].log_phi[t] +
                       nodes[static_cast<std::size_t>(nd.right[j])].log_phi[t];
          v = std::exp(num - lphi);
        }
        out[j * S + t] = v;
      }
    }
  }
};

namespace detail {

struct DyadicKey {  // exact integer identity of a midpoint-split rectangle
  std::vector<std::uint64_t> words;  // per dim: (level << 48) | index
  bool operator==(const DyadicKey& o) const { return words == o.words; }
};
struct DyadicKeyHash {
  std::size_t operator()(const DyadicKey& k) const {
    std::uint64_t h = 0x51ed270b3a2c3577ULL;
    for (std::uint64_t w : k.words) h = mix64(h ^ w);
    return static_cast<std::size_t>(h);
  }
};

class MvExpander {
 public:
  MvExpander(const Dataset& data, const BaseMeasure& base, const StateModel& states,
             const SplitPrior& split_prior, const MvOptions& opt, const BetaGrid* grid)
      : data_(data), base_(base), states_(states), lambda_(split_prior), opt_(opt), grid_(grid) {
    states_.validate();
    lambda_.validate(data.d);
    if (opt.max_depth < 0) throw depth_negative("max_depth must be >= 0");
    if (!data.bounds.valid()) throw empty_domain("sample space is degenerate");
    budget_ = opt.node_budget ? opt.node_budget : default_node_budget();
    cutoff_ = opt.leaf_cutoff >= 0 ? opt.leaf_cutoff
                                   : (opt.mode == SplitMode::MedianOnData
                                          ? static_cast<std::int64_t>(data.d)
                                          : 1);
  }

  JointPosterior run() {
    JointPosterior post;
    post.mode = opt_.mode;
    post.max_depth = opt_.max_depth;
    post.quantile = opt_.quantile;
    post.dim = data_.d;
    post.n = static_cast<std::int64_t>(data_.n);
    post.base = base_;
    post.states = states_;
    post.split_prior = lambda_;
    std::vector<std::int64_t> ids(data_.n);
    for (std::size_t i = 0; i < data_.n; ++i) ids[i] = static_cast<std::int64_t>(i);
    DyadicKey key;
    key.words.assign(data_.d, 0);
    expand(std::move(ids), data_.bounds, key, 0);
    post.nodes = std::move(nodes_);
    post.pruned_count = pruned_;
    return post;
  }

 private:
  double coord(std::int64_t id, std::size_t j) const {
    return data_.at(static_cast<std::size_t>(id), j);
  }

  int expand(std::vector<std::int64_t> ids, Region region, const DyadicKey& key, int depth) {
    const std::size_t d = data_.d;
    const auto S = static_cast<std::size_t>(states_.n_states);
    if (opt_.mode == SplitMode::FixedMidpoint && opt_.memoize) {
      auto it = memo_.find(key);
      if (it != memo_.end()) return it->second;
    }
    int self = static_cast<int>(nodes_.size());
    if (nodes_.size() >= budget_)
      throw node_budget_exceeded("expansion exceeds node budget at depth " + std::to_string(depth));
    nodes_.emplace_back();
    if (opt_.mode == SplitMode::FixedMidpoint && opt_.memoize) memo_.emplace(key, self);
    {
      MvNode& nd = nodes_.back();
      nd.region = region;
      nd.depth = depth;
      nd.n = static_cast<std::int64_t>(ids.size());
      nd.log_phi.assign(S, 0.0);
    }
    auto n = static_cast<std::int64_t>(ids.size());
    if (n <= cutoff_ || depth >= opt_.max_depth) {
      if (n <= cutoff_ && depth < opt_.max_depth) ++pruned_;
      return self;
    }

    std::vector<double> cuts(d), hmass(d);
    std::vector<std::int64_t> anchor_ids;
    if (opt_.mode == SplitMode::MedianOnData) {
      std::int64_t k = quantile_order_index(n, opt_.quantile);
      std::vector<std::int64_t> scratch = ids;
      for (std::size_t j = 0; j < d; ++j) {
        auto cmp = [&](std::int64_t a, std::int64_t b) {
          double xa = coord(a, j), xb = coord(b, j);
          return xa < xb || (xa == xb && a < b);
        };
        std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end(), cmp);
        std::int64_t aid = scratch[static_cast<std::size_t>(k - 1)];
        cuts[j] = coord(aid, j);
        if (!(cuts[j] > region.lower[j] && cuts[j] < region.upper[j]))
          throw zero_mass("split coincides with region boundary on dimension " + std::to_string(j));
        if (std::find(anchor_ids.begin(), anchor_ids.end(), aid) == anchor_ids.end())
          anchor_ids.push_back(aid);
      }
    } else {
      for (std::size_t j = 0; j < d; ++j) cuts[j] = 0.5 * (region.lower[j] + region.upper[j]);
    }

    std::vector<std::int64_t> cl(d, 0), cr(d, 0);
    for (std::size_t j = 0; j < d; ++j) {
      hmass[j] = base_.conditional_left(j, region.lower[j], region.upper[j], cuts[j]);
      for (std::int64_t id : ids) {
        if (opt_.mode == SplitMode::MedianOnData) {
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

    {
      MvNode& nd = nodes_[static_cast<std::size_t>(self)];
      nd.leaf = false;
      nd.cut = cuts;
      nd.hmass_left = hmass;
      nd.cl = cl;
      nd.cr = cr;
      nd.left.assign(d, -1);
      nd.right.assign(d, -1);
      nd.log_eta.assign(d * S, 0.0);
    }

    for (std::size_t j = 0; j < d; ++j) {
      for (int side = 0; side < 2; ++side) {
        std::vector<std::int64_t> child_ids;
        child_ids.reserve(static_cast<std::size_t>(side == 0 ? cl[j] : cr[j]));
        for (std::int64_t id : ids) {
          double x = coord(id, j);
          if (opt_.mode == SplitMode::MedianOnData) {
            if (std::find(anchor_ids.begin(), anchor_ids.end(), id) != anchor_ids.end()) continue;
            if (side == 0 ? x < cuts[j] : x > cuts[j]) child_ids.push_back(id);
          } else {
            if (side == 0 ? x <= cuts[j] : x > cuts[j]) child_ids.push_back(id);
          }
        }
        Region child_region = nodes_[static_cast<std::size_t>(self)].region;
        DyadicKey child_key = key;
        if (side == 0) child_region.upper[j] = cuts[j];
        else child_region.lower[j] = cuts[j];
        std::uint64_t w = key.words[j];
        std::uint64_t level = (w >> 48) + 1, index = ((w & 0xFFFFFFFFFFFFULL) << 1) | (side == 0 ? 0u : 1u);
        child_key.words[j] = (level << 48) | index;
        int cid = expand(std::move(child_ids), std::move(child_region), child_key, depth + 1);
        MvNode& nd = nodes_[static_cast<std::size_t>(self)];
        (side == 0 ? nd.left : nd.right)[j] = cid;
      }
    }

    // Bottom-up messages now that all children exist.
    MvNode& nd = nodes_[static_cast<std::size_t>(self)];
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t t = 0; t < S; ++t) {
        if (states_.is_stopping(static_cast<int>(t))) continue;
        nd.log_eta[j * S + t] =
            node_evidence(states_.conc[t].at(depth), nd.hmass_left[j], nd.cl[j], nd.cr[j], grid_)
                .log_eta;
      }
    }
    std::vector<double> terms(d * S);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t t = 0; t < S; ++t) {
          double rho = states_.rho_at(static_cast<int>(s), static_cast<int>(t));
          double lam = lambda_.lambda[j];
          terms[j * S + t] =
              rho > 0.0 && lam > 0.0
                  ? std::log(lam) + std::log(rho) + nd.log_eta[j * S + t] +
                        nodes_[static_cast<std::size_t>(nd.left[j])].log_phi[t] +
                        nodes_[static_cast<std::size_t>(nd.right[j])].log_phi[t]
                  : kNegInf;
        }
      }
      double lp = log_sum_exp(terms);
      if (!std::isfinite(lp)) throw numerical_underflow("expand_and_pass: phi underflowed");
      nd.log_phi[s] = lp;
    }
    return self;
  }

  const Dataset& data_;
  BaseMeasure base_;
  StateModel states_;
  SplitPrior lambda_;
  MvOptions opt_;
  const BetaGrid* grid_;
  std::size_t budget_ = 0;
  std::int64_t cutoff_ = 1;
  std::int64_t pruned_ = 0;
  std::vector<MvNode> nodes_;
  std::unordered_map<DyadicKey, int, DyadicKeyHash> memo_;
};

}  // namespace detail

// Enumerate all reachable nodes and run the bottom-up phi_s recursion over
// the expansion, materializing everything the joint (J,S) posterior needs.
inline JointPosterior expand_and_pass(const Dataset& data, const BaseMeasure& base,
                                      const StateModel& states, const SplitPrior& split_prior,
                                      const MvOptions& opt, const BetaGrid* grid = nullptr) {
  return detail::MvExpander(data, base, states, split_prior, opt, grid).run();
}

// A realized tree drawn from the joint posterior. dim < 0 marks terminal
// nodes (stopped, pruned or at max depth); state < 0 marks nodes where no
// latent state was drawn because the expansion node is itself terminal.
struct SampledNode {
  int node_id = 0;
  int state = -1;
  int dim = -1;
  int left = -1, right = -1;
};
struct SampledTree {
  std::vector<SampledNode> nodes;  // root at 0
};

inline SampledTree sample_tree(const JointPosterior& post, Rng& rng) {
  SampledTree tree;
  auto S = static_cast<std::size_t>(post.states.n_states);
  std::vector<double> row(post.dim * S);
  // Explicit stack; each frame fills in a child slot of its parent.
  struct Frame { int node_id, parent_state, parent_slot; };
  std::vector<Frame> stack{{0, post.states.entry_state, -1}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    const MvNode& nd = post.nodes[static_cast<std::size_t>(f.node_id)];
    int self = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(SampledNode{f.node_id, -1, -1, -1, -1});
    if (f.parent_slot >= 0) {
      SampledNode& parent = tree.nodes[static_cast<std::size_t>(f.parent_slot >> 1)];
      (f.parent_slot & 1 ? parent.right : parent.left) = self;
    }
    if (nd.leaf) continue;
    post.joint_transition(f.node_id, f.parent_state, row);
    double u = rng.uniform(), acc = 0.0;
    std::size_t pick = row.size() - 1;
    for (std::size_t i = 0; i < row.size(); ++i) {
      acc += row[i];
      if (u <= acc) { pick = i; break; }
    }
    int j = static_cast<int>(pick / S), t = static_cast<int>(pick % S);
    tree.nodes[static_cast<std::size_t>(self)].state = t;
    if (post.states.is_stopping(t)) continue;
    tree.nodes[static_cast<std::size_t>(self)].dim = j;
    // Right pushed first so the left subtree is laid out first (DFS order).
    stack.push_back(Frame{nd.right[static_cast<std::size_t>(j)], t, (self << 1) | 1});
    stack.push_back(Frame{nd.left[static_cast<std::size_t>(j)], t, self << 1});
  }
  return tree;
}

inline SampledTree sample_tree(const JointPosterior& post, std::uint64_t seed) {
  Rng rng(seed);
  return sample_tree(post, rng);
}

namespace detail {

// Adds value * (overlap fraction of `region` with each cell) over a window
// of dimension-0 rows. Grid outputs are cell averages of the piecewise
// density, so interior cells receive the full value and boundary cells the
// exact partial overlap; summing a whole grid then reproduces the exact
// integral of the piecewise function.
inline void add_region_average(const GridSpec& grid, const Region& region, double value,
                               std::int64_t row_begin, std::int64_t row_end, std::span<double> out) {
  std::size_t d = grid.dim();
  std::vector<std::vector<double>> weights(d);
  std::vector<std::int64_t> first(d);
  for (std::size_t j = 0; j < d; ++j) {
    double w = grid.cell_width(j), lo = grid.bounds.lower[j];
    double a = (region.lower[j] - lo) / w, b = (region.upper[j] - lo) / w;
    a = std::max(a, 0.0);
    b = std::min(b, static_cast<double>(grid.resolution[j]));
    if (j == 0) {
      a = std::max(a, static_cast<double>(row_begin));
      b = std::min(b, static_cast<double>(row_end));
    }
    if (!(a < b)) return;
    auto i0 = static_cast<std::int64_t>(std::floor(a));
    auto i1 = static_cast<std::int64_t>(std::ceil(b));
    first[j] = i0;
    weights[j].resize(static_cast<std::size_t>(i1 - i0));
    for (std::int64_t i = i0; i < i1; ++i) {
      double frac = std::min(b, static_cast<double>(i + 1)) - std::max(a, static_cast<double>(i));
      weights[j][static_cast<std::size_t>(i - i0)] = std::max(frac, 0.0);
    }
  }
  // strides over the windowed output layout (dimension 0 offset by row_begin)
  std::vector<std::size_t> stride(d, 1);
  for (std::size_t j = d - 1; j-- > 0;)
    stride[j] = stride[j + 1] * static_cast<std::size_t>(grid.resolution[j + 1]);
  std::vector<std::size_t> idx(d, 0);
  for (;;) {
    std::size_t base = 0;
    double factor = value;
    for (std::size_t j = 0; j + 1 < d; ++j) {
      base += (static_cast<std::size_t>(first[j] - (j == 0 ? row_begin : 0)) + idx[j]) * stride[j];
      factor *= weights[j][idx[j]];
    }
    double* row = out.data() + base + static_cast<std::size_t>(first[d - 1] - (d == 1 ? row_begin : 0));
    const std::vector<double>& wlast = weights[d - 1];
    for (std::size_t i = 0; i < wlast.size(); ++i) row[i] += factor * wlast[i];
    std::size_t j = d - 1;
    for (;;) {
      if (j == 0) return;
      --j;
      if (++idx[j] < weights[j].size()) break;
      idx[j] = 0;
    }
  }
}

}  // namespace detail

namespace detail {

inline void exact_xi(const JointPosterior& post, int node_id, const double* x, std::span<double> out,
                     std::vector<double>& scratch) {
  const MvNode& nd = post.nodes[static_cast<std::size_t>(node_id)];
  auto S = static_cast<std::size_t>(post.states.n_states);
  if (nd.leaf) {
    for (std::size_t s = 0; s < S; ++s) out[s] = 1.0;
    return;
  }
  bool midpoint_mode = post.mode == SplitMode::FixedMidpoint;
  std::size_t d = post.dim;
  // xi of the child containing x, per dimension and child state
  std::vector<double> child_xi(d * S);
  std::vector<bool> go_left(d);
  for (std::size_t j = 0; j < d; ++j) {
    go_left[j] = midpoint_mode ? x[j] <= nd.cut[j] : x[j] < nd.cut[j];
    int child = go_left[j] ? nd.left[j] : nd.right[j];
    exact_xi(post, child, x, std::span<double>(child_xi.data() + j * S, S), scratch);
  }
  std::vector<double>& row = scratch;
  row.resize(d * S);
  for (std::size_t s = 0; s < S; ++s) {
    post.joint_transition(node_id, static_cast<int>(s), row);
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t t = 0; t < S; ++t) {
        double p = row[j * S + t];
        if (p <= 0.0) continue;
        if (post.states.is_stopping(static_cast<int>(t))) {
          acc += p;
          continue;
        }
        double hl = nd.hmass_left[j];
        double c = post.states.conc[t].at(nd.depth);
        double al = c * hl + static_cast<double>(nd.cl[j]);
        double ar = c * (1.0 - hl) + static_cast<double>(nd.cr[j]);
        double mean = go_left[j] ? al / (al + ar) : ar / (al + ar);
        double ratio = mean / (go_left[j] ? hl : 1.0 - hl);
        acc += p * ratio * child_xi[j * S + t];
      }
    }
    out[s] = acc;
  }
}

}  // namespace detail

// Exact posterior predictive density at a point, marginalizing the latent
// (J, S) process by recursing over the cone of expansion nodes whose
// branches contain x. Costs O(d^depth) node visits, so it suits shallow
// fits and test comparisons; the Monte Carlo average is the scalable path.
inline double predictive_density_exact(const JointPosterior& post, const double* x) {
  if (!post.bounds().contains(x)) throw out_of_domain("predictive_density_exact: query outside sample space");
  auto S = static_cast<std::size_t>(post.states.n_states);
  std::vector<double> xi(S), scratch;
  detail::exact_xi(post, 0, x, xi, scratch);
  return xi[static_cast<std::size_t>(post.states.entry_state)] * post.base.density(x);
}

// A sampled tree together with one branch probability per sampled node:
// either the posterior mean (tree-conditional posterior predictive) or a
// conjugate beta posterior draw (full posterior density draw). The density
// ratio against the base measure is the product of (mass/H) factors along
// each branch; the same draw can be pushed onto a grid or evaluated at
// arbitrary points.
struct DensityDraw {
  SampledTree tree;
  std::vector<double> left_mass;  // per sampled node; unused on terminals
};

inline DensityDraw make_density_draw(const JointPosterior& post, Rng& rng, bool sample_betas) {
  DensityDraw draw;
  draw.tree = sample_tree(post, rng);
  draw.left_mass.assign(draw.tree.nodes.size(), 0.5);
  for (std::size_t i = 0; i < draw.tree.nodes.size(); ++i) {
    const SampledNode& sn = draw.tree.nodes[i];
    if (sn.dim < 0) continue;
    const MvNode& nd = post.nodes[static_cast<std::size_t>(sn.node_id)];
    auto j = static_cast<std::size_t>(sn.dim);
    double hl = nd.hmass_left[j];
    double c = post.states.conc[static_cast<std::size_t>(sn.state)].at(nd.depth);
    double al = c * hl + static_cast<double>(nd.cl[j]);
    double ar = c * (1.0 - hl) + static_cast<double>(nd.cr[j]);
    draw.left_mass[i] = sample_betas ? rng.beta(al, ar) : al / (al + ar);
  }
  return draw;
}

// Adds the draw's density ratio, averaged within each grid cell, onto a
// window of dimension-0 rows of the grid (the full grid by default).
// Terminal regions tile the sample space, so the grid values are exact cell
// averages of the piecewise-constant draw and their Riemann sum recovers
// its integral exactly.
inline void accumulate_draw(const JointPosterior& post, const DensityDraw& draw, const GridSpec& grid,
                            std::span<double> out, std::int64_t row_begin = 0,
                            std::int64_t row_end = -1) {
  if (row_end < 0) row_end = grid.resolution[0];
  struct Frame {
    int snode;
    double product;
  };
  std::vector<Frame> stack{{0, 1.0}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    const SampledNode& sn = draw.tree.nodes[static_cast<std::size_t>(f.snode)];
    const MvNode& nd = post.nodes[static_cast<std::size_t>(sn.node_id)];
    if (sn.dim < 0) {  // terminal: constant ratio over the region
      detail::add_region_average(grid, nd.region, f.product, row_begin, row_end, out);
      continue;
    }
    auto j = static_cast<std::size_t>(sn.dim);
    double hl = nd.hmass_left[j], hr = 1.0 - hl;
    double left_mass = draw.left_mass[static_cast<std::size_t>(f.snode)];
    stack.push_back(Frame{sn.right, f.product * ((1.0 - left_mass) / hr)});
    stack.push_back(Frame{sn.left, f.product * (left_mass / hl)});
  }
}

// Density ratio of the draw at a single point.
inline double eval_draw(const JointPosterior& post, const DensityDraw& draw, const double* x) {
  bool midpoint_mode = post.mode == SplitMode::FixedMidpoint;
  int s = 0;
  double product = 1.0;
  for (;;) {
    const SampledNode& sn = draw.tree.nodes[static_cast<std::size_t>(s)];
    if (sn.dim < 0) return product;
    const MvNode& nd = post.nodes[static_cast<std::size_t>(sn.node_id)];
    auto j = static_cast<std::size_t>(sn.dim);
    double hl = nd.hmass_left[j];
    double left_mass = draw.left_mass[static_cast<std::size_t>(s)];
    bool go_left = midpoint_mode ? x[j] <= nd.cut[j] : x[j] < nd.cut[j];
    product *= go_left ? left_mass / hl : (1.0 - left_mass) / (1.0 - hl);
    s = go_left ? sn.left : sn.right;
  }
}

namespace detail {

// Multiply accumulated density ratios by the base density at the cell
// midpoints (exact for the uniform base measure, whose density is constant).
inline void scale_by_base(const JointPosterior& post, const GridSpec& grid, std::int64_t row_begin,
                          std::span<double> out, double extra = 1.0) {
  std::size_t cols = grid.cells() / static_cast<std::size_t>(grid.resolution[0]);
  std::vector<double> x(post.dim);
  for (std::size_t i = 0; i < out.size(); ++i) {
    grid.point(static_cast<std::size_t>(row_begin) * cols + i, x.data());
    out[i] *= post.base.density(x.data()) * extra;
  }
}

}  // namespace detail

// One full posterior density draw (tree + branch probabilities) as exact
// cell averages over a window of grid rows, multiplied by the base density.
inline std::vector<double> sample_posterior_density_mv(const JointPosterior& post, std::uint64_t seed,
                                                       const GridSpec& grid, std::int64_t row_begin = 0,
                                                       std::int64_t row_end = -1) {
  if (row_end < 0) row_end = grid.resolution[0];
  Rng rng(seed);
  DensityDraw draw = make_density_draw(post, rng, true);
  std::size_t cols = grid.cells() / static_cast<std::size_t>(grid.resolution[0]);
  std::vector<double> out(static_cast<std::size_t>(row_end - row_begin) * cols, 0.0);
  accumulate_draw(post, draw, grid, out, row_begin, row_end);
  detail::scale_by_base(post, grid, row_begin, out);
  return out;
}

// Monte Carlo posterior-mean density: the average over sampled trees of the
// tree-conditional posterior predictive, as exact cell averages on the grid.
inline std::vector<double> posterior_mean_mc(const JointPosterior& post, int n_trees,
                                             const GridSpec& grid, std::uint64_t seed) {
  if (n_trees < 1) throw config_error("posterior_mean_mc: need at least one tree");
  std::vector<double> acc(grid.cells(), 0.0);
  for (int i = 0; i < n_trees; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    DensityDraw draw = make_density_draw(post, rng, false);
    accumulate_draw(post, draw, grid, acc);
  }
  detail::scale_by_base(post, grid, 0, acc, 1.0 / static_cast<double>(n_trees));
  return acc;
}

// Monte Carlo posterior-mean density at arbitrary query points.
inline std::vector<double> posterior_mean_mc_points(const JointPosterior& post, int n_trees,
                                                    std::span<const double> points,
                                                    std::uint64_t seed) {
  if (n_trees < 1) throw config_error("posterior_mean_mc: need at least one tree");
  std::size_t m = points.size() / post.dim;
  std::vector<double> acc(m, 0.0);
  for (int i = 0; i < n_trees; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    DensityDraw draw = make_density_draw(post, rng, false);
    for (std::size_t q = 0; q < m; ++q) acc[q] += eval_draw(post, draw, points.data() + q * post.dim);
  }
  for (std::size_t q = 0; q < m; ++q)
    acc[q] *= post.base.density(points.data() + q * post.dim) / static_cast<double>(n_trees);
  return acc;
}

// One posterior density draw at arbitrary query points.
inline std::vector<double> sample_posterior_density_mv_points(const JointPosterior& post,
                                                              std::uint64_t seed,
                                                              std::span<const double> points) {
  Rng rng(seed);
  DensityDraw draw = make_density_draw(post, rng, true);
  std::size_t m = points.size() / post.dim;
  std::vector<double> out(m);
  for (std::size_t q = 0; q < m; ++q) {
    const double* x = points.data() + q * post.dim;
    out[q] = eval_draw(post, draw, x) * post.base.density(x);
  }
  return out;
}

}  // namespace ptree
