#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "ptree/base_measure.hpp"
#include "ptree/grid.hpp"
#include "ptree/numeric.hpp"
#include "ptree/partition.hpp"
#include "ptree/rng.hpp"

// Conjugate inference for tree models with independent beta priors on the
// branching probabilities, applied to either splitting mode of the partition
// tree. Because a node's stored child counts already reflect its mode
// (anchors removed under median splits, everything kept under midpoint
// splits), a single set of formulas serves both likelihoods: all posterior
// quantities use the post-removal child totals.
//
// Every product over nodes is accumulated in log space via log-gamma; deep
// trees at n = 50000 underflow otherwise.

namespace ptree {

// Concentration c(A); either a constant or indexed by tree level.
struct Concentration {
  double c0 = 2.0;
  std::vector<double> per_level;

  double at(int depth) const {
    if (per_level.empty()) return c0;
    auto i = static_cast<std::size_t>(depth);
    return i < per_level.size() ? per_level[i] : per_level.back();
  }
};

struct BetaNodePrior {
  double alpha_left = 1.0, alpha_right = 1.0;

  void validate() const {
    if (!(alpha_left > 0.0) || !(alpha_right > 0.0) || !std::isfinite(alpha_left) ||
        !std::isfinite(alpha_right))
      throw invalid_prior("beta prior parameters must be positive and finite");
  }
};

// Cache of log B(c q + a, c (1-q) + b) over a grid of base-mass splits
// q = 0.01, ..., 0.99. Rows are filled lazily per (c, a, b). Lookups use
// 4-point Lagrange interpolation; arguments small enough that interpolation
// error would be visible (either beta argument below 8, or q outside the
// grid) are evaluated directly instead.
class BetaGrid {
 public:
  explicit BetaGrid(double step = 0.01) : step_(step) {
    npts_ = static_cast<int>(std::round(1.0 / step_)) - 1;
  }

  double step() const { return step_; }

  double log_beta_value(double c, double q, std::int64_t a, std::int64_t b) const {
    double lo = step_, hi = 1.0 - step_;
    if (q < lo || q > hi || c * q + static_cast<double>(a) < kMinArg ||
        c * (1.0 - q) + static_cast<double>(b) < kMinArg)
      return exact(c, q, a, b);
    const std::vector<double>& row = row_for(c, a, b);
    double t = (q - step_) / step_;
    if (std::fabs(t - std::round(t)) < 1e-9) {  // exact cache hit
      auto k = static_cast<std::int64_t>(std::round(t));
      if (k >= 0 && k < npts_) return row[static_cast<std::size_t>(k)];
    }
    auto i = static_cast<std::int64_t>(std::floor(t));
    i = std::min<std::int64_t>(std::max<std::int64_t>(i, 0), npts_ - 1);
    double u = t - static_cast<double>(i);
    if (u == 0.0) return row[static_cast<std::size_t>(i)];
    if (i == 0 || i >= npts_ - 2) {  // not enough neighbors for the cubic
      return (1.0 - u) * row[static_cast<std::size_t>(i)] + u * row[static_cast<std::size_t>(i) + 1];
    }
    double f0 = row[static_cast<std::size_t>(i) - 1], f1 = row[static_cast<std::size_t>(i)],
           f2 = row[static_cast<std::size_t>(i) + 1], f3 = row[static_cast<std::size_t>(i) + 2];
    double w0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
    double w1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
    double w2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
    double w3 = (u + 1.0) * u * (u - 1.0) / 6.0;
    return w0 * f0 + w1 * f1 + w2 * f2 + w3 * f3;
  }

  static double exact(double c, double q, std::int64_t a, std::int64_t b) {
    return log_beta(c * q + static_cast<double>(a), c * (1.0 - q) + static_cast<double>(b));
  }

 private:
  static constexpr double kMinArg = 8.0;

  struct Key {
    std::uint64_t cbits;
    std::int64_t a, b;
    bool operator==(const Key& o) const { return cbits == o.cbits && a == o.a && b == o.b; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return static_cast<std::size_t>(mix64(k.cbits ^ mix64(static_cast<std::uint64_t>(k.a)) ^
                                             mix64(static_cast<std::uint64_t>(k.b) * 0x9e37ULL)));
    }
  };

  const std::vector<double>& row_for(double c, std::int64_t a, std::int64_t b) const {
    std::uint64_t cbits;
    static_assert(sizeof cbits == sizeof c);
    std::memcpy(&cbits, &c, sizeof c);
    Key key{cbits, a, b};
    auto it = rows_.find(key);
    if (it != rows_.end()) return it->second;
    std::vector<double> row(static_cast<std::size_t>(npts_));
    for (int i = 0; i < npts_; ++i) {
      double q = step_ * (i + 1);
      row[static_cast<std::size_t>(i)] = exact(c, q, a, b);
    }
    return rows_.emplace(key, std::move(row)).first->second;
  }

  double step_;
  int npts_;
  mutable std::unordered_map<Key, std::vector<double>, KeyHash> rows_;
};

inline std::shared_ptr<BetaGrid> precompute_beta_grid(double grid_step = 0.01) {
  return std::make_shared<BetaGrid>(grid_step);
}

struct PriorSpec {
  BaseMeasure base;
  Concentration conc;
  std::shared_ptr<BetaGrid> beta_grid;  // null: cache disabled (default)

  static PriorSpec uniform(Region bounds, double c0 = 2.0) {
    PriorSpec p;
    p.base = BaseMeasure::uniform(std::move(bounds));
    p.conc.c0 = c0;
    return p;
  }

  // Beta prior on F(A_{j,l}|A): alpha = c(depth) * H(child | A).
  BetaNodePrior node_prior(const PartitionNode& node, std::size_t j) const {
    auto [hl, hr] = node_base_mass(node, base, j);
    double c = conc.at(node.depth);
    BetaNodePrior prior{c * hl, c * hr};
    prior.validate();
    return prior;
  }
};

struct NodeEvidence {
  double log_M = 0.0;    // log marginal likelihood factor M_P(A)
  double log_eta = 0.0;  // log evidence ratio against the base measure
};

// Low-level evidence for one node: counts are the post-removal child counts
// (n(A_l), n(A_r) under midpoint splits; (k-1, n-k) style counts under
// median splits). q = H(A_l|A).
inline NodeEvidence node_evidence(double c, double q, std::int64_t nl, std::int64_t nr,
                                  const BetaGrid* grid = nullptr) {
  BetaNodePrior prior{c * q, c * (1.0 - q)};
  prior.validate();
  NodeEvidence ev;
  if (grid) {
    ev.log_M = grid->log_beta_value(c, q, nl, nr) - grid->log_beta_value(c, q, 0, 0);
  } else {
    ev.log_M = log_beta(prior.alpha_left + static_cast<double>(nl),
                        prior.alpha_right + static_cast<double>(nr)) -
               log_beta(prior.alpha_left, prior.alpha_right);
  }
  ev.log_eta = ev.log_M - xlogy(static_cast<double>(nl), q) - xlogy(static_cast<double>(nr), 1.0 - q);
  return ev;
}

// Marginal likelihood factor for a node along its realized split. Nodes
// with at most one observation carry no evidence.
inline NodeEvidence node_marginal(const PartitionNode& node, const PriorSpec& prior) {
  if (node.is_leaf() || node.n_total <= 1) return {};
  auto j = static_cast<std::size_t>(node.split_dim);
  auto [hl, hr] = node_base_mass(node, prior.base, j);
  (void)hr;
  return node_evidence(prior.conc.at(node.depth), hl, node.counts_left[j], node.counts_right[j],
                       prior.beta_grid.get());
}

// log Bayes factor of the fitted tree model against the base measure:
// the sum of log evidence ratios over every splitting node.
inline double bayes_factor(const PartitionTree& tree, const PriorSpec& prior) {
  double total = 0.0;
  for (const PartitionNode& node : tree.nodes)
    if (!node.is_leaf()) total += node_marginal(node, prior).log_eta;
  return total;
}

// Posterior mean of the branch probability toward one child. The
// denominator is always alpha_l + alpha_r + (post-removal child total),
// which equals alpha_l + alpha_r + n(A) only when nothing was removed.
inline double posterior_branch_mean(const BetaNodePrior& prior, std::int64_t n_left,
                                    std::int64_t n_right, bool left_side) {
  prior.validate();
  double num = (left_side ? prior.alpha_left : prior.alpha_right) +
               static_cast<double>(left_side ? n_left : n_right);
  return num / (prior.alpha_left + prior.alpha_right + static_cast<double>(n_left + n_right));
}

namespace detail {

struct BranchStep {
  double h_side;       // H(child | A)
  double mean_ratio;   // E(F(child|A)|x) / H(child|A)
  std::int64_t nl, nr;
  BetaNodePrior prior;
  bool left;
};

// Shared walk: multiplies the requested per-branch ratio down to the leaf
// containing x.
template <typename RatioFn>
double branch_product(const PartitionTree& tree, const PriorSpec& prior, const double* x,
                      RatioFn&& ratio) {
  const PartitionNode* node = &tree.root();
  double prod = 1.0;
  while (!node->is_leaf()) {
    auto j = static_cast<std::size_t>(node->split_dim);
    auto [hl, hr] = node_base_mass(*node, prior.base, j);
    BetaNodePrior np{prior.conc.at(node->depth) * hl, prior.conc.at(node->depth) * hr};
    int child = tree.descend(*node, x[j]);
    bool left = child == node->left;
    BranchStep step{left ? hl : hr, 0.0, node->counts_left[j], node->counts_right[j], np, left};
    step.mean_ratio = posterior_branch_mean(np, step.nl, step.nr, left) / step.h_side;
    prod *= ratio(*node, step);
    node = &tree.node(child);
  }
  return prod;
}

}  // namespace detail

// Exact posterior predictive density (posterior mean of f) at a point:
// h(x) times the product of posterior-mean branch-mass ratios along the
// branch containing x.
inline double predictive_density(const PartitionTree& tree, const PriorSpec& prior, const double* x) {
  if (!tree.bounds.contains(x)) throw out_of_domain("predictive_density: query outside sample space");
  double r = detail::branch_product(tree, prior, x,
                                    [](const PartitionNode&, const detail::BranchStep& s) { return s.mean_ratio; });
  return std::exp(prior.base.log_density(x)) * r;
}

// One posterior draw of the density, evaluated on a set of query points.
// Each internal node receives an independent draw from its conjugate beta
// posterior; distinct seeds give i.i.d. density realizations.
inline std::vector<double> sample_posterior_density(const PartitionTree& tree, const PriorSpec& prior,
                                                    std::uint64_t seed,
                                                    std::span<const double> query_points) {
  Rng rng(seed);
  std::vector<double> draw(tree.size(), 0.5);
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const PartitionNode& node = tree.nodes[i];
    if (node.is_leaf()) continue;
    auto j = static_cast<std::size_t>(node.split_dim);
    BetaNodePrior np = prior.node_prior(node, j);
    draw[i] = rng.beta(np.alpha_left + static_cast<double>(node.counts_left[j]),
                       np.alpha_right + static_cast<double>(node.counts_right[j]));
  }
  std::size_t d = tree.dim;
  std::size_t m = query_points.size() / d;
  std::vector<double> out(m);
  for (std::size_t q = 0; q < m; ++q) {
    const double* x = query_points.data() + q * d;
    if (!tree.bounds.contains(x)) throw out_of_domain("sample_posterior_density: query outside sample space");
    double prod = 1.0;
    int id = 0;
    while (!tree.node(id).is_leaf()) {
      const PartitionNode& node = tree.node(id);
      auto j = static_cast<std::size_t>(node.split_dim);
      auto [hl, hr] = node_base_mass(node, prior.base, j);
      int child = tree.descend(node, x[j]);
      double v = draw[static_cast<std::size_t>(id)];
      prod *= child == node.left ? v / hl : (1.0 - v) / hr;
      id = child;
    }
    out[q] = std::exp(prior.base.log_density(x)) * prod;
  }
  return out;
}

}  // namespace ptree
