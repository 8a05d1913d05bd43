#pragma once

// Test-only oracles, written independently of the library's computation
// paths: exhaustive enumeration over (tree, state) configurations, raw
// (non-ratio) message passing, brute-force recounts and Gauss-Legendre
// quadrature. Everything here favors directness over speed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ptree/dataset.hpp"
#include "ptree/latent.hpp"
#include "ptree/partition.hpp"

namespace oracle {

using ptree::Dataset;
using ptree::Region;
using ptree::SplitMode;
using ptree::StateModel;

// ---------------------------------------------------------------------------
// Exhaustive enumeration over (tree, state) configurations.

struct EnumProblem {
  const Dataset* data = nullptr;
  StateModel states;
  std::vector<double> lambda;
  int max_depth = 3;
  double quantile = 0.5;
  SplitMode mode = SplitMode::MedianOnData;
  std::int64_t leaf_cutoff = -1;  // -1: d under median splits, 1 under midpoint

  std::int64_t cutoff() const {
    if (leaf_cutoff >= 0) return leaf_cutoff;
    return mode == SplitMode::MedianOnData ? static_cast<std::int64_t>(data->d) : 1;
  }
};

struct NodeView {
  std::vector<std::int64_t> ids;
  Region region;
  int depth = 0;
};

struct SplitView {
  double cut = 0.0, h_left = 0.5;
  std::vector<std::int64_t> left_ids, right_ids;
  std::int64_t nl = 0, nr = 0;
};

// Re-derives the split of `node` on dimension `dim` from scratch (full sort,
// explicit anchor set, uniform base measure).
inline SplitView enum_split(const EnumProblem& p, const NodeView& node, std::size_t dim) {
  const Dataset& data = *p.data;
  SplitView out;
  std::vector<std::int64_t> anchors;
  if (p.mode == SplitMode::MedianOnData) {
    auto n = static_cast<std::int64_t>(node.ids.size());
    auto k = static_cast<std::int64_t>(std::ceil(static_cast<double>(n) * p.quantile));
    k = std::min(std::max<std::int64_t>(k, 1), n);
    for (std::size_t j = 0; j < data.d; ++j) {
      std::vector<std::pair<double, std::int64_t>> order;
      for (std::int64_t id : node.ids) order.emplace_back(data.at(static_cast<std::size_t>(id), j), id);
      std::sort(order.begin(), order.end());
      std::int64_t aid = order[static_cast<std::size_t>(k - 1)].second;
      if (j == dim) out.cut = order[static_cast<std::size_t>(k - 1)].first;
      if (std::find(anchors.begin(), anchors.end(), aid) == anchors.end()) anchors.push_back(aid);
    }
  } else {
    out.cut = 0.5 * (node.region.lower[dim] + node.region.upper[dim]);
  }
  for (std::int64_t id : node.ids) {
    if (std::find(anchors.begin(), anchors.end(), id) != anchors.end()) continue;
    double x = data.at(static_cast<std::size_t>(id), dim);
    if (p.mode == SplitMode::MedianOnData) {
      if (x < out.cut) out.left_ids.push_back(id);
      else if (x > out.cut) out.right_ids.push_back(id);
    } else {
      (x <= out.cut ? out.left_ids : out.right_ids).push_back(id);
    }
  }
  out.nl = static_cast<std::int64_t>(out.left_ids.size());
  out.nr = static_cast<std::int64_t>(out.right_ids.size());
  out.h_left = (out.cut - node.region.lower[dim]) / (node.region.upper[dim] - node.region.lower[dim]);
  return out;
}

inline double enum_eta(const EnumProblem& p, int state, int depth, const SplitView& sv) {
  double c = p.states.conc[static_cast<std::size_t>(state)].at(depth);
  double al = c * sv.h_left, ar = c * (1.0 - sv.h_left);
  double lM = std::lgamma(al + static_cast<double>(sv.nl)) + std::lgamma(ar + static_cast<double>(sv.nr)) -
              std::lgamma(al + ar + static_cast<double>(sv.nl + sv.nr)) -
              (std::lgamma(al) + std::lgamma(ar) - std::lgamma(al + ar));
  return std::exp(lM) / (std::pow(sv.h_left, static_cast<double>(sv.nl)) *
                         std::pow(1.0 - sv.h_left, static_cast<double>(sv.nr)));
}

// One fully realized configuration: the prior probability of its (J, S)
// choices, the product of node evidences, and the choices themselves
// ((state, dim) per node path; dim = -1 marks a stopping state).
struct Config {
  double prior = 1.0;
  double evidence = 1.0;
  std::map<std::string, std::pair<int, int>> choices;
};

inline NodeView child_view(const NodeView& node, const SplitView& sv, std::size_t dim, bool left) {
  NodeView child;
  child.ids = left ? sv.left_ids : sv.right_ids;
  child.region = node.region;
  (left ? child.region.upper[dim] : child.region.lower[dim]) = sv.cut;
  child.depth = node.depth + 1;
  return child;
}

inline std::vector<Config> enum_configs(const EnumProblem& p, const NodeView& node, int parent_state,
                                        const std::string& path) {
  std::vector<Config> out;
  auto n = static_cast<std::int64_t>(node.ids.size());
  if (n <= p.cutoff() || node.depth >= p.max_depth) {
    out.push_back(Config{});
    return out;
  }
  for (int t = 0; t < p.states.n_states; ++t) {
    double rho = p.states.rho_at(parent_state, t);
    if (rho <= 0.0) continue;
    if (p.states.is_stopping(t)) {
      Config c;
      c.prior = rho;
      c.evidence = 1.0;
      c.choices[path] = {t, -1};
      out.push_back(std::move(c));
      continue;
    }
    for (std::size_t j = 0; j < p.data->d; ++j) {
      double lam = p.lambda[j];
      if (lam <= 0.0) continue;
      SplitView sv = enum_split(p, node, j);
      double eta = enum_eta(p, t, node.depth, sv);
      auto lefts = enum_configs(p, child_view(node, sv, j, true), t, path + std::to_string(j) + "L");
      auto rights = enum_configs(p, child_view(node, sv, j, false), t, path + std::to_string(j) + "R");
      for (const Config& lc : lefts) {
        for (const Config& rc : rights) {
          Config c;
          c.prior = rho * lam * lc.prior * rc.prior;
          c.evidence = eta * lc.evidence * rc.evidence;
          c.choices = lc.choices;
          c.choices.insert(rc.choices.begin(), rc.choices.end());
          c.choices[path] = {t, static_cast<int>(j)};
          out.push_back(std::move(c));
        }
      }
    }
  }
  return out;
}

inline NodeView root_view(const Dataset& data) {
  NodeView root;
  root.region = data.bounds;
  for (std::size_t i = 0; i < data.n; ++i) root.ids.push_back(static_cast<std::int64_t>(i));
  return root;
}

inline std::vector<Config> enumerate_all(const EnumProblem& p) {
  return enum_configs(p, root_view(*p.data), p.states.entry_state, "");
}

inline double enum_phi(const std::vector<Config>& configs) {
  double s = 0.0;
  for (const Config& c : configs) s += c.prior * c.evidence;
  return s;
}

// P(J(root)=j, S(root)=s | x); terminal roots contribute nothing.
inline std::vector<double> enum_root_joint(const EnumProblem& p, const std::vector<Config>& configs) {
  auto S = static_cast<std::size_t>(p.states.n_states);
  std::vector<double> joint(p.data->d * S, 0.0);
  double total = enum_phi(configs);
  for (const Config& c : configs) {
    auto it = c.choices.find("");
    if (it == c.choices.end()) continue;
    auto [t, j] = it->second;
    std::size_t jj = j < 0 ? 0 : static_cast<std::size_t>(j);
    if (j < 0) {
      // stopping: spread over dimensions by lambda, matching the joint law
      for (std::size_t q = 0; q < p.data->d; ++q)
        joint[q * S + static_cast<std::size_t>(t)] += p.lambda[q] * c.prior * c.evidence / total;
    } else {
      joint[jj * S + static_cast<std::size_t>(t)] += c.prior * c.evidence / total;
    }
  }
  return joint;
}

// Posterior marginal of S at a node path (states of configurations that
// stopped above the node are resolved through absorption).
inline std::vector<double> enum_state_marginal(const EnumProblem& p, const std::vector<Config>& configs,
                                               const std::string& path) {
  auto S = static_cast<std::size_t>(p.states.n_states);
  std::vector<double> marg(S, 0.0);
  double total = enum_phi(configs);
  for (const Config& c : configs) {
    int state = -1;
    for (std::size_t cut = path.size() + 1; cut-- > 0;) {
      auto it = c.choices.find(path.substr(0, cut));
      if (it != c.choices.end()) {
        bool stopped_above = cut < path.size() && it->second.second < 0;
        bool here = cut == path.size();
        if (here || (stopped_above && p.states.is_stopping(it->second.first))) state = it->second.first;
        break;
      }
    }
    if (state >= 0) marg[static_cast<std::size_t>(state)] += c.prior * c.evidence / total;
  }
  return marg;
}

// Tree-conditional posterior predictive of one configuration at x, as a
// ratio against the base density.
inline double config_predictive(const EnumProblem& p, const Config& c, const NodeView& node,
                                const std::string& path, const double* x) {
  auto it = c.choices.find(path);
  if (it == c.choices.end()) return 1.0;  // leaf
  auto [t, jj] = it->second;
  if (jj < 0) return 1.0;  // stopped: base measure within the node
  auto j = static_cast<std::size_t>(jj);
  SplitView sv = enum_split(p, node, j);
  bool left = p.mode == SplitMode::MedianOnData ? x[j] < sv.cut : x[j] <= sv.cut;
  double c0 = p.states.conc[static_cast<std::size_t>(t)].at(node.depth);
  double al = c0 * sv.h_left, ar = c0 * (1.0 - sv.h_left);
  double mean = (left ? al + static_cast<double>(sv.nl) : ar + static_cast<double>(sv.nr)) /
                (al + ar + static_cast<double>(sv.nl + sv.nr));
  double ratio = mean / (left ? sv.h_left : 1.0 - sv.h_left);
  NodeView child = child_view(node, sv, j, left);
  return ratio * config_predictive(p, c, child, path + std::to_string(j) + (left ? "L" : "R"), x);
}

// Posterior predictive density ratio at x (uniform base density assumed 1).
inline double enum_predictive(const EnumProblem& p, const std::vector<Config>& configs, const double* x) {
  double total = enum_phi(configs);
  double acc = 0.0;
  NodeView root = root_view(*p.data);
  for (const Config& c : configs)
    acc += (c.prior * c.evidence / total) * config_predictive(p, c, root, "", x);
  return acc;
}

// ---------------------------------------------------------------------------
// Raw (non-ratio) message passing on a fixed univariate tree: products of
// actual likelihood values instead of likelihood ratios.

// Partial likelihood of the base measure on the subtree rooted at `id`.
inline double raw_base_likelihood(const ptree::PartitionTree& tree, const ptree::BaseMeasure& base,
                                  int id) {
  const ptree::PartitionNode& nd = tree.node(id);
  if (nd.is_leaf()) return 1.0;
  auto j = static_cast<std::size_t>(nd.split_dim);
  auto [hl, hr] = ptree::node_base_mass(nd, base, j);
  return std::pow(hl, static_cast<double>(nd.counts_left[j])) *
         std::pow(hr, static_cast<double>(nd.counts_right[j])) *
         raw_base_likelihood(tree, base, nd.left) * raw_base_likelihood(tree, base, nd.right);
}

inline double raw_phi(const ptree::PartitionTree& tree, const ptree::LatentModel& model, int id,
                      int parent_state) {
  const ptree::PartitionNode& nd = tree.node(id);
  if (nd.is_leaf() || nd.n_total <= 1) return 1.0;
  auto j = static_cast<std::size_t>(nd.split_dim);
  auto [hl, hr] = ptree::node_base_mass(nd, model.base, j);
  double acc = 0.0;
  for (int t = 0; t < model.states.n_states; ++t) {
    double rho = model.states.rho_at(parent_state, t);
    if (rho <= 0.0) continue;
    if (model.states.is_stopping(t)) {
      acc += rho * raw_base_likelihood(tree, model.base, id);
      continue;
    }
    double c = model.states.conc[static_cast<std::size_t>(t)].at(nd.depth);
    double al = c * hl, ar = c * hr;
    double nl = static_cast<double>(nd.counts_left[j]), nr = static_cast<double>(nd.counts_right[j]);
    double M = std::exp(std::lgamma(al + nl) + std::lgamma(ar + nr) - std::lgamma(al + ar + nl + nr) -
                        std::lgamma(al) - std::lgamma(ar) + std::lgamma(al + ar));
    acc += rho * M * raw_phi(tree, model, nd.left, t) * raw_phi(tree, model, nd.right, t);
  }
  return acc;
}

// Posterior transition row at a node computed entirely in raw likelihoods.
inline std::vector<double> raw_transition_row(const ptree::PartitionTree& tree,
                                              const ptree::LatentModel& model, int id, int parent_state) {
  const ptree::PartitionNode& nd = tree.node(id);
  std::vector<double> row(static_cast<std::size_t>(model.states.n_states), 0.0);
  double denom = raw_phi(tree, model, id, parent_state);
  for (int t = 0; t < model.states.n_states; ++t) {
    double rho = model.states.rho_at(parent_state, t);
    if (rho <= 0.0) continue;
    double num;
    if (nd.is_leaf() || nd.n_total <= 1) {
      num = rho;  // no evidence: posterior equals prior
      denom = 1.0;
      row[static_cast<std::size_t>(t)] = num;
      continue;
    }
    auto j = static_cast<std::size_t>(nd.split_dim);
    auto [hl, hr] = ptree::node_base_mass(nd, model.base, j);
    if (model.states.is_stopping(t)) {
      num = rho * raw_base_likelihood(tree, model.base, id);
    } else {
      double c = model.states.conc[static_cast<std::size_t>(t)].at(nd.depth);
      double al = c * hl, ar = c * hr;
      double nl = static_cast<double>(nd.counts_left[j]), nr = static_cast<double>(nd.counts_right[j]);
      double M = std::exp(std::lgamma(al + nl) + std::lgamma(ar + nr) -
                          std::lgamma(al + ar + nl + nr) - std::lgamma(al) - std::lgamma(ar) +
                          std::lgamma(al + ar));
      num = rho * M * raw_phi(tree, model, nd.left, t) * raw_phi(tree, model, nd.right, t);
    }
    row[static_cast<std::size_t>(t)] = num / denom;
  }
  return row;
}

// ---------------------------------------------------------------------------
// Brute-force recount: rebuilds every node's point set from the raw data by
// re-applying the anchor and tie rules, and checks the stored counts.

inline void check_counts(const ptree::PartitionTree& tree, const Dataset& data, int id,
                         const std::vector<std::int64_t>& ids,
                         const std::function<void(bool, const std::string&)>& expect) {
  const ptree::PartitionNode& nd = tree.node(id);
  expect(nd.n_total == static_cast<std::int64_t>(ids.size()), "n_total mismatch at node " + std::to_string(id));
  if (nd.is_leaf()) return;
  EnumProblem p;
  p.data = &data;
  p.mode = tree.mode;
  p.quantile = tree.quantile;
  NodeView view{ids, nd.region, nd.depth};
  for (std::size_t j = 0; j < data.d; ++j) {
    SplitView sv = enum_split(p, view, j);
    expect(sv.nl == nd.counts_left[j] && sv.nr == nd.counts_right[j],
           "per-dimension counts mismatch at node " + std::to_string(id));
    if (j == static_cast<std::size_t>(nd.split_dim)) {
      expect(sv.cut == nd.cut, "cut mismatch at node " + std::to_string(id));
      check_counts(tree, data, nd.left, sv.left_ids, expect);
      check_counts(tree, data, nd.right, sv.right_ids, expect);
    }
  }
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature (nodes by Newton iteration), tiled so that
// locally spiky densities are integrated accurately.

inline void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.resize(static_cast<std::size_t>(order));
  weights.resize(static_cast<std::size_t>(order));
  for (int i = 0; i < order; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 0; k < order; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k + 1.0) * x * p1 - k * p2) / (k + 1.0);
      }
      double dp = order * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = 0.0;
    for (int k = 0; k < order; ++k) {
      double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k + 1.0) * x * p1 - k * p2) / (k + 1.0);
    }
    double dp = order * (x * p0 - p1) / (x * x - 1.0);
    nodes[static_cast<std::size_t>(i)] = x;
    weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

inline double integrate_1d(const std::function<double(double)>& f, double lo, double hi, int tiles,
                           int order = 32) {
  std::vector<double> xs, ws;
  gauss_legendre(order, xs, ws);
  double total = 0.0, w = (hi - lo) / tiles;
  for (int t = 0; t < tiles; ++t) {
    double a = lo + t * w, mid = a + 0.5 * w, half = 0.5 * w;
    for (int i = 0; i < order; ++i)
      total += half * ws[static_cast<std::size_t>(i)] * f(mid + half * xs[static_cast<std::size_t>(i)]);
  }
  return total;
}

inline double integrate_2d(const std::function<double(double, double)>& f, int tiles, int order = 16) {
  std::vector<double> xs, ws;
  gauss_legendre(order, xs, ws);
  double total = 0.0, w = 1.0 / tiles;
  for (int tx = 0; tx < tiles; ++tx) {
    for (int ty = 0; ty < tiles; ++ty) {
      double cx = (tx + 0.5) * w, cy = (ty + 0.5) * w, half = 0.5 * w;
      for (int i = 0; i < order; ++i)
        for (int j = 0; j < order; ++j)
          total += half * half * ws[static_cast<std::size_t>(i)] * ws[static_cast<std::size_t>(j)] *
                   f(cx + half * xs[static_cast<std::size_t>(i)], cy + half * xs[static_cast<std::size_t>(j)]);
    }
  }
  return total;
}

}  // namespace oracle
