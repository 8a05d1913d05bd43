#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ptree/numeric.hpp"
#include "ptree/partition.hpp"
#include "ptree/pt_kernel.hpp"
#include "ptree/rng.hpp"

// Latent Markov states on a partition tree. Each node carries a state
// S(A) drawn from a root-to-leaf Markov chain with transition matrix
// rho[s][s']; conditional on a non-stopping state the branching probability
// gets a state-specific beta prior, while a stopping state pins the
// conditional distribution on the node to the base measure exactly.
//
// Inference is a single bottom-up message pass computing the marginal
// likelihood ratios phi_s(A) (indexed by the parent state), followed by
// exact posterior transition matrices and a predictive recursion along the
// query branch. Everything is expressed as ratios against the base measure,
// which also makes the stopping state's evidence identically one under both
// likelihood modes.

namespace ptree {

struct StateModel {
  int n_states = 1;
  std::vector<double> rho;          // n_states x n_states, rows sum to 1
  std::vector<Concentration> conc;  // per state; unused for stopping states
  std::vector<char> stopping;
  int entry_state = 0;  // virtual parent state of the root

  double rho_at(int s, int t) const {
    return rho[static_cast<std::size_t>(s) * static_cast<std::size_t>(n_states) +
               static_cast<std::size_t>(t)];
  }

  bool is_stopping(int s) const { return stopping[static_cast<std::size_t>(s)] != 0; }

  // Plain Polya tree: one active state, no stopping.
  static StateModel single(double c0 = 2.0) {
    StateModel m;
    m.n_states = 1;
    m.rho = {1.0};
    m.conc = {Concentration{c0, {}}};
    m.stopping = {0};
    return m;
  }

  // Two states with randomized stopping: state 0 active with concentration
  // c0, state 1 stopping and absorbing.
  static StateModel opt(double stop_prob = 0.5, double c0 = 2.0) {
    StateModel m;
    m.n_states = 2;
    m.rho = {1.0 - stop_prob, stop_prob, 0.0, 1.0};
    m.conc = {Concentration{c0, {}}, Concentration{c0, {}}};
    m.stopping = {0, 1};
    return m;
  }

  void validate() const {
    if (n_states < 1) throw config_error("StateModel: need at least one state");
    if (rho.size() != static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_states) ||
        conc.size() != static_cast<std::size_t>(n_states) ||
        stopping.size() != static_cast<std::size_t>(n_states))
      throw config_error("StateModel: inconsistent sizes");
    for (int s = 0; s < n_states; ++s) {
      double row = 0.0;
      for (int t = 0; t < n_states; ++t) {
        double r = rho_at(s, t);
        if (r < 0.0 || r > 1.0) throw config_error("StateModel: transition entry outside [0,1]");
        row += r;
      }
      if (std::fabs(row - 1.0) > 1e-12) throw config_error("StateModel: transition row does not sum to 1");
      if (is_stopping(s) && std::fabs(rho_at(s, s) - 1.0) > 1e-12)
        throw config_error("StateModel: stopping states must be absorbing");
    }
    if (entry_state < 0 || entry_state >= n_states || is_stopping(entry_state))
      throw config_error("StateModel: entry state must be a valid non-stopping state");
    bool any_active = false;
    for (int s = 0; s < n_states; ++s) any_active |= !is_stopping(s);
    if (!any_active) throw config_error("StateModel: all states stopping");
  }
};

struct LatentModel {
  BaseMeasure base;
  StateModel states;
  std::shared_ptr<BetaGrid> beta_grid;

  static LatentModel opt_uniform(Region bounds, double stop_prob = 0.5, double c0 = 2.0) {
    return LatentModel{BaseMeasure::uniform(std::move(bounds)), StateModel::opt(stop_prob, c0), nullptr};
  }
};

// Per-node, per-state messages. log_phi is indexed by the parent state,
// log_eta by the node's own state; both are zero on nodes with n(A) <= 1
// and on stopping states.
struct MessageTable {
  int n_states = 1;
  std::vector<double> log_phi;  // node * S + s
  std::vector<double> log_eta;

  double phi(int node, int s) const {
    return log_phi[static_cast<std::size_t>(node) * static_cast<std::size_t>(n_states) +
                   static_cast<std::size_t>(s)];
  }
  double eta(int node, int s) const {
    return log_eta[static_cast<std::size_t>(node) * static_cast<std::size_t>(n_states) +
                   static_cast<std::size_t>(s)];
  }
};

// Posterior transition matrices rho_{s,s'|x}(A), one row-stochastic S x S
// matrix per node. Leaves reduce exactly to the prior rows.
struct PosteriorTransition {
  int n_states = 1;
  std::vector<double> probs;  // node * S * S

  double at(int node, int s, int t) const {
    auto S = static_cast<std::size_t>(n_states);
    return probs[static_cast<std::size_t>(node) * S * S + static_cast<std::size_t>(s) * S +
                 static_cast<std::size_t>(t)];
  }
};

// Bottom-up message pass over the whole tree.
inline MessageTable message_pass(const PartitionTree& tree, const LatentModel& model) {
  model.states.validate();
  const StateModel& sm = model.states;
  auto S = static_cast<std::size_t>(sm.n_states);
  MessageTable table;
  table.n_states = sm.n_states;
  table.log_phi.assign(tree.size() * S, 0.0);
  table.log_eta.assign(tree.size() * S, 0.0);

  std::vector<double> terms(S);
  // Children follow their parent in the preorder array, so a reverse sweep
  // is a valid bottom-up order.
  for (std::size_t i = tree.size(); i-- > 0;) {
    const PartitionNode& node = tree.nodes[i];
    if (node.is_leaf() || node.n_total <= 1) continue;
    auto j = static_cast<std::size_t>(node.split_dim);
    auto [hl, hr] = node_base_mass(node, model.base, j);
    (void)hr;
    for (std::size_t s = 0; s < S; ++s) {
      double le = 0.0;
      if (!sm.is_stopping(static_cast<int>(s)))
        le = node_evidence(sm.conc[s].at(node.depth), hl, node.counts_left[j], node.counts_right[j],
                           model.beta_grid.get())
                 .log_eta;
      table.log_eta[i * S + s] = le;
    }
    auto l = static_cast<std::size_t>(node.left), r = static_cast<std::size_t>(node.right);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t t = 0; t < S; ++t) {
        double rho = sm.rho_at(static_cast<int>(s), static_cast<int>(t));
        terms[t] = rho > 0.0 ? std::log(rho) + table.log_eta[i * S + t] +
                                   table.log_phi[l * S + t] + table.log_phi[r * S + t]
                             : kNegInf;
      }
      double lp = log_sum_exp(terms);
      if (!std::isfinite(lp)) throw numerical_underflow("message_pass: phi underflowed");
      table.log_phi[i * S + s] = lp;
    }
  }
  return table;
}

// log phi_s(Omega) for the entry state: the log Bayes factor of the latent
// model against the base measure.
inline double log_marginal_ratio(const MessageTable& table, const StateModel& sm) {
  return table.phi(0, sm.entry_state);
}

inline PosteriorTransition posterior_transitions(const PartitionTree& tree, const MessageTable& table,
                                                 const LatentModel& model) {
  const StateModel& sm = model.states;
  auto S = static_cast<std::size_t>(sm.n_states);
  PosteriorTransition post;
  post.n_states = sm.n_states;
  post.probs.assign(tree.size() * S * S, 0.0);
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const PartitionNode& node = tree.nodes[i];
    bool internal = !node.is_leaf();
    auto l = internal ? static_cast<std::size_t>(node.left) : i;
    auto r = internal ? static_cast<std::size_t>(node.right) : i;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t t = 0; t < S; ++t) {
        double rho = sm.rho_at(static_cast<int>(s), static_cast<int>(t));
        double v = 0.0;
        if (rho > 0.0) {
          double num = std::log(rho) + table.log_eta[i * S + t];
          if (internal) num += table.log_phi[l * S + t] + table.log_phi[r * S + t];
          v = std::exp(num - table.log_phi[i * S + s]);
        }
        post.probs[i * S * S + s * S + t] = v;
      }
    }
  }
  return post;
}

namespace detail {

inline std::vector<int> branch_path(const PartitionTree& tree, const double* x) {
  std::vector<int> path{0};
  while (!tree.node(path.back()).is_leaf())
    path.push_back(tree.descend(tree.node(path.back()), x[tree.node(path.back()).split_dim]));
  return path;
}

// E(F(child|A) | x, S(A)=s) / H(child|A) for an internal node; 1 in a
// stopping state.
inline double varphi_state(const PartitionNode& node, const LatentModel& model, int state,
                           bool left_side) {
  if (model.states.is_stopping(state)) return 1.0;
  auto j = static_cast<std::size_t>(node.split_dim);
  auto [hl, hr] = node_base_mass(node, model.base, j);
  double c = model.states.conc[static_cast<std::size_t>(state)].at(node.depth);
  BetaNodePrior np{c * hl, c * hr};
  double mean = posterior_branch_mean(np, node.counts_left[j], node.counts_right[j], left_side);
  return mean / (left_side ? hl : hr);
}

}  // namespace detail

// Exact posterior predictive density at a point under the latent model:
// h(x) times xi_entry(Omega) computed by the bottom-up xi recursion along
// the branch containing x.
inline double predictive_density_latent(const PartitionTree& tree, const LatentModel& model,
                                        const PosteriorTransition& post, const double* x) {
  if (!tree.bounds.contains(x)) throw out_of_domain("predictive_density_latent: query outside sample space");
  const StateModel& sm = model.states;
  auto S = static_cast<std::size_t>(sm.n_states);
  std::vector<int> path = detail::branch_path(tree, x);
  std::vector<double> xi(S, 1.0), next(S);
  for (std::size_t i = path.size() - 1; i-- > 0;) {
    const PartitionNode& node = tree.node(path[i]);
    bool left = path[i + 1] == node.left;
    for (std::size_t s = 0; s < S; ++s) {
      double acc = 0.0;
      for (std::size_t t = 0; t < S; ++t) {
        double p = post.at(path[i], static_cast<int>(s), static_cast<int>(t));
        if (p > 0.0) acc += p * detail::varphi_state(node, model, static_cast<int>(t), left) * xi[t];
      }
      next[s] = acc;
    }
    xi.swap(next);
  }
  return std::exp(model.base.log_density(x)) * xi[static_cast<std::size_t>(sm.entry_state)];
}

// One posterior draw of the density under the latent model, evaluated on
// query points: states are drawn top-down from the posterior transitions,
// then branch probabilities from their conjugate beta posteriors.
inline std::vector<double> sample_posterior_density_latent(const PartitionTree& tree,
                                                           const LatentModel& model,
                                                           const PosteriorTransition& post,
                                                           std::uint64_t seed,
                                                           std::span<const double> query_points) {
  const StateModel& sm = model.states;
  auto S = static_cast<std::size_t>(sm.n_states);
  Rng rng(seed);
  std::vector<int> state(tree.size(), sm.entry_state);
  std::vector<int> parent(tree.size(), -1);
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const PartitionNode& node = tree.nodes[i];
    if (!node.is_leaf()) {
      parent[static_cast<std::size_t>(node.left)] = static_cast<int>(i);
      parent[static_cast<std::size_t>(node.right)] = static_cast<int>(i);
    }
    int ps = parent[i] < 0 ? sm.entry_state : state[static_cast<std::size_t>(parent[i])];
    double u = rng.uniform(), acc = 0.0;
    int drawn = sm.n_states - 1;
    for (std::size_t t = 0; t < S; ++t) {
      acc += post.at(static_cast<int>(i), ps, static_cast<int>(t));
      if (u <= acc) { drawn = static_cast<int>(t); break; }
    }
    state[i] = drawn;
  }
  std::vector<double> draw(tree.size(), 0.5);
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const PartitionNode& node = tree.nodes[i];
    if (node.is_leaf() || sm.is_stopping(state[i])) continue;
    auto j = static_cast<std::size_t>(node.split_dim);
    auto [hl, hr] = node_base_mass(node, model.base, j);
    double c = sm.conc[static_cast<std::size_t>(state[i])].at(node.depth);
    draw[i] = rng.beta(c * hl + static_cast<double>(node.counts_left[j]),
                       c * hr + static_cast<double>(node.counts_right[j]));
  }
  std::size_t d = tree.dim;
  std::size_t m = query_points.size() / d;
  std::vector<double> out(m);
  for (std::size_t q = 0; q < m; ++q) {
    const double* x = query_points.data() + q * d;
    if (!tree.bounds.contains(x))
      throw out_of_domain("sample_posterior_density_latent: query outside sample space");
    double prod = 1.0;
    int id = 0;
    while (!tree.node(id).is_leaf() && !sm.is_stopping(state[static_cast<std::size_t>(id)])) {
      const PartitionNode& node = tree.node(id);
      auto j = static_cast<std::size_t>(node.split_dim);
      auto [hl, hr] = node_base_mass(node, model.base, j);
      int child = tree.descend(node, x[j]);
      double v = draw[static_cast<std::size_t>(id)];
      prod *= child == node.left ? v / hl : (1.0 - v) / hr;
      id = child;
    }
    out[q] = std::exp(model.base.log_density(x)) * prod;
  }
  return out;
}

}  // namespace ptree
