#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "ptree/dataset.hpp"
#include "ptree/grid.hpp"
#include "ptree/latent.hpp"
#include "ptree/mv_opt.hpp"
#include "ptree/partition.hpp"
#include "ptree/pt_kernel.hpp"

// A fitted model as the CLI sees it. Univariate data gets the single
// partition tree with the exact latent-state recursions; multivariate data
// gets the joint (J,S) expansion with Monte Carlo tree averaging for the
// posterior mean.

namespace ptree {

struct FitConfig {
  SplitMode mode = SplitMode::MedianOnData;
  int max_depth = 8;
  double quantile = 0.5;
  int states = 2;
  double stop_prob = 0.5;
  double concentration = 2.0;
  std::vector<double> lambda;  // empty: uniform over dimensions
  bool use_beta_grid = false;
  double beta_grid_step = 0.01;
  std::size_t node_budget = 0;
  bool split_small_nodes = false;

  StateModel state_model() const {
    if (states == 1) return StateModel::single(concentration);
    if (states == 2) return StateModel::opt(stop_prob, concentration);
    throw config_error("fit: only 1- and 2-state models are exposed through this configuration");
  }
};

struct LatentFit {
  PartitionTree tree;
  LatentModel model;
  MessageTable table;
  PosteriorTransition post;
};

struct MvFit {
  JointPosterior post;
};

struct FittedModel {
  std::variant<LatentFit, MvFit> impl;

  bool is_latent() const { return std::holds_alternative<LatentFit>(impl); }
  const LatentFit& latent() const { return std::get<LatentFit>(impl); }
  const MvFit& mv() const { return std::get<MvFit>(impl); }

  std::size_t dim() const {
    return is_latent() ? latent().tree.dim : mv().post.dim;
  }

  Region bounds() const { return is_latent() ? latent().tree.bounds : mv().post.bounds(); }

  double log_marginal_ratio() const {
    return is_latent() ? ptree::log_marginal_ratio(latent().table, latent().model.states)
                       : mv().post.log_phi_entry();
  }

  std::size_t node_count() const {
    return is_latent() ? latent().tree.size() : mv().post.nodes.size();
  }
};

inline FittedModel fit_model(const Dataset& data, const FitConfig& config) {
  StateModel states = config.state_model();
  std::shared_ptr<BetaGrid> grid =
      config.use_beta_grid ? precompute_beta_grid(config.beta_grid_step) : nullptr;
  if (data.d == 1) {
    PartitionTree tree = config.mode == SplitMode::MedianOnData
                             ? build_partial_tree(data, config.max_depth, config.quantile,
                                                  config.split_small_nodes)
                             : build_fixed_tree(data, config.max_depth);
    LatentModel model{BaseMeasure::uniform(data.bounds), states, grid};
    MessageTable table = message_pass(tree, model);
    PosteriorTransition post = posterior_transitions(tree, table, model);
    return FittedModel{LatentFit{std::move(tree), std::move(model), std::move(table), std::move(post)}};
  }
  MvOptions opt;
  opt.max_depth = config.max_depth;
  opt.quantile = config.quantile;
  opt.mode = config.mode;
  opt.node_budget = config.node_budget;
  if (config.split_small_nodes) opt.leaf_cutoff = 1;
  SplitPrior lambda = config.lambda.empty() ? SplitPrior::uniform(data.d) : SplitPrior{config.lambda};
  JointPosterior post =
      expand_and_pass(data, BaseMeasure::uniform(data.bounds), states, lambda, opt, grid.get());
  return FittedModel{MvFit{std::move(post)}};
}

// Posterior-mean density at arbitrary query points (exact in 1-D, Monte
// Carlo over mc_trees tree draws otherwise).
inline std::vector<double> predict_mean_points(const FittedModel& model, std::span<const double> points,
                                               int mc_trees, std::uint64_t seed) {
  if (model.is_latent()) {
    const LatentFit& f = model.latent();
    std::size_t d = f.tree.dim;
    std::vector<double> out(points.size() / d);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = predictive_density_latent(f.tree, f.model, f.post, points.data() + i * d);
    return out;
  }
  return posterior_mean_mc_points(model.mv().post, mc_trees, points, seed);
}

inline std::vector<double> predict_mean_grid(const FittedModel& model, const GridSpec& grid,
                                             int mc_trees, std::uint64_t seed) {
  if (model.is_latent()) return predict_mean_points(model, grid.points(), mc_trees, seed);
  return posterior_mean_mc(model.mv().post, mc_trees, grid, seed);
}

// One posterior density draw evaluated at query points.
inline std::vector<double> posterior_draw_points(const FittedModel& model, std::uint64_t draw_seed,
                                                 std::span<const double> points) {
  if (model.is_latent()) {
    const LatentFit& f = model.latent();
    return sample_posterior_density_latent(f.tree, f.model, f.post, draw_seed, points);
  }
  return sample_posterior_density_mv_points(model.mv().post, draw_seed, points);
}

}  // namespace ptree
