#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "ptree/fit.hpp"

// Fitted-model persistence: a single JSON document (version "ptree-model/1")
// holding the tree topology in preorder, per-node counts and cuts, the prior
// specification and the fitted log-evidences. Numbers survive the round trip
// exactly (shortest round-trip decimal on write, exact binary on read), so a
// reloaded model predicts bit-identically.

namespace ptree {

namespace detail {

using nlohmann::json;

inline json region_to_json(const Region& r) { return json{{"lower", r.lower}, {"upper", r.upper}}; }

inline Region region_from_json(const json& j) {
  Region r;
  r.lower = j.at("lower").get<std::vector<double>>();
  r.upper = j.at("upper").get<std::vector<double>>();
  return r;
}

inline json base_to_json(const BaseMeasure& b) {
  bool uniform = true;
  for (const Marginal& m : b.marginals) uniform &= m.kind == Marginal::Kind::Uniform;
  json out{{"bounds", region_to_json(b.bounds)}};
  if (uniform) {
    out["kind"] = "uniform";
  } else {
    out["kind"] = "product";
    json ms = json::array();
    for (const Marginal& m : b.marginals)
      ms.push_back(m.kind == Marginal::Kind::Uniform
                       ? json{{"kind", "uniform"}}
                       : json{{"kind", "beta"}, {"a", m.a}, {"b", m.b}});
    out["marginals"] = ms;
  }
  return out;
}

inline BaseMeasure base_from_json(const json& j) {
  BaseMeasure b;
  b.bounds = region_from_json(j.at("bounds"));
  if (j.at("kind") == "uniform") {
    b.marginals.assign(b.bounds.dim(), Marginal{});
    return b;
  }
  for (const json& m : j.at("marginals")) {
    Marginal marg;
    if (m.at("kind") == "beta") {
      marg.kind = Marginal::Kind::Beta;
      marg.a = m.at("a").get<double>();
      marg.b = m.at("b").get<double>();
    }
    b.marginals.push_back(marg);
  }
  return b;
}

inline json states_to_json(const StateModel& s) {
  json conc = json::array();
  for (const Concentration& c : s.conc) conc.push_back(json{{"c0", c.c0}, {"per_level", c.per_level}});
  return json{{"count", s.n_states},
              {"entry", s.entry_state},
              {"stopping", std::vector<int>(s.stopping.begin(), s.stopping.end())},
              {"rho", s.rho},
              {"concentration", conc}};
}

inline StateModel states_from_json(const json& j) {
  StateModel s;
  s.n_states = j.at("count").get<int>();
  s.entry_state = j.at("entry").get<int>();
  auto stops = j.at("stopping").get<std::vector<int>>();
  s.stopping.assign(stops.begin(), stops.end());
  s.rho = j.at("rho").get<std::vector<double>>();
  for (const json& c : j.at("concentration"))
    s.conc.push_back(Concentration{c.at("c0").get<double>(), c.at("per_level").get<std::vector<double>>()});
  s.validate();
  return s;
}

}  // namespace detail

inline nlohmann::json model_to_json(const FittedModel& model) {
  using nlohmann::json;
  json out;
  out["format"] = "ptree-model/1";
  if (model.is_latent()) {
    const LatentFit& f = model.latent();
    out["kind"] = "latent";
    out["mode"] = f.tree.mode == SplitMode::MedianOnData ? "partial" : "full";
    out["max_depth"] = f.tree.max_depth;
    out["quantile"] = f.tree.quantile;
    out["dim"] = f.tree.dim;
    out["n"] = f.tree.n;
    out["bounds"] = detail::region_to_json(f.tree.bounds);
    out["base"] = detail::base_to_json(f.model.base);
    out["states"] = detail::states_to_json(f.model.states);
    out["log_marginal_ratio"] = model.log_marginal_ratio();
    json nodes = json::array();
    for (const PartitionNode& nd : f.tree.nodes) {
      std::size_t id = nodes.size();
      json entry = json::array(
          {nd.depth, nd.n_total, nd.region.lower, nd.region.upper, nd.split_dim, nd.cut,
           nd.order_index, nd.anchor_cuts, nd.counts_left, nd.counts_right, nd.removed, nd.left,
           nd.right});
      auto S = static_cast<std::size_t>(f.table.n_states);
      std::vector<double> lphi(f.table.log_phi.begin() + static_cast<std::ptrdiff_t>(id * S),
                               f.table.log_phi.begin() + static_cast<std::ptrdiff_t>((id + 1) * S));
      std::vector<double> leta(f.table.log_eta.begin() + static_cast<std::ptrdiff_t>(id * S),
                               f.table.log_eta.begin() + static_cast<std::ptrdiff_t>((id + 1) * S));
      entry.push_back(lphi);
      entry.push_back(leta);
      nodes.push_back(std::move(entry));
    }
    out["nodes"] = std::move(nodes);
  } else {
    const JointPosterior& p = model.mv().post;
    out["kind"] = "mv";
    out["mode"] = p.mode == SplitMode::MedianOnData ? "partial" : "full";
    out["max_depth"] = p.max_depth;
    out["quantile"] = p.quantile;
    out["dim"] = p.dim;
    out["n"] = p.n;
    out["bounds"] = detail::region_to_json(p.base.bounds);
    out["base"] = detail::base_to_json(p.base);
    out["states"] = detail::states_to_json(p.states);
    out["lambda"] = p.split_prior.lambda;
    out["log_marginal_ratio"] = model.log_marginal_ratio();
    out["stats"] = nlohmann::json{{"nodes", p.nodes.size()}, {"pruned", p.pruned_count}};
    json nodes = json::array();
    for (const MvNode& nd : p.nodes) {
      nodes.push_back(json::array({nd.depth, nd.n, nd.leaf ? 1 : 0, nd.region.lower, nd.region.upper,
                                   nd.cut, nd.hmass_left, nd.cl, nd.cr, nd.left, nd.right, nd.log_eta,
                                   nd.log_phi}));
    }
    out["nodes"] = std::move(nodes);
  }
  return out;
}

inline FittedModel model_from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format") != "ptree-model/1")
    throw config_error("unknown model version (expected ptree-model/1)");
  std::string kind = j.at("kind").get<std::string>();
  SplitMode mode = j.at("mode") == "partial" ? SplitMode::MedianOnData : SplitMode::FixedMidpoint;
  if (kind == "latent") {
    LatentFit f;
    f.tree.mode = mode;
    f.tree.max_depth = j.at("max_depth").get<int>();
    f.tree.quantile = j.at("quantile").get<double>();
    f.tree.dim = j.at("dim").get<std::size_t>();
    f.tree.n = j.at("n").get<std::int64_t>();
    f.tree.bounds = detail::region_from_json(j.at("bounds"));
    f.model.base = detail::base_from_json(j.at("base"));
    f.model.states = detail::states_from_json(j.at("states"));
    auto S = static_cast<std::size_t>(f.model.states.n_states);
    f.table.n_states = f.model.states.n_states;
    for (const nlohmann::json& e : j.at("nodes")) {
      PartitionNode nd;
      nd.depth = e.at(0).get<int>();
      nd.n_total = e.at(1).get<std::int64_t>();
      nd.region.lower = e.at(2).get<std::vector<double>>();
      nd.region.upper = e.at(3).get<std::vector<double>>();
      nd.split_dim = e.at(4).get<int>();
      nd.cut = e.at(5).get<double>();
      nd.order_index = e.at(6).get<std::int64_t>();
      nd.anchor_cuts = e.at(7).get<std::vector<double>>();
      nd.counts_left = e.at(8).get<std::vector<std::int64_t>>();
      nd.counts_right = e.at(9).get<std::vector<std::int64_t>>();
      nd.removed = e.at(10).get<std::vector<std::int64_t>>();
      nd.left = e.at(11).get<int>();
      nd.right = e.at(12).get<int>();
      auto lphi = e.at(13).get<std::vector<double>>();
      auto leta = e.at(14).get<std::vector<double>>();
      if (lphi.size() != S || leta.size() != S) throw config_error("model: state table size mismatch");
      f.tree.nodes.push_back(std::move(nd));
      f.table.log_phi.insert(f.table.log_phi.end(), lphi.begin(), lphi.end());
      f.table.log_eta.insert(f.table.log_eta.end(), leta.begin(), leta.end());
    }
    if (f.tree.nodes.empty()) throw config_error("model: empty tree");
    f.post = posterior_transitions(f.tree, f.table, f.model);
    return FittedModel{std::move(f)};
  }
  if (kind != "mv") throw config_error("model: unknown kind '" + kind + "'");
  MvFit f;
  JointPosterior& p = f.post;
  p.mode = mode;
  p.max_depth = j.at("max_depth").get<int>();
  p.quantile = j.at("quantile").get<double>();
  p.dim = j.at("dim").get<std::size_t>();
  p.n = j.at("n").get<std::int64_t>();
  p.base = detail::base_from_json(j.at("base"));
  p.states = detail::states_from_json(j.at("states"));
  p.split_prior.lambda = j.at("lambda").get<std::vector<double>>();
  p.split_prior.validate(p.dim);
  p.pruned_count = j.at("stats").at("pruned").get<std::int64_t>();
  for (const nlohmann::json& e : j.at("nodes")) {
    MvNode nd;
    nd.depth = e.at(0).get<int>();
    nd.n = e.at(1).get<std::int64_t>();
    nd.leaf = e.at(2).get<int>() != 0;
    nd.region.lower = e.at(3).get<std::vector<double>>();
    nd.region.upper = e.at(4).get<std::vector<double>>();
    nd.cut = e.at(5).get<std::vector<double>>();
    nd.hmass_left = e.at(6).get<std::vector<double>>();
    nd.cl = e.at(7).get<std::vector<std::int64_t>>();
    nd.cr = e.at(8).get<std::vector<std::int64_t>>();
    nd.left = e.at(9).get<std::vector<int>>();
    nd.right = e.at(10).get<std::vector<int>>();
    nd.log_eta = e.at(11).get<std::vector<double>>();
    nd.log_phi = e.at(12).get<std::vector<double>>();
    p.nodes.push_back(std::move(nd));
  }
  if (p.nodes.empty()) throw config_error("model: empty expansion");
  return FittedModel{std::move(f)};
}

inline void save_model(const FittedModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error(path + ": cannot open for writing");
  out << model_to_json(model);
  out << "\n";
}

inline FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(path + ": invalid JSON (" + e.what() + ")");
  }
  return model_from_json(j);
}

}  // namespace ptree
