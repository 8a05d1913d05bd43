// Acceptance suite: every criterion below runs against its stated tolerance
// and prints one PASS/FAIL line. The process exit code is the number of
// failed criteria. `acceptance --only N` runs a single criterion.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "ptree/ptree.hpp"
#include "oracles.hpp"

using namespace ptree;
using Clock = std::chrono::steady_clock;

namespace {

struct Check {
  bool ok = true;
  long count = 0;
  std::ostringstream log;

  void expect(bool cond, const std::string& what) {
    ++count;
    if (!cond) {
      ok = false;
      log << "    failed: " << what << "\n";
    }
  }
  void expect_close(double got, double want, double tol, const std::string& what) {
    ++count;
    if (!(std::fabs(got - want) <= tol)) {
      ok = false;
      log << "    failed: " << what << " (got " << got << ", want " << want << " +- " << tol << ")\n";
    }
  }
  void expect_rel(double got, double want, double rel, const std::string& what) {
    double tol = rel * std::max({std::fabs(got), std::fabs(want), 1e-300});
    expect_close(got, want, tol, what);
  }
};

// --------------------------------------------------------------------------
// 1. Conjugacy oracle: single-split trees against the closed-form
//    beta-binomial marginal likelihood ratio, 100 randomized instances.

void criterion_conjugacy(Check& c) {
  Rng rng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    double conc = rng.uniform(0.2, 12.0);
    PriorSpec prior = PriorSpec::uniform(Region::unit_cube(1), conc);
    bool beta_base = rep % 3 == 0;
    if (beta_base)
      prior.base.marginals[0] = Marginal{Marginal::Kind::Beta, rng.uniform(0.5, 4.0), rng.uniform(0.5, 4.0)};

    PartitionTree tree;
    if (rep % 2 == 0) {
      // midpoint split with arbitrary child counts
      auto nl = static_cast<std::int64_t>(rng.uniform_index(10));
      auto nr = static_cast<std::int64_t>(1 + rng.uniform_index(10));
      if (nl + nr < 2) nl = 2;  // a single point would make the root a leaf
      std::vector<double> xs;
      for (std::int64_t i = 0; i < nl; ++i) xs.push_back(rng.uniform(0.0, 0.4999));
      for (std::int64_t i = 0; i < nr; ++i) xs.push_back(rng.uniform(0.5001, 1.0));
      tree = build_fixed_tree(Dataset::from_rows(xs, 1, Region::unit_cube(1)), 1);
    } else {
      // median split at a random order-statistic quantile
      auto n = 2 + static_cast<std::int64_t>(rng.uniform_index(18));
      double p = rng.uniform(0.1, 0.9);
      std::vector<double> xs;
      for (std::int64_t i = 0; i < n; ++i) xs.push_back(rng.uniform());
      tree = build_partial_tree(Dataset::from_rows(xs, 1, Region::unit_cube(1)), 1, p);
    }
    const PartitionNode& root = tree.root();
    if (root.is_leaf()) continue;
    double hl = prior.base.conditional_left(0, 0.0, 1.0, root.cut);
    double al = conc * hl, ar = conc * (1.0 - hl);
    auto nl = static_cast<double>(root.counts_left[0]), nr = static_cast<double>(root.counts_right[0]);
    double closed = std::lgamma(al + nl) + std::lgamma(ar + nr) - std::lgamma(al + ar + nl + nr) -
                    std::lgamma(al) - std::lgamma(ar) + std::lgamma(al + ar) - nl * std::log(hl) -
                    nr * std::log1p(-hl);
    c.expect_close(bayes_factor(tree, prior), closed, 1e-12,
                   "closed-form Bayes factor, instance " + std::to_string(rep));
  }
}

// --------------------------------------------------------------------------
// 2. Enumeration oracle: recursive messages, posterior transitions and the
//    predictive against exhaustive enumeration over (tree, state) configs.

void criterion_enumeration(Check& c) {
  Rng gen(55);
  struct Instance { std::size_t n, d; int depth; };
  std::vector<Instance> instances{{12, 1, 3}, {9, 1, 3}, {12, 2, 3}, {10, 2, 2}, {7, 2, 3}};
  for (const Instance& inst : instances) {
    std::vector<double> rows(inst.n * inst.d);
    for (double& v : rows) v = gen.uniform();
    Dataset data = Dataset::from_rows(rows, inst.d, Region::unit_cube(inst.d));
    StateModel states = StateModel::opt(0.45, 2.0);
    SplitPrior lambda = inst.d == 1 ? SplitPrior{{1.0}} : SplitPrior{{0.4, 0.6}};

    MvOptions opt;
    opt.max_depth = inst.depth;
    JointPosterior post = expand_and_pass(data, BaseMeasure::uniform(data.bounds), states, lambda, opt);

    oracle::EnumProblem p;
    p.data = &data;
    p.states = states;
    p.lambda = lambda.lambda;
    p.max_depth = inst.depth;
    auto configs = oracle::enumerate_all(p);
    std::string tag = " (n=" + std::to_string(inst.n) + ", d=" + std::to_string(inst.d) + ")";

    c.expect_rel(post.log_phi_entry(), std::log(oracle::enum_phi(configs)), 1e-10, "log phi" + tag);

    std::vector<double> row(inst.d * 2);
    post.joint_transition(0, states.entry_state, row);
    std::vector<double> want = oracle::enum_root_joint(p, configs);
    for (std::size_t i = 0; i < row.size(); ++i)
      c.expect_close(row[i], want[i], 1e-10, "root joint transition entry" + tag);

    for (int q = 0; q < 4; ++q) {
      std::vector<double> x(inst.d);
      for (double& v : x) v = gen.uniform();
      c.expect_rel(predictive_density_exact(post, x.data()),
                   oracle::enum_predictive(p, configs, x.data()), 1e-10, "predictive density" + tag);
    }
  }

  // univariate per-node posterior state marginals against enumeration
  {
    std::vector<double> xs(11);
    for (double& v : xs) v = gen.uniform();
    Dataset data = Dataset::from_rows(xs, 1, Region::unit_cube(1));
    PartitionTree tree = build_partial_tree(data, 3);
    LatentModel model = LatentModel::opt_uniform(Region::unit_cube(1), 0.45, 2.0);
    MessageTable table = message_pass(tree, model);
    PosteriorTransition trans = posterior_transitions(tree, table, model);
    oracle::EnumProblem p;
    p.data = &data;
    p.states = model.states;
    p.lambda = {1.0};
    p.max_depth = 3;
    auto configs = oracle::enumerate_all(p);
    std::function<void(int, const std::string&, const std::vector<double>&)> walk =
        [&](int id, const std::string& path, const std::vector<double>& marg) {
          const PartitionNode& nd = tree.node(id);
          if (nd.is_leaf() || nd.n_total <= 1) return;
          std::vector<double> here(2, 0.0);
          for (int s = 0; s < 2; ++s)
            for (int t = 0; t < 2; ++t)
              here[static_cast<std::size_t>(t)] += marg[static_cast<std::size_t>(s)] * trans.at(id, s, t);
          std::vector<double> want = oracle::enum_state_marginal(p, configs, path);
          for (int t = 0; t < 2; ++t)
            c.expect_close(here[static_cast<std::size_t>(t)], want[static_cast<std::size_t>(t)], 1e-10,
                           "state marginal at " + (path.empty() ? std::string("root") : path));
          walk(nd.left, path + "0L", here);
          walk(nd.right, path + "0R", here);
        };
    walk(0, "", {1.0, 0.0});
  }
}

// --------------------------------------------------------------------------
// 3. Normalization: predictive densities and posterior draws integrate to
//    one on the quadrature grids declared here, for every registered
//    scenario. The univariate estimators are evaluated pointwise, so their
//    quadrature grid (2^16 midpoints) is chosen fine enough to resolve the
//    fitted partitions; bivariate grid outputs are exact cell averages on
//    the 256x256 risk grid, whose Riemann sum recovers the integral of the
//    piecewise density exactly.

void criterion_normalization(Check& c) {
  for (const ScenarioDensity& scen : scenario_registry()) {
    for (std::int64_t n : {500, 5000}) {
      Dataset data = Dataset::from_rows(
          sample_scenario(scen, static_cast<std::size_t>(n), derive_seed(808, static_cast<std::uint64_t>(n))),
          scen.dim, Region::unit_cube(scen.dim));
      std::string tag = scen.name + " n=" + std::to_string(n);
      if (scen.dim == 1) {
        PartitionTree tree = build_partial_tree(data, 8);
        LatentModel model = LatentModel::opt_uniform(Region::unit_cube(1));
        MessageTable table = message_pass(tree, model);
        PosteriorTransition post = posterior_transitions(tree, table, model);
        GridSpec grid = GridSpec::regular(Region::unit_cube(1), 1 << 16);
        auto pts = grid.points();
        std::vector<double> dens(grid.cells());
        for (std::size_t i = 0; i < dens.size(); ++i)
          dens[i] = predictive_density_latent(tree, model, post, &pts[i]);
        c.expect_close(grid_integral(grid, dens), 1.0, 2e-3, "exact predictive integral, " + tag);
        for (std::uint64_t s = 0; s < 3; ++s) {
          auto draw = sample_posterior_density_latent(tree, model, post, derive_seed(17, s), pts);
          c.expect_close(grid_integral(grid, draw), 1.0, 2e-3,
                         "posterior draw integral, " + tag + " draw " + std::to_string(s));
        }
      } else {
        MvOptions opt;
        opt.max_depth = 8;
        JointPosterior post = expand_and_pass(data, BaseMeasure::uniform(data.bounds),
                                              StateModel::opt(0.5, 2.0), SplitPrior::uniform(2), opt);
        GridSpec grid = GridSpec::regular(Region::unit_cube(2), 256);
        auto mean = posterior_mean_mc(post, 200, grid, derive_seed(909, static_cast<std::uint64_t>(n)));
        c.expect_close(grid_integral(grid, mean), 1.0, 2e-3, "MC predictive integral, " + tag);
        for (std::uint64_t s = 0; s < 2; ++s) {
          auto draw = sample_posterior_density_mv(post, derive_seed(18, s), grid);
          c.expect_close(grid_integral(grid, draw), 1.0, 2e-3,
                         "posterior draw integral, " + tag + " draw " + std::to_string(s));
        }
      }
    }
  }
}

// --------------------------------------------------------------------------
// 4. Degeneracy suite.

void criterion_degeneracy(Check& c) {
  Rng gen(4);
  std::vector<double> xs;
  for (int i = 0; i < 300; ++i) xs.push_back(gen.beta(2.0, 6.0));
  Dataset data = Dataset::from_rows(xs, 1, Region::unit_cube(1));

  // (a) all-stop prior: the predictive is the base density, exactly
  {
    PartitionTree tree = build_partial_tree(data, 6);
    LatentModel model{BaseMeasure::uniform(data.bounds), StateModel::opt(1.0, 2.0), nullptr};
    MessageTable table = message_pass(tree, model);
    PosteriorTransition post = posterior_transitions(tree, table, model);
    for (double x : {0.03, 0.33, 0.5, 0.92})
      c.expect(predictive_density_latent(tree, model, post, &x) == 1.0, "all-stop predictive equals h");
  }

  // (b) a single state reduces the latent model to the plain kernel
  {
    PartitionTree tree = build_partial_tree(data, 6);
    LatentModel model{BaseMeasure::uniform(data.bounds), StateModel::single(2.0), nullptr};
    PriorSpec prior = PriorSpec::uniform(Region::unit_cube(1), 2.0);
    MessageTable table = message_pass(tree, model);
    c.expect_close(log_marginal_ratio(table, model.states), bayes_factor(tree, prior), 1e-12,
                   "single-state marginal equals plain kernel");
    PosteriorTransition post = posterior_transitions(tree, table, model);
    for (double x : {0.07, 0.41, 0.88})
      c.expect_close(predictive_density_latent(tree, model, post, &x),
                     predictive_density(tree, prior, &x), 1e-12, "single-state predictive");
  }

  // (c) one-dimensional expansion reduces to the single-tree latent model
  {
    StateModel states = StateModel::opt(0.5, 2.0);
    MvOptions opt;
    opt.max_depth = 6;
    JointPosterior post = expand_and_pass(data, BaseMeasure::uniform(data.bounds), states,
                                          SplitPrior{{1.0}}, opt);
    PartitionTree tree = build_partial_tree(data, 6);
    LatentModel model{BaseMeasure::uniform(data.bounds), states, nullptr};
    MessageTable table = message_pass(tree, model);
    PosteriorTransition trans = posterior_transitions(tree, table, model);
    c.expect_close(post.log_phi_entry(), log_marginal_ratio(table, states), 1e-10,
                   "d=1 expansion log phi");
    for (double x : {0.11, 0.52, 0.79})
      c.expect_close(predictive_density_exact(post, &x),
                     predictive_density_latent(tree, model, trans, &x), 1e-10, "d=1 expansion predictive");
  }

  // (d) depth zero: identical losses across likelihood modes
  {
    ExperimentPlan plan;
    plan.scenario = "beta64";
    plan.sample_sizes = {200};
    plan.depths = {0};
    plan.replicates = 2;
    plan.master_seed = 77;
    plan.grid_per_dim = 1024;
    RiskReport report = run_plan(plan);
    for (const RiskRow& a : report.rows)
      for (const RiskRow& b : report.rows)
        if (a.replicate == b.replicate && a.metric == b.metric && a.mode != b.mode)
          c.expect(a.loss == b.loss, "depth-0 losses equal across modes");
  }
}

// --------------------------------------------------------------------------
// 5. Scale invariance under joint affine rescaling of data and base measure.

void criterion_scale_invariance(Check& c) {
  Rng gen(6);
  // univariate
  {
    std::vector<double> xs;
    for (int i = 0; i < 400; ++i) xs.push_back(gen.beta(6.0, 4.0));
    Dataset data = Dataset::from_rows(xs, 1, Region::unit_cube(1));
    const double a = 3.25, b = -1.5;
    std::vector<double> ys;
    for (double x : xs) ys.push_back(a * x + b);
    Region bounds{{b}, {a + b}};
    Dataset scaled = Dataset::from_rows(ys, 1, bounds);

    PartitionTree t0 = build_partial_tree(data, 7);
    PartitionTree t1 = build_partial_tree(scaled, 7);
    LatentModel m0 = LatentModel::opt_uniform(Region::unit_cube(1));
    LatentModel m1 = LatentModel::opt_uniform(bounds);
    MessageTable tab0 = message_pass(t0, m0);
    MessageTable tab1 = message_pass(t1, m1);
    c.expect_close(log_marginal_ratio(tab1, m1.states), log_marginal_ratio(tab0, m0.states), 1e-10,
                   "1-D log phi under rescaling");
    PosteriorTransition p0 = posterior_transitions(t0, tab0, m0);
    PosteriorTransition p1 = posterior_transitions(t1, tab1, m1);
    for (double x : {0.12, 0.5, 0.86}) {
      double y = a * x + b;
      double r0 = predictive_density_latent(t0, m0, p0, &x) / std::exp(m0.base.log_density(&x));
      double r1 = predictive_density_latent(t1, m1, p1, &y) / std::exp(m1.base.log_density(&y));
      c.expect_close(r1, r0, 1e-10, "1-D predictive ratio under rescaling");
    }
  }
  // bivariate, each dimension rescaled differently
  {
    std::vector<double> rows = sample_scenario(scenario("gbeta3"), 300, 21);
    Dataset data = Dataset::from_rows(rows, 2, Region::unit_cube(2));
    const double ax = 2.0, bx = 10.0, ay = 0.25, by = -3.0;
    std::vector<double> scaled_rows(rows.size());
    for (std::size_t i = 0; i < rows.size() / 2; ++i) {
      scaled_rows[2 * i] = ax * rows[2 * i] + bx;
      scaled_rows[2 * i + 1] = ay * rows[2 * i + 1] + by;
    }
    Region bounds{{bx, by}, {ax + bx, ay + by}};
    Dataset scaled = Dataset::from_rows(scaled_rows, 2, bounds);
    StateModel states = StateModel::opt(0.5, 2.0);
    MvOptions opt;
    opt.max_depth = 5;
    JointPosterior f0 = expand_and_pass(data, BaseMeasure::uniform(data.bounds), states,
                                        SplitPrior::uniform(2), opt);
    JointPosterior f1 = expand_and_pass(scaled, BaseMeasure::uniform(bounds), states,
                                        SplitPrior::uniform(2), opt);
    c.expect_close(f1.log_phi_entry(), f0.log_phi_entry(), 1e-10, "2-D log phi under rescaling");
    for (int q = 0; q < 3; ++q) {
      double x[2] = {gen.uniform(), gen.uniform()};
      double y[2] = {ax * x[0] + bx, ay * x[1] + by};
      double r0 = predictive_density_exact(f0, x) / f0.base.density(x);
      double r1 = predictive_density_exact(f1, y) / f1.base.density(y);
      c.expect_close(r1, r0, 1e-10, "2-D predictive ratio under rescaling");
    }
  }
}

// --------------------------------------------------------------------------
// 6. Trend reproduction, univariate study: R = 20, n = 5000, depths 1-12,
//    sign of the mean log-L2 gap, majority over three master seeds.

double mean_log_l2(const RiskReport& report, int depth, SplitMode mode) {
  for (const RiskAggregate& a : report.aggregates)
    if (a.depth == depth && a.mode == mode && a.metric == Metric::L2) return a.mean_log_loss;
  throw std::logic_error("aggregate not found");
}

void criterion_univariate_trend(Check& c) {
  const std::uint64_t seeds[] = {101, 202, 303};
  struct Study {
    const char* scenario;
    int lo, hi;
    bool partial_better;
  };
  const Study studies[] = {
      {"beta500_20", 4, 8, true},
      {"mix1d", 4, 8, true},
      {"beta64", 2, 5, false},  // full <= partial on the smooth density
  };
  for (const Study& study : studies) {
    std::vector<RiskReport> reports;
    for (std::uint64_t seed : seeds) {
      ExperimentPlan plan;
      plan.scenario = study.scenario;
      plan.sample_sizes = {5000};
      plan.depths.assign({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
      plan.replicates = 20;
      plan.master_seed = seed;
      plan.metrics = {Metric::L2};
      reports.push_back(run_plan(plan));
    }
    for (int depth = study.lo; depth <= study.hi; ++depth) {
      int votes = 0;
      for (const RiskReport& report : reports) {
        double partial = mean_log_l2(report, depth, SplitMode::MedianOnData);
        double full = mean_log_l2(report, depth, SplitMode::FixedMidpoint);
        bool holds = study.partial_better ? partial < full : full <= partial;
        votes += holds ? 1 : 0;
      }
      c.expect(votes >= 2, std::string(study.scenario) + " depth " + std::to_string(depth) +
                               " sign holds in " + std::to_string(votes) + "/3 seeds");
    }
  }
}

// --------------------------------------------------------------------------
// 7. Trend reproduction, bivariate study: R = 10, n = 5000, depth 9,
//    200 Monte Carlo trees per fit.

void criterion_bivariate_trend(Check& c) {
  const std::uint64_t seeds[] = {111, 222, 333};
  for (const char* name : {"gbeta1", "mix1"}) {
    int votes = 0;
    for (std::uint64_t seed : seeds) {
      ExperimentPlan plan;
      plan.scenario = name;
      plan.sample_sizes = {5000};
      plan.depths = {9};
      plan.replicates = 10;
      plan.master_seed = seed;
      plan.metrics = {Metric::L2};
      plan.mc_trees = 200;
      RiskReport report = run_plan(plan);
      double partial = mean_log_l2(report, 9, SplitMode::MedianOnData);
      double full = mean_log_l2(report, 9, SplitMode::FixedMidpoint);
      votes += partial < full ? 1 : 0;
    }
    c.expect(votes >= 2, std::string(name) + " partial beats full in " + std::to_string(votes) + "/3 seeds");
  }
}

// --------------------------------------------------------------------------
// 8. Generalized beta correctness: closed-form value and sampler/pdf
//    goodness of fit for the four documented parameter tuples.

void criterion_generalized_beta(Check& c) {
  GeneralizedBetaParams ones{1, 1, 1, 1, 1, 1};
  c.expect_close(eval_generalized_beta(ones, 0.5, 0.5), 32.0 / 27.0, 1e-12, "all-ones value 32/27");

  const GeneralizedBetaParams tuples[] = {
      {50, 1, 100, 1, 150, 1}, {12, 1, 25, 1, 35, 1}, {3, 1, 6, 1, 9, 1}, {5, 10, 3, 10, 3, 10}};
  std::vector<double> xs, ws;
  oracle::gauss_legendre(16, xs, ws);
  for (std::size_t tuple_idx = 0; tuple_idx < 4; ++tuple_idx) {
    const GeneralizedBetaParams& p = tuples[tuple_idx];
    const std::size_t kN = 100000;
    auto sample = sample_generalized_beta(p, kN, derive_seed(4242, tuple_idx));
    const int kBins = 32;
    std::vector<double> observed(static_cast<std::size_t>(kBins * kBins), 0.0);
    for (std::size_t i = 0; i < kN; ++i) {
      auto bx = std::min<int>(static_cast<int>(sample[2 * i] * kBins), kBins - 1);
      auto by = std::min<int>(static_cast<int>(sample[2 * i + 1] * kBins), kBins - 1);
      observed[static_cast<std::size_t>(bx * kBins + by)] += 1.0;
    }
    double chi2 = 0.0;
    int used = 0;
    double w = 1.0 / kBins, half = 0.5 / kBins;
    for (int bx = 0; bx < kBins; ++bx) {
      for (int by = 0; by < kBins; ++by) {
        double cx = (bx + 0.5) * w, cy = (by + 0.5) * w;
        double prob = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i)
          for (std::size_t j = 0; j < xs.size(); ++j)
            prob += half * half * ws[i] * ws[j] *
                    eval_generalized_beta(p, cx + half * xs[i], cy + half * xs[j]);
        double expected = prob * kN;
        if (expected < 5.0) continue;
        double o = observed[static_cast<std::size_t>(bx * kBins + by)];
        chi2 += (o - expected) * (o - expected) / expected;
        ++used;
      }
    }
    double df = used - 1;
    c.expect(used > 10 && chi2 < df + 5.0 * std::sqrt(2.0 * df),
             "goodness of fit, tuple " + std::to_string(tuple_idx + 1) + " (chi2 " +
                 std::to_string(chi2) + ", df " + std::to_string(df) + ")");
  }
}

// --------------------------------------------------------------------------
// 9. Determinism and round-trip identity.

void criterion_determinism(Check& c) {
  // identical seeds give bit-identical risk reports
  ExperimentPlan plan;
  plan.scenario = "beta500_20";
  plan.sample_sizes = {400};
  plan.depths = {3, 6};
  plan.replicates = 3;
  plan.master_seed = 13;
  plan.grid_per_dim = 1024;
  plan.threads = 2;
  RiskReport a = run_plan(plan);
  plan.threads = 1;
  RiskReport b = run_plan(plan);
  c.expect(a.rows.size() == b.rows.size(), "report row counts match");
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    c.expect(a.rows[i].loss == b.rows[i].loss, "bit-identical losses independent of threading");

  // fit -> serialize -> load -> predict matches in-memory evaluation exactly
  {
    auto xsamp = sample_scenario(scenario("mix1d"), 800, 3);
    Dataset data = Dataset::from_rows(xsamp, 1, Region::unit_cube(1));
    FitConfig cfg;
    cfg.max_depth = 7;
    FittedModel model = fit_model(data, cfg);
    FittedModel reloaded = model_from_json(nlohmann::json::parse(model_to_json(model).dump()));
    GridSpec grid = GridSpec::regular(Region::unit_cube(1), 2048);
    auto pts = grid.points();
    c.expect(predict_mean_points(model, pts, 1, 0) == predict_mean_points(reloaded, pts, 1, 0),
             "1-D reloaded predictive bit-identical");
    c.expect(posterior_draw_points(model, 5, pts) == posterior_draw_points(reloaded, 5, pts),
             "1-D reloaded posterior draw bit-identical");
  }
  {
    auto rows = sample_scenario(scenario("mix1"), 600, 3);
    Dataset data = Dataset::from_rows(rows, 2, Region::unit_cube(2));
    FitConfig cfg;
    cfg.max_depth = 5;
    FittedModel model = fit_model(data, cfg);
    FittedModel reloaded = model_from_json(nlohmann::json::parse(model_to_json(model).dump()));
    GridSpec grid = GridSpec::regular(Region::unit_cube(2), 64);
    c.expect(predict_mean_grid(model, grid, 100, 7) == predict_mean_grid(reloaded, grid, 100, 7),
             "2-D reloaded MC predictive bit-identical");
    c.expect(sample_posterior_density_mv(model.mv().post, 11, grid) ==
                 sample_posterior_density_mv(reloaded.mv().post, 11, grid),
             "2-D reloaded posterior draw bit-identical");
  }
}

struct Criterion {
  int id;
  const char* name;
  void (*run)(Check&);
};

const Criterion kCriteria[] = {
    {1, "conjugacy-oracle", criterion_conjugacy},
    {2, "enumeration-oracle", criterion_enumeration},
    {3, "normalization", criterion_normalization},
    {4, "degeneracy-suite", criterion_degeneracy},
    {5, "scale-invariance", criterion_scale_invariance},
    {6, "univariate-trend", criterion_univariate_trend},
    {7, "bivariate-trend", criterion_bivariate_trend},
    {8, "generalized-beta", criterion_generalized_beta},
    {9, "determinism-roundtrip", criterion_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::strcmp(argv[i], "--only") == 0) only = std::atoi(argv[i + 1]);

  int failures = 0;
  for (const Criterion& crit : kCriteria) {
    if (only != 0 && crit.id != only) continue;
    Check check;
    auto t0 = Clock::now();
    try {
      crit.run(check);
    } catch (const std::exception& e) {
      check.ok = false;
      check.log << "    exception: " << e.what() << "\n";
    }
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::cout << (check.ok ? "[PASS] " : "[FAIL] ") << crit.id << ". " << crit.name << " ("
              << check.count << " checks, " << secs << "s)\n"
              << check.log.str();
    std::cout.flush();
    failures += check.ok ? 0 : 1;
  }
  if (failures) std::cout << failures << " criterion(s) failed\n";
  else std::cout << "all criteria passed\n";
  return failures;
}
