#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "ptree/csv.hpp"
#include "ptree/densities.hpp"
#include "ptree/grid.hpp"
#include "ptree/latent.hpp"
#include "ptree/mv_opt.hpp"
#include "ptree/partition.hpp"
#include "ptree/rng.hpp"

// Monte Carlo risk benchmark: fits the median-split (partial-likelihood) and
// midpoint (full-likelihood) estimators on fresh samples from a reference
// scenario and records L1/L2/Linf losses against the true density on a
// midpoint grid, across sample sizes, depths and replicates.
//
// Both likelihood arms of a replicate consume the same sample, and the
// Monte Carlo tree draws of the bivariate estimator reuse one seed stream
// per replicate, so mode comparisons are paired. Replicates run in parallel
// with derived seeds; rows land in preassigned slots, making the report a
// pure function of the plan.

namespace ptree {

enum class Metric { L1, L2, Linf };

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::L1: return "L1";
    case Metric::L2: return "L2";
    default: return "Linf";
  }
}

inline const char* mode_name(SplitMode m) {
  return m == SplitMode::MedianOnData ? "partial" : "full";
}

struct ExperimentPlan {
  std::string scenario;
  std::vector<std::int64_t> sample_sizes{5000};
  std::vector<int> depths{8};
  std::vector<SplitMode> modes{SplitMode::MedianOnData, SplitMode::FixedMidpoint};
  int replicates = 20;
  std::uint64_t master_seed = 0;
  int grid_per_dim = 0;  // 0: 4096 in 1-D, 256 in 2-D
  std::vector<Metric> metrics{Metric::L1, Metric::L2, Metric::Linf};
  int mc_trees = 200;
  int states = 2;
  double stop_prob = 0.5;
  double concentration = 2.0;
  double quantile = 0.5;
  int threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (replicates < 1) throw config_error("plan: replicates must be >= 1");
    if (sample_sizes.empty() || depths.empty() || modes.empty() || metrics.empty())
      throw config_error("plan: sample sizes, depths, modes and metrics must be non-empty");
    for (std::size_t i = 1; i < depths.size(); ++i)
      if (depths[i] < depths[i - 1]) throw config_error("plan: depths must be ascending");
    if (depths.front() < 0) throw config_error("plan: depths must be nonnegative");
    if (mc_trees < 1) throw config_error("plan: mc_trees must be >= 1");
    if (states < 1) throw config_error("plan: states must be >= 1");
    if (!(stop_prob >= 0.0 && stop_prob < 1.0)) throw config_error("plan: stop_prob must be in [0,1)");
    if (!(concentration > 0.0)) throw config_error("plan: concentration must be positive");
  }

  int effective_grid(std::size_t dim) const {
    if (grid_per_dim > 0) return grid_per_dim;
    return dim == 1 ? 4096 : 256;
  }
};

struct RiskRow {
  std::string scenario;
  std::int64_t n = 0;
  int depth = 0;
  SplitMode mode = SplitMode::MedianOnData;
  int replicate = 0;
  Metric metric = Metric::L2;
  double loss = 0.0;
};

struct RiskAggregate {
  std::string scenario;
  std::int64_t n = 0;
  int depth = 0;
  SplitMode mode = SplitMode::MedianOnData;
  Metric metric = Metric::L2;
  double mean_log_loss = 0.0;
  double se_log_loss = 0.0;
  int count = 0;
};

struct RiskReport {
  std::vector<RiskRow> rows;
  std::vector<RiskAggregate> aggregates;
};

// Discretized losses on congruent midpoint grids.
inline double loss(std::span<const double> estimate, std::span<const double> truth, Metric metric,
                   double cell_volume) {
  if (estimate.size() != truth.size()) throw grid_mismatch("loss: estimate and truth grids differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    double d = std::fabs(estimate[i] - truth[i]);
    switch (metric) {
      case Metric::L1: acc += d * cell_volume; break;
      case Metric::L2: acc += d * d * cell_volume; break;
      case Metric::Linf: acc = std::max(acc, d); break;
    }
  }
  return metric == Metric::L2 ? std::sqrt(acc) : acc;
}

namespace detail {

inline StateModel plan_states(const ExperimentPlan& plan) {
  if (plan.states == 1) return StateModel::single(plan.concentration);
  if (plan.states == 2) return StateModel::opt(plan.stop_prob, plan.concentration);
  throw config_error("plan: only 1- and 2-state models are configured here");
}

// One (n, replicate) cell: fit every (depth, mode) on a shared sample.
inline void run_cell(const ExperimentPlan& plan, const ScenarioDensity& scen, const GridSpec& grid,
                     const std::vector<double>& truth, std::int64_t n, int replicate,
                     std::vector<RiskRow>& out) {
  std::uint64_t data_seed = derive_seed(plan.master_seed, static_cast<std::uint64_t>(replicate),
                                        static_cast<std::uint64_t>(n));
  std::uint64_t mc_seed = derive_seed(plan.master_seed, static_cast<std::uint64_t>(replicate),
                                      static_cast<std::uint64_t>(n), 0x6d63);
  Dataset data = Dataset::from_rows(sample_scenario(scen, static_cast<std::size_t>(n), data_seed),
                                    scen.dim, Region::unit_cube(scen.dim));
  StateModel states = plan_states(plan);
  std::vector<double> mids;
  if (scen.dim == 1) mids = grid.points();

  std::size_t slot = 0;
  for (int depth : plan.depths) {
    for (SplitMode mode : plan.modes) {
      std::vector<double> estimate;
      if (scen.dim == 1) {
        PartitionTree tree = mode == SplitMode::MedianOnData
                                 ? build_partial_tree(data, depth, plan.quantile)
                                 : build_fixed_tree(data, depth);
        LatentModel model{BaseMeasure::uniform(data.bounds), states, nullptr};
        MessageTable table = message_pass(tree, model);
        PosteriorTransition post = posterior_transitions(tree, table, model);
        estimate.resize(grid.cells());
        for (std::size_t i = 0; i < estimate.size(); ++i)
          estimate[i] = predictive_density_latent(tree, model, post, &mids[i]);
      } else {
        MvOptions opt;
        opt.max_depth = depth;
        opt.quantile = plan.quantile;
        opt.mode = mode;
        JointPosterior post =
            expand_and_pass(data, BaseMeasure::uniform(data.bounds), states,
                            SplitPrior::uniform(scen.dim), opt);
        estimate = posterior_mean_mc(post, plan.mc_trees, grid, mc_seed);
      }
      for (Metric metric : plan.metrics) {
        RiskRow& row = out[slot++];
        row.scenario = plan.scenario;
        row.n = n;
        row.depth = depth;
        row.mode = mode;
        row.replicate = replicate;
        row.metric = metric;
        row.loss = loss(estimate, truth, metric, grid.cell_volume());
      }
    }
  }
}

}  // namespace detail

inline RiskReport run_plan(const ExperimentPlan& plan) {
  plan.validate();
  const ScenarioDensity& scen = scenario(plan.scenario);
  GridSpec grid = GridSpec::regular(Region::unit_cube(scen.dim), plan.effective_grid(scen.dim));
  std::vector<double> truth(grid.cells());
  {
    std::vector<double> x(scen.dim);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      grid.point(i, x.data());
      truth[i] = scen.pdf(x.data());
    }
  }

  struct Cell { std::int64_t n; int replicate; };
  std::vector<Cell> cells;
  for (std::int64_t n : plan.sample_sizes)
    for (int r = 0; r < plan.replicates; ++r) cells.push_back({n, r});
  std::size_t rows_per_cell = plan.depths.size() * plan.modes.size() * plan.metrics.size();

  RiskReport report;
  report.rows.assign(cells.size() * rows_per_cell, RiskRow{});

  unsigned workers = plan.threads > 0 ? static_cast<unsigned>(plan.threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cells.size()));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error_text;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size() || failed.load()) return;
      std::vector<RiskRow> slot(rows_per_cell);
      try {
        detail::run_cell(plan, scen, grid, truth, cells[i].n, cells[i].replicate, slot);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        failed.store(true);
        if (error_text.empty())
          error_text = "replicate " + std::to_string(cells[i].replicate) + " (n=" +
                       std::to_string(cells[i].n) + "): " + e.what();
        return;
      }
      std::copy(slot.begin(), slot.end(), report.rows.begin() + static_cast<std::ptrdiff_t>(i * rows_per_cell));
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw Error(ErrorCode::NumericError, "run_plan failed at " + error_text);

  // Aggregate mean and standard error of log-loss per (n, depth, mode, metric).
  for (std::int64_t n : plan.sample_sizes) {
    for (int depth : plan.depths) {
      for (SplitMode mode : plan.modes) {
        for (Metric metric : plan.metrics) {
          double sum = 0.0, sumsq = 0.0;
          int count = 0;
          for (const RiskRow& row : report.rows) {
            if (row.n != n || row.depth != depth || row.mode != mode || row.metric != metric) continue;
            double ll = std::log(row.loss);
            sum += ll;
            sumsq += ll * ll;
            ++count;
          }
          RiskAggregate agg;
          agg.scenario = plan.scenario;
          agg.n = n;
          agg.depth = depth;
          agg.mode = mode;
          agg.metric = metric;
          agg.count = count;
          agg.mean_log_loss = sum / count;
          double var = count > 1 ? (sumsq - sum * sum / count) / (count - 1) : 0.0;
          agg.se_log_loss = std::sqrt(std::max(var, 0.0) / count);
          report.aggregates.push_back(agg);
        }
      }
    }
  }
  return report;
}

inline void write_risk_csv(std::ostream& out, const RiskReport& report) {
  out << "scenario,n,depth,mode,replicate,metric,loss\n";
  for (const RiskRow& r : report.rows)
    out << r.scenario << ',' << r.n << ',' << r.depth << ',' << mode_name(r.mode) << ','
        << r.replicate << ',' << metric_name(r.metric) << ',' << format_double(r.loss) << "\n";
}

inline void write_aggregate_csv(std::ostream& out, const RiskReport& report) {
  out << "scenario,n,depth,mode,metric,mean_log_loss,se_log_loss,replicates\n";
  for (const RiskAggregate& a : report.aggregates)
    out << a.scenario << ',' << a.n << ',' << a.depth << ',' << mode_name(a.mode) << ','
        << metric_name(a.metric) << ',' << format_double(a.mean_log_loss) << ','
        << format_double(a.se_log_loss) << ',' << a.count << "\n";
}

}  // namespace ptree
