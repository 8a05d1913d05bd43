// ptree: Bayesian density estimation on dyadic partition trees.
//
// Subcommands: fit, predict, simulate, benchmark, scenarios. All randomness
// flows from explicit --seed flags; identical invocations produce identical
// bytes.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ptree/ptree.hpp"

namespace {

using namespace ptree;

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::vector<std::int64_t> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<std::int64_t> out;
  for (const std::string& tok : split_list(s)) {
    std::size_t colon = tok.find(':');
    try {
      if (colon != std::string::npos) {
        std::int64_t a = std::stoll(tok.substr(0, colon)), b = std::stoll(tok.substr(colon + 1));
        for (std::int64_t v = a; v <= b; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoll(tok));
      }
    } catch (const std::exception&) {
      throw config_error(what + ": cannot parse '" + tok + "'");
    }
  }
  if (out.empty()) throw config_error(what + ": empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const std::string& tok : split_list(s)) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw config_error(what + ": cannot parse '" + tok + "'");
    }
  }
  return out;
}

Region parse_bounds(const std::string& s) {
  Region r;
  for (const std::string& tok : split_list(s)) {
    std::size_t colon = tok.find(':');
    if (colon == std::string::npos) throw config_error("--bounds: expected lo:hi pairs");
    try {
      r.lower.push_back(std::stod(tok.substr(0, colon)));
      r.upper.push_back(std::stod(tok.substr(colon + 1)));
    } catch (const std::exception&) {
      throw config_error("--bounds: cannot parse '" + tok + "'");
    }
  }
  if (!r.valid()) throw config_error("--bounds: degenerate rectangle");
  return r;
}

SplitMode parse_mode(const std::string& s) {
  if (s == "partial") return SplitMode::MedianOnData;
  if (s == "full") return SplitMode::FixedMidpoint;
  throw config_error("--mode must be 'partial' or 'full'");
}

std::ostream& open_output(std::ofstream& file, const std::string& path) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw data_error(path + ": cannot open for writing");
  return file;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string input, output, mode = "partial", bounds, lambda, small_nodes = "leaf";
  int max_depth = 8, states = 2;
  double stop_prob = 0.5, concentration = 2.0, quantile = 0.5;
  bool beta_grid = false;
};

int cmd_fit(const FitArgs& args) {
  Region bounds;
  if (!args.bounds.empty()) bounds = parse_bounds(args.bounds);
  Dataset data = read_csv_file(args.input, bounds);
  FitConfig cfg;
  cfg.mode = parse_mode(args.mode);
  cfg.max_depth = args.max_depth;
  cfg.quantile = args.quantile;
  cfg.states = args.states;
  cfg.stop_prob = args.stop_prob;
  cfg.concentration = args.concentration;
  cfg.use_beta_grid = args.beta_grid;
  if (args.small_nodes == "split") cfg.split_small_nodes = true;
  else if (args.small_nodes != "leaf") throw config_error("--small-nodes must be 'leaf' or 'split'");
  if (!args.lambda.empty()) cfg.lambda = parse_double_list(args.lambda, "--lambda");
  if (args.max_depth < 0) throw depth_negative("--max-depth must be >= 0");
  if (!(args.quantile > 0 && args.quantile < 1)) throw config_error("--split-quantile must be in (0,1)");

  FittedModel model = fit_model(data, cfg);
  save_model(model, args.output);
  std::cout << "log_marginal_ratio=" << format_double(model.log_marginal_ratio()) << "\n";
  std::cout << "nodes=" << model.node_count() << "\n";
  if (!model.is_latent()) std::cout << "pruned=" << model.mv().post.pruned_count << "\n";
  std::cout << "model=" << args.output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model, output, grid, queries, quantiles;
  int draws = 0, mc_trees = 200, threads = 0;
  std::uint64_t seed = 1;
};

void parallel_chunks(std::size_t n_chunks, int threads, const std::function<void(std::size_t)>& work) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(n_chunks));
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (;;) {
      std::size_t ci = next.fetch_add(1);
      if (ci >= n_chunks) return;
      work(ci);
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
}

void column_quantiles(const std::vector<double>& block, std::size_t width, int draws,
                      const std::vector<double>& qs, std::size_t cell0, std::vector<double>& bands) {
  std::vector<double> column(static_cast<std::size_t>(draws));
  for (std::size_t c = 0; c < width; ++c) {
    for (int i = 0; i < draws; ++i)
      column[static_cast<std::size_t>(i)] = block[static_cast<std::size_t>(i) * width + c];
    for (std::size_t qi = 0; qi < qs.size(); ++qi) {
      auto k = static_cast<std::ptrdiff_t>(
          std::clamp<double>(std::ceil(qs[qi] * draws) - 1, 0.0, static_cast<double>(draws - 1)));
      std::nth_element(column.begin(), column.begin() + k, column.end());
      bands[(cell0 + c) * qs.size() + qi] = column[static_cast<std::size_t>(k)];
    }
  }
}

// Per-cell posterior quantiles from `draws` density draws, computed in
// chunks so huge draw counts do not hold the full draws-by-cells matrix in
// memory. Each draw is regenerated per chunk from its own derived seed, so
// chunking and threading leave the result unchanged.
std::vector<double> quantile_bands_points(const FittedModel& model, const std::vector<double>& points,
                                          std::size_t m, int draws, const std::vector<double>& qs,
                                          std::uint64_t seed, int threads) {
  std::size_t d = model.dim();
  std::vector<double> bands(m * qs.size());
  std::size_t chunk_cells = std::max<std::size_t>(1, 8'000'000 / static_cast<std::size_t>(draws));
  std::vector<std::pair<std::size_t, std::size_t>> chunks;
  for (std::size_t b = 0; b < m; b += chunk_cells) chunks.emplace_back(b, std::min(m, b + chunk_cells));
  parallel_chunks(chunks.size(), threads, [&](std::size_t ci) {
    auto [b, e] = chunks[ci];
    std::size_t w = e - b;
    std::vector<double> block(static_cast<std::size_t>(draws) * w);
    std::span<const double> pts(points.data() + b * d, w * d);
    for (int i = 0; i < draws; ++i) {
      std::vector<double> one =
          posterior_draw_points(model, derive_seed(seed, static_cast<std::uint64_t>(i)), pts);
      std::copy(one.begin(), one.end(), block.begin() + static_cast<std::size_t>(i) * w);
    }
    column_quantiles(block, w, draws, qs, b, bands);
  });
  return bands;
}

// Grid variant for multivariate models: draws are exact cell averages,
// generated over row windows.
std::vector<double> quantile_bands_mv_grid(const JointPosterior& post, const GridSpec& grid, int draws,
                                           const std::vector<double>& qs, std::uint64_t seed,
                                           int threads) {
  std::size_t cols = grid.cells() / static_cast<std::size_t>(grid.resolution[0]);
  std::vector<double> bands(grid.cells() * qs.size());
  auto rows_per_chunk = static_cast<std::int64_t>(
      std::max<std::size_t>(1, 8'000'000 / (static_cast<std::size_t>(draws) * cols)));
  std::vector<std::pair<std::int64_t, std::int64_t>> chunks;
  for (std::int64_t r = 0; r < grid.resolution[0]; r += rows_per_chunk)
    chunks.emplace_back(r, std::min<std::int64_t>(grid.resolution[0], r + rows_per_chunk));
  parallel_chunks(chunks.size(), threads, [&](std::size_t ci) {
    auto [r0, r1] = chunks[ci];
    std::size_t w = static_cast<std::size_t>(r1 - r0) * cols;
    std::vector<double> block(static_cast<std::size_t>(draws) * w);
    for (int i = 0; i < draws; ++i) {
      std::vector<double> one =
          sample_posterior_density_mv(post, derive_seed(seed, static_cast<std::uint64_t>(i)), grid, r0, r1);
      std::copy(one.begin(), one.end(), block.begin() + static_cast<std::size_t>(i) * w);
    }
    column_quantiles(block, w, draws, qs, static_cast<std::size_t>(r0) * cols, bands);
  });
  return bands;
}

int cmd_predict(const PredictArgs& args) {
  FittedModel model = load_model(args.model);
  std::size_t d = model.dim();

  std::vector<double> points;
  std::size_t m = 0;
  GridSpec grid;
  bool grid_mode = args.queries.empty();
  if (!grid_mode) {
    Dataset q = read_csv_file(args.queries, model.bounds());
    if (q.d != d) throw config_error("--queries: dimension mismatch with model");
    points = q.points;
    m = q.n;
  } else {
    std::vector<std::int64_t> res;
    if (!args.grid.empty()) res = parse_int_list(args.grid, "--grid");
    else res = {d == 1 ? 4096 : 256};
    grid.bounds = model.bounds();
    if (res.size() == 1) res.assign(d, res[0]);
    if (res.size() != d) throw config_error("--grid: need one resolution or one per dimension");
    for (std::int64_t r : res) {
      if (r < 1) throw config_error("--grid: resolutions must be positive");
      grid.resolution.push_back(static_cast<int>(r));
    }
    points = grid.points();
    m = grid.cells();
  }

  std::vector<double> qs;
  if (!args.quantiles.empty()) {
    qs = parse_double_list(args.quantiles, "--quantiles");
    for (double q : qs)
      if (!(q > 0.0 && q < 1.0)) throw config_error("--quantiles: values must be in (0,1)");
    if (args.draws <= 0) throw config_error("--quantiles requires --draws");
  }

  // On a grid, multivariate models report exact cell averages; point queries
  // and univariate models evaluate the density at the coordinates.
  std::vector<double> mean;
  std::vector<double> bands;
  if (grid_mode && !model.is_latent()) {
    mean = posterior_mean_mc(model.mv().post, args.mc_trees, grid, args.seed);
    if (!qs.empty())
      bands = quantile_bands_mv_grid(model.mv().post, grid, args.draws, qs, args.seed, args.threads);
  } else {
    mean = predict_mean_points(model, points, args.mc_trees, args.seed);
    if (!qs.empty())
      bands = quantile_bands_points(model, points, m, args.draws, qs, args.seed, args.threads);
  }

  std::ofstream file;
  std::ostream& out = open_output(file, args.output);
  for (std::size_t j = 0; j < d; ++j) out << "x" << (j + 1) << ',';
  out << "density";
  for (double q : qs) out << ",q" << q;
  out << "\n";
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) out << format_double(points[i * d + j]) << ',';
    out << format_double(mean[i]);
    for (std::size_t qi = 0; qi < qs.size(); ++qi) out << ',' << format_double(bands[i * qs.size() + qi]);
    out << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate / scenarios

int cmd_simulate(const std::string& name, std::int64_t n, std::uint64_t seed, const std::string& output) {
  if (n < 0) throw config_error("--n must be nonnegative");
  const ScenarioDensity& scen = scenario(name);
  std::vector<double> rows = sample_scenario(scen, static_cast<std::size_t>(n), seed);
  std::ofstream file;
  std::ostream& out = open_output(file, output);
  write_csv_matrix(out, rows, scen.dim);
  return 0;
}

int cmd_scenarios() {
  for (const ScenarioDensity& s : scenario_registry())
    std::cout << s.name << " dim=" << s.dim << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// benchmark

ExperimentPlan parse_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error(path + ": cannot open");
  ExperimentPlan plan;
  bool has_seed = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::size_t eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw config_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      std::size_t b = s.find_first_not_of(" \t\r");
      std::size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    try {
      if (key == "scenario") plan.scenario = value;
      else if (key == "n" || key == "sample_sizes") plan.sample_sizes = parse_int_list(value, key);
      else if (key == "depths") {
        plan.depths.clear();
        for (std::int64_t v : parse_int_list(value, key)) plan.depths.push_back(static_cast<int>(v));
      } else if (key == "modes") {
        plan.modes.clear();
        for (const std::string& tok : split_list(value)) plan.modes.push_back(parse_mode(tok));
      } else if (key == "replicates") plan.replicates = static_cast<int>(std::stoll(value));
      else if (key == "seed") { plan.master_seed = std::stoull(value); has_seed = true; }
      else if (key == "grid") plan.grid_per_dim = static_cast<int>(std::stoll(value));
      else if (key == "metrics") {
        plan.metrics.clear();
        for (const std::string& tok : split_list(value)) {
          if (tok == "L1") plan.metrics.push_back(Metric::L1);
          else if (tok == "L2") plan.metrics.push_back(Metric::L2);
          else if (tok == "Linf") plan.metrics.push_back(Metric::Linf);
          else throw config_error("metrics: unknown metric '" + tok + "'");
        }
      } else if (key == "mc_trees") plan.mc_trees = static_cast<int>(std::stoll(value));
      else if (key == "states") plan.states = static_cast<int>(std::stoll(value));
      else if (key == "stop_prob") plan.stop_prob = std::stod(value);
      else if (key == "concentration") plan.concentration = std::stod(value);
      else if (key == "quantile") plan.quantile = std::stod(value);
      else throw config_error(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw config_error(path + ":" + std::to_string(lineno) + ": cannot parse value for '" + key + "'");
    }
  }
  if (plan.scenario.empty()) throw config_error(path + ": plan is missing 'scenario'");
  if (!has_seed) plan.master_seed = static_cast<std::uint64_t>(-1);  // sentinel: unset
  return plan;
}

int cmd_benchmark(const std::string& plan_path, bool seed_given, std::uint64_t seed,
                  const std::string& output, const std::string& agg_output, int threads) {
  ExperimentPlan plan = parse_plan_file(plan_path);
  if (seed_given) plan.master_seed = seed;
  else if (plan.master_seed == static_cast<std::uint64_t>(-1))
    throw config_error("benchmark requires --seed (or a 'seed' key in the plan file)");
  plan.threads = threads;
  RiskReport report = run_plan(plan);
  {
    std::ofstream file;
    std::ostream& out = open_output(file, output);
    write_risk_csv(out, report);
  }
  {
    std::ofstream file;
    std::string path = agg_output.empty() ? output + ".agg.csv" : agg_output;
    std::ostream& out = open_output(file, path);
    write_aggregate_csv(out, report);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density estimation on dyadic partition trees (median-split partial-likelihood "
               "trees and fixed midpoint trees)"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "Fit a tree model to a CSV sample");
  fit->add_option("--input", fit_args.input, "input CSV, one observation per row")->required();
  fit->add_option("--output", fit_args.output, "output model JSON path")->required();
  fit->add_option("--mode", fit_args.mode, "likelihood mode: partial | full");
  fit->add_option("--max-depth", fit_args.max_depth, "maximum tree depth");
  fit->add_option("--states", fit_args.states, "latent states: 1 (plain) or 2 (with stopping)");
  fit->add_option("--stop-prob", fit_args.stop_prob, "prior stopping probability (2-state model)");
  fit->add_option("--concentration", fit_args.concentration, "beta prior concentration c");
  fit->add_option("--split-quantile", fit_args.quantile, "order-statistic quantile for median splits");
  fit->add_option("--lambda", fit_args.lambda, "splitting-dimension weights, comma separated");
  fit->add_option("--bounds", fit_args.bounds, "sample space as lo:hi[,lo:hi...] (default unit cube)");
  fit->add_option("--small-nodes", fit_args.small_nodes,
                  "nodes with <= d points: 'leaf' (default) or 'split'");
  fit->add_flag("--beta-grid", fit_args.beta_grid, "enable the beta-function grid cache");

  PredictArgs pred_args;
  CLI::App* predict = app.add_subcommand("predict", "Evaluate a fitted model's predictive density");
  predict->add_option("--model", pred_args.model, "model JSON from 'fit'")->required();
  predict->add_option("--output", pred_args.output, "output CSV (default stdout)");
  predict->add_option("--grid", pred_args.grid, "grid resolution (one value or one per dimension)");
  predict->add_option("--queries", pred_args.queries, "CSV of query points instead of a grid");
  predict->add_option("--draws", pred_args.draws, "posterior draws for credible bands");
  predict->add_option("--quantiles", pred_args.quantiles, "band quantiles, e.g. 0.025,0.975");
  predict->add_option("--mc-trees", pred_args.mc_trees, "Monte Carlo tree draws for the mean (2-D models)");
  predict->add_option("--seed", pred_args.seed, "seed for Monte Carlo draws");
  predict->add_option("--threads", pred_args.threads, "worker threads (default: logical cores)");

  std::string sim_scenario, sim_output;
  std::int64_t sim_n = 0;
  std::uint64_t sim_seed = 0;
  bool sim_seed_given = false;
  CLI::App* simulate = app.add_subcommand("simulate", "Sample a reference scenario to CSV");
  simulate->add_option("--scenario", sim_scenario, "scenario name (see 'scenarios')")->required();
  simulate->add_option("--n", sim_n, "number of observations")->required();
  simulate->add_option("--seed", sim_seed, "sampling seed")->required()->each([&](const std::string&) {
    sim_seed_given = true;
  });
  simulate->add_option("--output", sim_output, "output CSV (default stdout)");

  std::string bench_plan, bench_output, bench_agg;
  std::uint64_t bench_seed = 0;
  bool bench_seed_given = false;
  int bench_threads = 0;
  CLI::App* benchmark = app.add_subcommand("benchmark", "Run a Monte Carlo risk plan");
  benchmark->add_option("--plan", bench_plan, "plan file (key = value lines)")->required();
  benchmark->add_option("--seed", bench_seed, "master seed")->each([&](const std::string&) {
    bench_seed_given = true;
  });
  benchmark->add_option("--output", bench_output, "per-replicate loss CSV")->required();
  benchmark->add_option("--aggregate-output", bench_agg, "aggregate CSV (default <output>.agg.csv)");
  benchmark->add_option("--threads", bench_threads, "worker threads (default: logical cores)");

  CLI::App* scenarios = app.add_subcommand("scenarios", "List registered reference densities");

  try {
    app.parse(argc, argv);
    if (fit->parsed()) return cmd_fit(fit_args);
    if (predict->parsed()) return cmd_predict(pred_args);
    if (simulate->parsed()) return cmd_simulate(sim_scenario, sim_n, sim_seed, sim_output);
    if (benchmark->parsed())
      return cmd_benchmark(bench_plan, bench_seed_given, bench_seed, bench_output, bench_agg,
                           bench_threads);
    if (scenarios->parsed()) return cmd_scenarios();
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 3;
  } catch (const ptree::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
