// quadrl: train, evaluate and benchmark quadrotor policies.
//
// Exit codes: 0 success, 1 usage or input error, 2 numerical divergence.

#include "quadrl/config.hpp"
#include "quadrl/errors.hpp"
#include "quadrl/evaluation.hpp"
#include "quadrl/parallel.hpp"
#include "quadrl/trainer.hpp"
#include "quadrl/trajectory_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace quadrl;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitDivergence = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  int workers = -1;  // -1: keep the config value
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "config file (defaults are used without one)");
  cmd->add_option("--set", o.overrides, "override a key, e.g. --set policy.trust_region=0.2")->allow_extra_args(false);
  cmd->add_option("-j,--workers", o.workers, "worker threads, 0 = all cores");
}

RunConfig resolve_config(const CommonOptions& o) {
  RunConfig config = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  for (const auto& s : o.overrides) apply_override(config, s);
  if (o.workers >= 0) config.train.workers = o.workers;
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << text;
  }
  fs::rename(tmp, path);
}

void save_mlp_atomic(const Mlp& net, const fs::path& path) {
  const fs::path tmp = path.string() + ".tmp";
  save_mlp(net, tmp);
  fs::rename(tmp, path);
}

// Keeps the header and the rows for iterations <= last.
std::string truncate_csv(const fs::path& path, int last) {
  std::ifstream in(path);
  std::string line;
  std::string out;
  if (!std::getline(in, line)) return out;
  out += line + '\n';
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoi(line.substr(0, line.find(','))) > last) break;
    out += line + '\n';
  }
  return out;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  CommonOptions common;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  bool fresh = false;
  bool dump_config = false;
  bool quiet = false;
};

int run_train(const TrainOptions& o) {
  RunConfig config = resolve_config(o.common);
  if (o.seed) config.train.seed = *o.seed;
  if (o.iterations) config.train.iterations = *o.iterations;
  if (!o.out.empty()) config.output_dir = o.out;
  if (o.dump_config) {
    std::cout << to_config_text(config);
    return 0;
  }
  config.train.validate();

  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  const fs::path checkpoint = dir / "checkpoint.json";
  const fs::path curve_path = dir / "learning_curve.csv";
  const fs::path timing_path = dir / "timing.csv";
  const std::string config_text = to_config_text(config);

  Mlp policy = initial_policy(config.train);
  Mlp value = initial_value(config.train);
  int done = 0;
  std::string curve;
  std::string timing;

  if (!o.fresh && fs::exists(checkpoint)) {
    std::ifstream in(checkpoint);
    const auto state = ordered_json::parse(in);
    // Only the iteration budget may change between a run and its resumption.
    RunConfig saved = load_config(dir / "config.toml");
    saved.train.iterations = config.train.iterations;
    saved.output_dir = config.output_dir;
    if (to_config_text(saved) != config_text) {
      throw ConfigError("config differs from the checkpointed run in " + dir.string() +
                        "; use --fresh to start over");
    }
    done = state.at("iteration").get<int>();
    policy = load_mlp(dir / "policy.mlp");
    value = load_mlp(dir / "value.mlp");
    curve = truncate_csv(curve_path, done);
    timing = truncate_csv(timing_path, done);
    if (!o.quiet) std::cerr << "resuming " << dir.string() << " after iteration " << done << "\n";
  } else {
    std::ostringstream h;
    write_learning_curve_header(h);
    curve = h.str();
    h.str("");
    write_timing_header(h);
    timing = h.str();
  }
  write_text(dir / "config.toml", config_text);

  auto on_iteration = [&](const IterationLog& row, const PhaseTimes& times, const Mlp& p, const Mlp& v) {
    std::ostringstream line;
    write_learning_curve_row(line, row);
    curve += line.str();
    line.str("");
    write_timing_row(line, times);
    timing += line.str();
    save_mlp_atomic(p, dir / "policy.mlp");
    save_mlp_atomic(v, dir / "value.mlp");
    write_text(curve_path, curve);
    write_text(timing_path, timing);
    write_text(checkpoint, ordered_json{{"iteration", row.iteration}}.dump() + "\n");
    if (!o.quiet) {
      std::fprintf(stderr, "iter %4d  eval %.6f  value-loss %.3g  step %.3g  pairs %d/%d  (%.1fs)\n", row.iteration,
                   row.eval.discounted, row.value_loss, row.update.applied_step, row.update.used_pairs,
                   row.samples.pairs, times.rollout_s + times.value_s + times.policy_s + times.eval_s);
    }
  };

  const TrainResult result = train(config.train, policy, value, done, on_iteration);
  if (result.plateaued && !o.quiet) std::cerr << "stopped early: evaluation cost plateaued\n";
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
  CommonOptions common;
  std::string policy;
  bool stub = false;
  std::string mode = "recovery";
  std::optional<int> episodes;
  std::optional<std::uint64_t> seed;
  std::optional<double> altitude;
  std::string out;
  bool no_csv = false;
};

Mlp load_policy(const std::string& path, bool stub, const RunConfig& config) {
  if (stub) return pd_only_policy(config.train.policy_layers);
  if (path.empty()) throw ConfigError("--policy is required unless --stub is given");
  Mlp policy = load_mlp(path);
  check_policy_shape(policy);
  return policy;
}

ordered_json to_json(const RecoveryResult& r, const RecoveryConfig& c) {
  ordered_json j{{"episodes", r.episodes},   {"failures", r.failures}, {"failure_rate", r.failure_rate()},
                 {"diverged", r.diverged},   {"altitude_m", c.altitude}, {"duration_s", c.duration},
                 {"seed", c.seed}};
  return j;
}

ordered_json to_json(const WaypointResult& r) {
  return {{"mean_tracking_error_m", r.mean_error},
          {"max_tracking_error_m", r.max_error},
          {"steady_state_error_m", r.steady_state_error},
          {"diverged", r.diverged}};
}

int run_evaluate(const EvaluateOptions& o) {
  RunConfig config = resolve_config(o.common);
  if (o.episodes) config.recovery.episodes = *o.episodes;
  if (o.seed) config.recovery.seed = *o.seed;
  if (o.altitude) config.recovery.altitude = *o.altitude;
  const Mlp policy = load_policy(o.policy, o.stub, config);
  const TaskConfig task = config.train.task;
  const int workers = resolve_workers(config.train.workers);

  std::optional<fs::path> dir;
  if (!o.out.empty()) {
    dir = fs::path(o.out);
    fs::create_directories(*dir);
  }
  EvalReport report;
  ordered_json j{{"policy", o.stub ? std::string("pd-only stub") : o.policy}};
  if (o.mode == "recovery" || o.mode == "all") {
    std::optional<fs::path> csv_dir;
    if (dir && !o.no_csv) csv_dir = *dir / "recovery";
    report.recovery = run_recovery(policy, task, config.recovery, workers, csv_dir, &report.trajectory_csvs);
    j["recovery"] = to_json(*report.recovery, config.recovery);
  }
  if (o.mode == "waypoint" || o.mode == "all") {
    std::optional<fs::path> csv;
    if (dir && !o.no_csv) {
      csv = *dir / "waypoint.csv";
      report.trajectory_csvs.push_back(*csv);
    }
    report.waypoint = run_waypoint(policy, task, config.waypoint, csv);
    j["waypoint"] = to_json(*report.waypoint);
  }
  ordered_json paths = ordered_json::array();
  for (const auto& p : report.trajectory_csvs) paths.push_back(p.string());
  j["trajectory_csvs"] = paths;

  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (dir) {
    write_text(*dir / "report.json", text);
    write_text(*dir / "config.toml", to_config_text(config));
  }
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchOptions {
  CommonOptions common;
  std::string mode = "inference";
  std::string policy;
  std::optional<int> repetitions;
};

int run_bench(const BenchOptions& o) {
#ifndef NDEBUG
  std::cerr << "warning: this is not an optimized build; timings are not representative\n";
#endif
  RunConfig config = resolve_config(o.common);
  config.bench.validate();
  ordered_json j;
  int status = 0;
  if (o.mode == "inference") {
    const Mlp policy = o.policy.empty() ? initial_policy(config.train) : load_policy(o.policy, false, config);
    const int reps = o.repetitions.value_or(config.bench.inference_repetitions);
    const LatencyResult r = time_inference(policy, reps, config.bench.seed);
    j = {{"mode", "inference"},           {"parameters", policy.parameter_count()}, {"repetitions", r.repetitions},
         {"median_us", r.median_us},      {"p99_us", r.p99_us},                     {"mean_us", r.mean_us}};
  } else if (o.mode == "solver") {
    const int params = static_cast<int>(parameter_count(config.train.policy_layers));
    const SolverBenchResult r =
        bench_solvers(params, config.train.rollout.noise.covariance, config.bench.solver_problems,
                      o.repetitions.value_or(config.bench.solver_repetitions), config.train.policy.cg_iterations,
                      config.bench.seed);
    j = {{"mode", "solver"},
         {"jacobian", std::to_string(kActionDim) + "x" + std::to_string(params)},
         {"problems", r.problems},
         {"cg_iterations", r.cg_iterations},
         {"svd_median_ms", r.svd_ms},
         {"cg_median_ms", r.cg_ms},
         {"cg_over_svd", r.svd_ms > 0 ? r.cg_ms / r.svd_ms : 0.0},
         {"svd_max_relative_residual", r.svd_max_residual},
         {"cg_max_relative_residual", r.cg_max_residual},
         {"max_relative_disagreement", r.max_disagreement}};
    if (!(r.svd_max_residual <= 1e-8)) {
      std::cerr << "error: SVD residual " << r.svd_max_residual << " exceeds 1e-8\n";
      status = kExitDivergence;
    }
  } else {
    throw CLI::ValidationError("--mode", "must be inference or solver");
  }
  std::cout << j.dump(2) << "\n";
  return status;
}

// ---------------------------------------------------------------- export-traj

struct ExportOptions {
  CommonOptions common;
  std::string policy;
  bool stub = false;
  std::string mode = "recovery";
  int episode = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int run_export(const ExportOptions& o) {
  RunConfig config = resolve_config(o.common);
  if (o.seed) config.recovery.seed = *o.seed;
  const Mlp policy = load_policy(o.policy, o.stub, config);
  if (o.mode == "waypoint") {
    const auto r = run_waypoint(policy, config.train.task, config.waypoint, fs::path(o.out));
    std::cout << to_json(r).dump() << "\n";
    return 0;
  }
  if (o.mode != "recovery") throw CLI::ValidationError("--mode", "must be recovery or waypoint");
  if (o.episode < 0) throw CLI::ValidationError("--episode", "must be non-negative");
  config.recovery.episodes = o.episode + 1;
  const auto starts = recovery_starts(config.train.task, config.recovery);
  const QuadState start = starts.back();
  const int steps = static_cast<int>(std::lround(config.recovery.duration / config.train.task.quad.dt));
  const auto traj = rollout_batch(policy, config.train.task, std::span(&start, 1), steps, 1).front();
  std::vector<TrajectoryRow> rows;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    TrajectoryRow row;
    row.time = static_cast<double>(k) * config.train.task.quad.dt;
    row.state = traj.states[k];
    row.state.position.z() += config.recovery.altitude;
    if (k < traj.actions.size()) row.thrust = act(traj.actions[k], traj.states[k], config.train.task);
    rows.push_back(row);
  }
  write_trajectory_csv(o.out, rows);
  std::cout << o.out << ": " << rows.size() << " rows" << (traj.diverged ? " (diverged)" : "") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadrotor policy training with deterministic natural-gradient updates"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "quadrl 0.1.0");

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train a policy; resumes from a checkpoint in the output directory");
  add_common(train_cmd, train_opts.common);
  train_cmd->add_option("-o,--out", train_opts.out, "output directory (train.output_dir)");
  train_cmd->add_option("--seed", train_opts.seed, "train.seed");
  train_cmd->add_option("--iterations", train_opts.iterations, "train.iterations");
  train_cmd->add_flag("--fresh", train_opts.fresh, "ignore an existing checkpoint");
  train_cmd->add_flag("--dump-config", train_opts.dump_config, "print the resolved config and exit");
  train_cmd->add_flag("-q,--quiet", train_opts.quiet, "no progress output");

  EvaluateOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "recovery failure rate and waypoint tracking");
  add_common(eval_cmd, eval_opts.common);
  eval_cmd->add_option("-p,--policy", eval_opts.policy, "policy network file");
  eval_cmd->add_flag("--stub", eval_opts.stub, "evaluate the hover-bias + PD policy instead");
  eval_cmd->add_option("-m,--mode", eval_opts.mode, "recovery, waypoint or all")
      ->check(CLI::IsMember({"recovery", "waypoint", "all"}));
  eval_cmd->add_option("-n,--episodes", eval_opts.episodes, "recovery.episodes");
  eval_cmd->add_option("--seed", eval_opts.seed, "recovery.seed");
  eval_cmd->add_option("--altitude", eval_opts.altitude, "recovery.altitude");
  eval_cmd->add_option("-o,--out", eval_opts.out, "directory for report.json and trajectory CSVs");
  eval_cmd->add_flag("--no-csv", eval_opts.no_csv, "skip trajectory CSVs");

  BenchOptions bench_opts;
  auto* bench_cmd = app.add_subcommand("bench", "policy inference latency or natural-gradient solver timing");
  add_common(bench_cmd, bench_opts.common);
  bench_cmd->add_option("-m,--mode", bench_opts.mode, "inference or solver")
      ->check(CLI::IsMember({"inference", "solver"}));
  bench_cmd->add_option("-p,--policy", bench_opts.policy, "policy network file (inference mode)");
  bench_cmd->add_option("-r,--repetitions", bench_opts.repetitions, "timed repetitions");

  ExportOptions export_opts;
  auto* export_cmd = app.add_subcommand("export-traj", "write one evaluation trajectory as CSV");
  add_common(export_cmd, export_opts.common);
  export_cmd->add_option("-p,--policy", export_opts.policy, "policy network file");
  export_cmd->add_flag("--stub", export_opts.stub, "use the hover-bias + PD policy");
  export_cmd->add_option("-m,--mode", export_opts.mode, "recovery or waypoint")
      ->check(CLI::IsMember({"recovery", "waypoint"}));
  export_cmd->add_option("-e,--episode", export_opts.episode, "recovery episode index");
  export_cmd->add_option("--seed", export_opts.seed, "recovery.seed");
  export_cmd->add_option("-o,--out", export_opts.out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train_cmd) return run_train(train_opts);
    if (*eval_cmd) return run_evaluate(eval_opts);
    if (*bench_cmd) return run_bench(bench_opts);
    if (*export_cmd) return run_export(export_opts);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "error: numerical divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
