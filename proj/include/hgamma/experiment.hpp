#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hgamma/io.hpp"
#include "hgamma/metrics.hpp"
#include "hgamma/model.hpp"
#include "hgamma/tasks.hpp"

namespace hgamma {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  TaskName task = TaskName::Q4;
  int n = 0;  // 0 = task default
  ModelMode mode = ModelMode::SOnInvRep;
  bool mode_set = false;
  int epochs = 100;
  double lr = 1e-3;
  int batch_size = 16;
  int hidden_width = 64;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  double noise_sigma = 0.0;
  int num_samples = 5120;  // 80/20 split: 4096 train + 1024 validation
  Interval t_range = {0.0, 0.0};
  bool t_range_set = false;
  std::string output_dir = "runs";
};

inline ModelMode default_mode(TaskName task) {
  return task == TaskName::P3 ? ModelMode::So3Canonical : ModelMode::SOnInvRep;
}

/// Resolves defaults and rejects inconsistent task/mode/n combinations.
inline RunConfig validate_config(RunConfig cfg) {
  if (!cfg.mode_set) cfg.mode = default_mode(cfg.task);
  if (cfg.n == 0) cfg.n = task_default_n(cfg.task);
  if (cfg.n != task_default_n(cfg.task) && cfg.task != TaskName::AnisotropicQuantum)
    throw ConfigError(std::string("task ") + task_name(cfg.task) + " requires n = " +
                      std::to_string(task_default_n(cfg.task)));
  if (cfg.task == TaskName::MomentOfInertia)
    throw ConfigError(
        "inertia: training is not supported (the 9-dim matrix target does not fit the 2-dim "
        "equivariant head); use export-dataset instead");
  if (cfg.mode == ModelMode::So3Canonical && cfg.n != 3)
    throw ConfigError("mode so3_canonical requires n = 3");
  if (family_of(cfg.mode) != Family::Elliptic)
    throw ConfigError("training runs support elliptic modes; SL(n) hyperbolic/parabolic reps are "
                      "library-level (see verify)");
  if (cfg.epochs < 1 || cfg.lr <= 0.0 || cfg.batch_size < 1 || cfg.hidden_width < 1 ||
      cfg.num_samples < 10)
    throw ConfigError("invalid training hyperparameters");
  if (cfg.seeds.empty()) throw ConfigError("need at least one seed");
  if (cfg.noise_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
  return cfg;
}

struct RunOutput {
  RunReport report;
  HGammaModel model;
  TaskSpec task_spec;
};

/// One seed end to end: generate, train, evaluate.
inline RunOutput run_single(const RunConfig& cfg, std::uint64_t seed) {
  const auto t_start = std::chrono::steady_clock::now();

  TaskSpec spec = make_task_spec(cfg.task, seed, cfg.num_samples, cfg.noise_sigma, cfg.n);
  Dataset ds = generate(spec);
  if (cfg.noise_sigma > 0.0)
    ds = add_label_noise(std::move(ds), cfg.noise_sigma, derive_seed(seed, "noise"));

  Rng init_rng(derive_seed(seed, "model-init"));
  HGammaModel model = HGammaModel::init(spec.n, cfg.mode, task_output_dim(cfg.task),
                                        cfg.hidden_width, init_rng);

  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.batch_size = cfg.batch_size;
  tc.seed = seed;
  TrainResult tr = train(std::move(model), ds.inputs, ds.targets, tc);

  RunReport rep;
  rep.task = task_name(cfg.task);
  rep.seed = seed;
  rep.val_mse = tr.history.val_loss.back();
  rep.epochs_run = tr.history.epochs_run;
  rep.learned_lambda = tr.model.lambda();

  Rng mc_rng(derive_seed(seed, "mc"));
  const HGammaModel& m = tr.model;
  const SubgroupSpec learned = m.subgroup_spec();
  const auto predictor = [&m](const Vec& x) { return predict(m, x); };
  const std::optional<Interval> window =
      cfg.t_range_set ? std::optional<Interval>(cfg.t_range) : std::nullopt;
  rep.invariance_error = invariance_error(predictor, learned, mc_rng, 1000, window).mean;
  rep.cosine_distance = cosine_distance(generator_of(learned), generator_of(reference_subgroup(spec)));
  const BlockConditionResult bc = block_condition_check(spec.A0, learned.A);
  rep.block_diag_residual = bc.diag_residual;
  rep.block_offdiag_residual = bc.offdiag_residual;

  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return RunOutput{std::move(rep), std::move(tr.model), std::move(spec)};
}

inline int worker_thread_cap() {
  if (const char* env = std::getenv("HGAMMA_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

struct RunSummary {
  std::vector<RunReport> reports;
  double val_mse_mean = 0.0, val_mse_std = 0.0;
  double inv_err_mean = 0.0, inv_err_std = 0.0;
  double cos_mean = 0.0, cos_std = 0.0;
};

inline void mean_std(const std::vector<double>& xs, double& mean, double& std) {
  mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= xs.size();
  double var = 0.0;
  for (const double x : xs) var += (x - mean) * (x - mean);
  std = xs.size() > 1 ? std::sqrt(var / (xs.size() - 1)) : 0.0;
}

/// Executes every seed (parallel up to HGAMMA_THREADS), writes
/// <out>/<task>_<seed>.json and appends summary.csv, then aggregates.
inline RunSummary run(const RunConfig& cfg_in, std::ostream& log) {
  const RunConfig cfg = validate_config(cfg_in);
  std::filesystem::create_directories(cfg.output_dir);

  std::vector<RunOutput> outputs(cfg.seeds.size());
  std::atomic<size_t> next{0};
  const int workers =
      std::max(1, std::min<int>(worker_thread_cap(), static_cast<int>(cfg.seeds.size())));
  std::mutex log_mutex;

  const auto body = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cfg.seeds.size()) return;
      RunOutput out = run_single(cfg, cfg.seeds[i]);
      {
        std::lock_guard<std::mutex> lock(log_mutex);
        log << run_report_csv_row(out.report) << "\n";
      }
      outputs[i] = std::move(out);
    }
  };

  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (std::thread& t : pool) t.join();
  }

  // Single collector: reports land in seed order regardless of scheduling.
  const std::string summary_path = cfg.output_dir + "/summary.csv";
  const bool fresh = !std::filesystem::exists(summary_path);
  std::ofstream summary(summary_path, std::ios::app);
  if (fresh) summary << run_report_csv_header() << "\n";

  RunSummary s;
  std::vector<double> vals, invs, coss;
  for (const RunOutput& out : outputs) {
    const std::string base =
        cfg.output_dir + "/" + out.report.task + "_" + std::to_string(out.report.seed);
    write_run_report_json(out.report, base + ".json");
    save_model(out.model, base + ".model");
    summary << run_report_csv_row(out.report) << "\n";
    vals.push_back(out.report.val_mse);
    invs.push_back(out.report.invariance_error);
    coss.push_back(out.report.cosine_distance);
    s.reports.push_back(out.report);
  }
  mean_std(vals, s.val_mse_mean, s.val_mse_std);
  mean_std(invs, s.inv_err_mean, s.inv_err_std);
  mean_std(coss, s.cos_mean, s.cos_std);

  log << "task=" << task_name(cfg.task) << " seeds=" << cfg.seeds.size()
      << "  val_mse=" << s.val_mse_mean << " +- " << s.val_mse_std
      << "  inv_err=" << s.inv_err_mean << " +- " << s.inv_err_std
      << "  cosine=" << s.cos_mean << " +- " << s.cos_std << "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Flat key-value config files (one `key = value` per line; flags win)
// ---------------------------------------------------------------------------

inline std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  const auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("bad config line: " + line);
    kv.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return kv;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) seeds.push_back(std::stoull(item));
  if (seeds.empty()) throw ConfigError("empty seed list");
  return seeds;
}

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "task")
    cfg.task = task_from_name(value);
  else if (key == "n")
    cfg.n = std::stoi(value);
  else if (key == "mode") {
    cfg.mode = mode_from_name(value);
    cfg.mode_set = true;
  } else if (key == "epochs")
    cfg.epochs = std::stoi(value);
  else if (key == "lr")
    cfg.lr = std::stod(value);
  else if (key == "batch")
    cfg.batch_size = std::stoi(value);
  else if (key == "hidden")
    cfg.hidden_width = std::stoi(value);
  else if (key == "seeds")
    cfg.seeds = parse_seed_list(value);
  else if (key == "noise")
    cfg.noise_sigma = std::stod(value);
  else if (key == "samples")
    cfg.num_samples = std::stoi(value);
  else if (key == "out")
    cfg.output_dir = value;
  else if (key == "t_lo") {
    cfg.t_range.lo = std::stod(value);
    cfg.t_range_set = true;
  } else if (key == "t_hi") {
    cfg.t_range.hi = std::stod(value);
    cfg.t_range_set = true;
  } else
    throw ConfigError("unknown config key: " + key);
}

}  // namespace hgamma
