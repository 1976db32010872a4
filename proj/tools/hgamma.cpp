// hgamma: discover one-parameter subgroups and train invariant models.
//
//   hgamma run            train on a task and write per-seed reports
//   hgamma verify         run the property suites without training
//   hgamma export-dataset write a task dataset as CSV + spec sidecar

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hgamma/experiment.hpp"
#include "hgamma/io.hpp"
#include "hgamma/verify.hpp"

using namespace hgamma;

namespace {

struct RunCli {
  std::string task = "q4";
  std::string mode;
  std::string seeds = "0,1,2";
  std::string config_file;
  std::string out = "runs";
  int n = 0;
  int epochs = 100;
  double lr = 1e-3;
  int batch = 16;
  int hidden = 64;
  double noise = 0.0;
  int samples = 5120;
};

int do_run(const RunCli& cli, const CLI::App& sub) {
  RunConfig cfg;
  try {
    if (!cli.config_file.empty())
      for (const auto& [key, value] : parse_config_file(cli.config_file))
        apply_config_entry(cfg, key, value);
    // Flags win over config-file entries.
    const auto set = [&sub](const char* name) { return sub.count(name) > 0; };
    if (cli.config_file.empty() || set("--task")) cfg.task = task_from_name(cli.task);
    if (set("--n")) cfg.n = cli.n;
    if (set("--mode")) {
      cfg.mode = mode_from_name(cli.mode);
      cfg.mode_set = true;
    }
    if (cli.config_file.empty() || set("--epochs")) cfg.epochs = cli.epochs;
    if (cli.config_file.empty() || set("--lr")) cfg.lr = cli.lr;
    if (cli.config_file.empty() || set("--batch")) cfg.batch_size = cli.batch;
    if (cli.config_file.empty() || set("--hidden")) cfg.hidden_width = cli.hidden;
    if (cli.config_file.empty() || set("--seeds")) cfg.seeds = parse_seed_list(cli.seeds);
    if (cli.config_file.empty() || set("--noise")) cfg.noise_sigma = cli.noise;
    if (cli.config_file.empty() || set("--samples")) cfg.num_samples = cli.samples;
    if (cli.config_file.empty() || set("--out")) cfg.output_dir = cli.out;
    cfg = validate_config(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    std::cout << run_report_csv_header() << "\n";
    run(cfg, std::cout);
  } catch (const TrainingDiverged& e) {
    std::filesystem::create_directories(cfg.output_dir);
    const std::string diag = cfg.output_dir + "/diverged.txt";
    std::ofstream os(diag);
    os << e.what() << "\n";
    std::cerr << "aborted: " << e.what() << " (diagnostic: " << diag << ")\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int do_verify(const std::string& family_str, std::uint64_t seed, int pairs) {
  std::optional<Family> family;
  if (!family_str.empty()) {
    if (family_str == "elliptic")
      family = Family::Elliptic;
    else if (family_str == "hyperbolic")
      family = Family::Hyperbolic;
    else if (family_str == "parabolic")
      family = Family::Parabolic;
    else {
      std::cerr << "config error: unknown family " << family_str << "\n";
      return 2;
    }
  }
  const std::vector<SuiteResult> results = run_verify_suites(family, seed, pairs);
  bool ok = true;
  for (const SuiteResult& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.cases << " cases";
    if (r.failures > 0) std::cout << ", " << r.failures << " failures";
    std::cout << ")\n";
    if (!r.pass) {
      ok = false;
      std::cout << "      counterexample: " << r.counterexample << "\n";
    }
  }
  return ok ? 0 : 1;
}

int do_export(const std::string& task_str, int n, int samples, double noise, std::uint64_t seed,
              const std::string& out) {
  try {
    const TaskName task = task_from_name(task_str);
    TaskSpec spec = make_task_spec(task, seed, samples, noise, n);
    Dataset ds = generate(spec);
    if (noise > 0.0) ds = add_label_noise(std::move(ds), noise, derive_seed(seed, "noise"));
    std::filesystem::create_directories(out);
    const std::string base = out + "/" + task_name(task) + "_" + std::to_string(seed);
    write_dataset_csv(ds, base + ".csv");
    write_task_spec_json(spec, base + ".json");
    std::cout << "wrote " << base << ".csv and " << base << ".json (" << ds.inputs.size()
              << " samples)\n";
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-parameter subgroup discovery and invariant function learning"};
  app.require_subcommand(1);

  RunCli rc;
  CLI::App* run_cmd = app.add_subcommand("run", "train and evaluate on a task");
  run_cmd->add_option("--task", rc.task, "p3|q4|r8|u|aniso|double_pendulum");
  run_cmd->add_option("--n", rc.n, "input dimension (task default if omitted)");
  run_cmd->add_option("--mode", rc.mode, "so3_canonical|son_invrep");
  run_cmd->add_option("--epochs", rc.epochs, "training epochs");
  run_cmd->add_option("--lr", rc.lr, "Adam learning rate");
  run_cmd->add_option("--batch", rc.batch, "mini-batch size");
  run_cmd->add_option("--hidden", rc.hidden, "hidden width of phi");
  run_cmd->add_option("--seeds", rc.seeds, "comma-separated seed list");
  run_cmd->add_option("--noise", rc.noise, "label noise sigma");
  run_cmd->add_option("--samples", rc.samples, "total samples (80/20 train/val split)");
  run_cmd->add_option("--out", rc.out, "output directory");
  run_cmd->add_option("--config", rc.config_file, "key = value config file (flags win)");

  std::string family;
  std::uint64_t vseed = 0;
  int vpairs = 200;
  CLI::App* verify_cmd = app.add_subcommand("verify", "run property suites (no training)");
  verify_cmd->add_option("--family", family, "elliptic|hyperbolic|parabolic (default: all)");
  verify_cmd->add_option("--seed", vseed, "suite seed");
  verify_cmd->add_option("--pairs", vpairs, "orbit pairs per dimension");

  std::string etask = "q4", eout = "datasets";
  int en = 0, esamples = 5120;
  double enoise = 0.0;
  std::uint64_t eseed = 0;
  CLI::App* export_cmd = app.add_subcommand("export-dataset", "write dataset CSV + spec JSON");
  export_cmd->add_option("--task", etask, "task name");
  export_cmd->add_option("--n", en, "input dimension override");
  export_cmd->add_option("--samples", esamples, "sample count");
  export_cmd->add_option("--noise", enoise, "label noise sigma");
  export_cmd->add_option("--seed", eseed, "seed");
  export_cmd->add_option("--out", eout, "output directory");

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) return do_run(rc, *run_cmd);
  if (verify_cmd->parsed()) return do_verify(family, vseed, vpairs);
  if (export_cmd->parsed()) return do_export(etask, en, esamples, enoise, eseed, eout);
  return 2;
}
