#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "hgamma/metrics.hpp"
#include "hgamma/tasks.hpp"

namespace hgamma {

/// CSV with header x0..x{n-1}, y0..y{m-1}, one sample per row.
inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_dataset_csv: cannot open " + path);
  os.precision(17);
  const int n = ds.spec.n;
  const size_t m = ds.targets.empty() ? 0 : ds.targets.front().size();
  for (int j = 0; j < n; ++j) os << (j ? "," : "") << "x" << j;
  for (size_t j = 0; j < m; ++j) os << ",y" << j;
  os << "\n";
  for (size_t i = 0; i < ds.inputs.size(); ++i) {
    for (int j = 0; j < n; ++j) os << (j ? "," : "") << ds.inputs[i][j];
    for (size_t j = 0; j < m; ++j) os << "," << ds.targets[i][j];
    os << "\n";
  }
}

inline nlohmann::json task_spec_to_json(const TaskSpec& s) {
  nlohmann::json j;
  j["task"] = task_name(s.name);
  j["n"] = s.n;
  j["A0"] = s.A0.data();  // row-major
  j["lambda0"] = s.lambda0;
  j["num_samples"] = s.num_samples;
  j["noise_sigma"] = s.noise_sigma;
  j["seed"] = s.seed;
  if (!s.block_scalars.empty()) j["block_scalars"] = s.block_scalars;
  if (!s.poly_coeffs.empty()) {
    nlohmann::json pc = nlohmann::json::array();
    for (const auto& c : s.poly_coeffs) pc.push_back({c[0], c[1]});
    j["poly_coeffs"] = pc;
  }
  if (!s.w4.empty()) j["w"] = s.w4;
  if (!s.energies.empty()) j["energies"] = s.energies;
  if (s.name == TaskName::DoublePendulum) j["spring_k"] = s.spring_k;
  if (s.name == TaskName::MomentOfInertia) j["num_points"] = s.num_points;
  return j;
}

/// Sidecar description of the generating task, full precision.
inline void write_task_spec_json(const TaskSpec& s, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_task_spec_json: cannot open " + path);
  os << task_spec_to_json(s).dump(2) << "\n";
}

inline nlohmann::json run_report_to_json(const RunReport& r) {
  nlohmann::json j;
  j["task"] = r.task;
  j["seed"] = r.seed;
  j["val_mse"] = r.val_mse;
  j["invariance_error"] = r.invariance_error;
  j["cosine_distance"] = r.cosine_distance;
  j["lambda"] = r.learned_lambda;
  j["diag_residual"] = r.block_diag_residual;
  j["offdiag_residual"] = r.block_offdiag_residual;
  j["epochs"] = r.epochs_run;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

inline void write_run_report_json(const RunReport& r, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_run_report_json: cannot open " + path);
  os << run_report_to_json(r).dump(2) << "\n";
}

}  // namespace hgamma
