#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgamma/groups.hpp"
#include "hgamma/linalg.hpp"
#include "hgamma/rng.hpp"

namespace hgamma {

enum class TaskName { P3, Q4, R8, U, AnisotropicQuantum, DoublePendulum, MomentOfInertia };

inline const char* task_name(TaskName t) {
  switch (t) {
    case TaskName::P3: return "p3";
    case TaskName::Q4: return "q4";
    case TaskName::R8: return "r8";
    case TaskName::U: return "u";
    case TaskName::AnisotropicQuantum: return "aniso";
    case TaskName::DoublePendulum: return "double_pendulum";
    case TaskName::MomentOfInertia: return "inertia";
  }
  return "?";
}

inline TaskName task_from_name(const std::string& s) {
  if (s == "p3") return TaskName::P3;
  if (s == "q4") return TaskName::Q4;
  if (s == "r8") return TaskName::R8;
  if (s == "u") return TaskName::U;
  if (s == "aniso" || s == "anisotropic_quantum") return TaskName::AnisotropicQuantum;
  if (s == "double_pendulum" || s == "dp") return TaskName::DoublePendulum;
  if (s == "inertia" || s == "moment_of_inertia") return TaskName::MomentOfInertia;
  throw std::invalid_argument("unknown task: " + s);
}

/// Frozen description of one synthetic dataset: the hidden orientation A0 and
/// rates, plus every task constant needed to recompute targets exactly.
struct TaskSpec {
  TaskName name = TaskName::Q4;
  int n = 4;
  Mat A0;
  Vec lambda0;

  Vec block_scalars;                             // a_i / b_i weights in q(x), r(x)
  std::vector<std::array<double, 2>> poly_coeffs;  // degree-2 matrix polynomial coefficients
  Vec w4;                                        // invariant-subspace vector for q(x), r(x)
  Vec energies;                                  // w_i in the anisotropic quantum task
  double spring_k = 1.0;
  int num_points = 2;  // moment-of-inertia point count

  int num_samples = 5120;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<Vec> inputs;
  std::vector<Vec> targets;
  TaskSpec spec;
};

inline int task_output_dim(TaskName t) {
  switch (t) {
    case TaskName::U: return 2;
    case TaskName::DoublePendulum: return 4;
    case TaskName::MomentOfInertia: return 9;
    default: return 1;
  }
}

inline int task_default_n(TaskName t, int num_points = 2) {
  switch (t) {
    case TaskName::P3: return 3;
    case TaskName::Q4: return 4;
    case TaskName::R8: return 8;
    case TaskName::U: return 4;
    case TaskName::AnisotropicQuantum: return 4;
    case TaskName::DoublePendulum: return 8;
    case TaskName::MomentOfInertia: return 4 * num_points;
  }
  return 4;
}

/// w picked from span{[1,0,0,1], [0,1,-1,0]}: the subspace that makes
/// w^T vec(.) invariant under 2x2 rotation conjugation.
inline Vec w_subspace(double alpha, double beta) {
  return Vec{alpha, beta, -beta, alpha};
}

/// Seeded task constants. The data-bearing randomness (sample draws) comes
/// from a separate stream so that constants are stable given (task, seed).
inline TaskSpec make_task_spec(TaskName name, std::uint64_t seed, int num_samples = 5120,
                               double noise_sigma = 0.0, int n_override = 0, int num_points = 2) {
  TaskSpec s;
  s.name = name;
  s.seed = seed;
  s.num_samples = num_samples;
  s.noise_sigma = noise_sigma;
  s.num_points = num_points;
  s.n = n_override > 0 ? n_override : task_default_n(name, num_points);

  Rng rng(derive_seed(seed, std::string("task-constants-") + task_name(name)));
  const int nb = s.n / 2;

  switch (name) {
    case TaskName::P3:
      s.A0 = random_so_n(3, rng);
      s.lambda0 = {1.0};
      break;
    case TaskName::Q4:
    case TaskName::R8: {
      s.A0 = random_so_n(s.n, rng);
      s.lambda0.assign(nb, 1.0);
      s.block_scalars.resize(nb);
      for (double& a : s.block_scalars) a = rng.uniform(0.5, 2.0);
      s.poly_coeffs.resize(nb);
      for (auto& c : s.poly_coeffs) c = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      s.w4 = w_subspace(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0));
      break;
    }
    case TaskName::U:
      s.A0 = random_so_n(s.n, rng);
      s.lambda0.assign(nb, 1.0);
      break;
    case TaskName::AnisotropicQuantum:
      if (s.n % 2 != 0) throw std::invalid_argument("aniso task: n must be even");
      s.A0 = random_so_n(s.n, rng);
      s.lambda0.assign(nb, 1.0);
      s.energies.resize(nb);
      for (double& w : s.energies) w = rng.uniform(0.5, 2.0);
      break;
    case TaskName::DoublePendulum:
      // Physical coordinates: the symmetry acts on the actual angle blocks,
      // so the reference orientation is the identity.
      s.n = 8;
      s.A0 = Mat::identity(8);
      s.lambda0 = {1.0, 1.0, 0.0, 0.0};
      s.spring_k = 1.0;
      break;
    case TaskName::MomentOfInertia:
      s.n = 4 * num_points;
      s.A0 = Mat::identity(s.n);
      s.lambda0.assign(s.n / 2, 1.0);
      break;
  }
  return s;
}

inline SubgroupSpec reference_subgroup(const TaskSpec& s) {
  return SubgroupSpec{s.n, s.A0, s.lambda0, Family::Elliptic};
}

// ---------------------------------------------------------------------------
// Target functions (pointwise, reusable by the invariance oracles)
// ---------------------------------------------------------------------------

inline double p3_value(const TaskSpec& s, const Vec& x) {
  const Vec v = matvec_t(s.A0, x);
  const double c = std::cos(v[2]);
  return std::sin(v[0] * v[0] + v[1] * v[1]) + c * c;
}

/// q(x) / r(x): w^T vec(sum_i a_i p_i(v_i v_i^T)) with degree-2 matrix
/// polynomials p_i(M) = c_{i,1} M + c_{i,2} M^2; vec is row-major.
inline double qr_value(const TaskSpec& s, const Vec& x) {
  const Vec v = matvec_t(s.A0, x);
  const int nb = s.n / 2;
  double m11 = 0.0, m12 = 0.0, m21 = 0.0, m22 = 0.0;
  for (int i = 0; i < nb; ++i) {
    const double a = v[2 * i], b = v[2 * i + 1];
    // M = v v^T, M^2 = (a^2 + b^2) M for a rank-one symmetric block.
    const double scale1 = s.block_scalars[i] * (s.poly_coeffs[i][0] + s.poly_coeffs[i][1] * (a * a + b * b));
    m11 += scale1 * a * a;
    m12 += scale1 * a * b;
    m21 += scale1 * b * a;
    m22 += scale1 * b * b;
  }
  return s.w4[0] * m11 + s.w4[1] * m12 + s.w4[2] * m21 + s.w4[3] * m22;
}

inline Vec u_value(const TaskSpec& s, const Vec& x) {
  const Vec v = matvec_t(s.A0, x);
  return Vec{std::hypot(v[0], v[1]), std::hypot(v[2], v[3])};
}

inline double aniso_value(const TaskSpec& s, const Vec& x) {
  const Vec v = matvec_t(s.A0, x);
  double sum = 0.0;
  for (size_t i = 0; i < s.energies.size(); ++i)
    sum += s.energies[i] * (v[2 * i] * v[2 * i] + v[2 * i + 1] * v[2 * i + 1]);
  return sum;
}

inline double wrap_to_pi(double a) { return std::atan2(std::sin(a), std::cos(a)); }

/// Double pendulum in R^8: blocks 1-2 are direction vectors carrying the two
/// pendulum angles; blocks 3-4 hold the momenta as (p1, u1) and (p2, u2)
/// with u1, u2 auxiliary momentum-like coordinates, so that every zero rate
/// in the reference [1, 1, 0, 0] is identifiable from the targets. Targets
/// are the Hamiltonian derivatives (p1, p2, k(q1-q2), -k(q1-q2)); the angle
/// difference is wrapped so the target is exactly invariant under
/// simultaneous rotation of the two angle blocks.
inline Vec double_pendulum_value(const TaskSpec& s, const Vec& x) {
  const Vec v = matvec_t(s.A0, x);
  const double q1 = std::atan2(v[1], v[0]);
  const double q2 = std::atan2(v[3], v[2]);
  const double delta = wrap_to_pi(q1 - q2);
  return Vec{v[4], v[6], s.spring_k * delta, -s.spring_k * delta};
}

/// Moment of inertia of point masses: sum_i m_i (x_i^T x_i I - x_i x_i^T),
/// flattened row-major. Input layout: (m_1, x_1[3], m_2, x_2[3], ...).
inline Vec inertia_value(const TaskSpec& s, const Vec& input) {
  Mat inertia(3, 3);
  for (int p = 0; p < s.num_points; ++p) {
    const double m = input[4 * p];
    const double* pos = &input[4 * p + 1];
    const double r2 = pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2];
    for (int i = 0; i < 3; ++i) {
      inertia(i, i) += m * r2;
      for (int j = 0; j < 3; ++j) inertia(i, j) -= m * pos[i] * pos[j];
    }
  }
  return inertia.data();
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

namespace detail {
inline Rng sample_rng(const TaskSpec& s) {
  return Rng(derive_seed(s.seed, std::string("task-samples-") + task_name(s.name)));
}
}  // namespace detail

inline Dataset gen_p3(const TaskSpec& s) {
  if (s.n != 3) throw std::invalid_argument("gen_p3: n must be 3");
  Dataset ds;
  ds.spec = s;
  Rng rng = detail::sample_rng(s);
  for (int i = 0; i < s.num_samples; ++i) {
    Vec x(3);
    for (double& v : x) v = rng.uniform();
    ds.targets.push_back(Vec{p3_value(s, x)});
    ds.inputs.push_back(std::move(x));
  }
  return ds;
}

inline Dataset gen_qr(const TaskSpec& s) {
  if (s.n != 4 && s.n != 8) throw std::invalid_argument("gen_qr: n must be 4 or 8");
  Dataset ds;
  ds.spec = s;
  Rng rng = detail::sample_rng(s);
  for (int i = 0; i < s.num_samples; ++i) {
    Vec x(s.n);
    for (double& v : x) v = rng.uniform();
    ds.targets.push_back(Vec{qr_value(s, x)});
    ds.inputs.push_back(std::move(x));
  }
  return ds;
}

inline Dataset gen_u(const TaskSpec& s) {
  if (s.n != 4) throw std::invalid_argument("gen_u: n must be 4");
  Dataset ds;
  ds.spec = s;
  Rng rng = detail::sample_rng(s);
  for (int i = 0; i < s.num_samples; ++i) {
    Vec x(4);
    for (double& v : x) v = rng.uniform();
    ds.targets.push_back(u_value(s, x));
    ds.inputs.push_back(std::move(x));
  }
  return ds;
}

inline Dataset gen_aniso(const TaskSpec& s) {
  if (s.n % 2 != 0) throw std::invalid_argument("gen_aniso: n must be even");
  Dataset ds;
  ds.spec = s;
  Rng rng = detail::sample_rng(s);
  for (int i = 0; i < s.num_samples; ++i) {
    Vec x(s.n);
    for (double& v : x) v = rng.uniform();
    ds.targets.push_back(Vec{aniso_value(s, x)});
    ds.inputs.push_back(std::move(x));
  }
  return ds;
}

inline Dataset gen_double_pendulum(const TaskSpec& s) {
  Dataset ds;
  ds.spec = s;
  Rng rng = detail::sample_rng(s);
  for (int i = 0; i < s.num_samples; ++i) {
    // Angles inside (0, pi/2) keep the direction components in [0,1] and the
    // spring extension away from the antipodal wrap.
    const double q1 = rng.uniform(0.05, 1.52);
    const double q2 = rng.uniform(0.05, 1.52);
    Vec x{std::cos(q1), std::sin(q1), std::cos(q2), std::sin(q2),
          rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    ds.targets.push_back(double_pendulum_value(s, x));
    ds.inputs.push_back(std::move(x));
  }
  return ds;
}

inline Dataset gen_inertia(const TaskSpec& s) {
  Dataset ds;
  ds.spec = s;
  Rng rng = detail::sample_rng(s);
  for (int i = 0; i < s.num_samples; ++i) {
    Vec x(4 * s.num_points);
    for (int p = 0; p < s.num_points; ++p) {
      x[4 * p] = rng.uniform(0.1, 1.0);
      for (int j = 1; j <= 3; ++j) x[4 * p + j] = rng.uniform();
    }
    ds.targets.push_back(inertia_value(s, x));
    ds.inputs.push_back(std::move(x));
  }
  return ds;
}

inline Dataset generate(const TaskSpec& s) {
  switch (s.name) {
    case TaskName::P3: return gen_p3(s);
    case TaskName::Q4:
    case TaskName::R8: return gen_qr(s);
    case TaskName::U: return gen_u(s);
    case TaskName::AnisotropicQuantum: return gen_aniso(s);
    case TaskName::DoublePendulum: return gen_double_pendulum(s);
    case TaskName::MomentOfInertia: return gen_inertia(s);
  }
  throw std::logic_error("generate: bad task");
}

inline Dataset add_label_noise(Dataset ds, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("add_label_noise: sigma must be >= 0");
  if (sigma == 0.0) return ds;
  Rng rng(derive_seed(seed, "label-noise"));
  for (Vec& y : ds.targets)
    for (double& v : y) v += rng.gauss(0.0, sigma);
  ds.spec.noise_sigma = sigma;
  return ds;
}

}  // namespace hgamma
