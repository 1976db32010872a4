#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hgamma/invrep.hpp"
#include "hgamma/metrics.hpp"
#include "hgamma/model.hpp"
#include "hgamma/tasks.hpp"

namespace hgamma {

struct SuiteResult {
  std::string name;
  bool pass = true;
  int cases = 0;
  int failures = 0;
  std::string counterexample;  // smallest failing case seen
};

namespace detail {

struct FailureTracker {
  double best_key = 1e300;
  std::string description;
  int count = 0;

  void add(double key, const std::string& desc) {
    ++count;
    if (key < best_key) {
      best_key = key;
      description = desc;
    }
  }
};

inline Mat random_skew_mat(int n, Rng& rng, double scale = 1.0) {
  Mat s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = scale * rng.uniform(-1.0, 1.0);
      s(i, j) = v;
      s(j, i) = -v;
    }
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Group-theory suite: exponential orthogonality, homomorphism, canonical form
// ---------------------------------------------------------------------------

inline SuiteResult group_theory_suite(std::uint64_t seed, int instances = 100) {
  SuiteResult res{"group-theory"};
  Rng rng(derive_seed(seed, "verify-group"));
  detail::FailureTracker fails;
  for (int i = 0; i < instances; ++i) {
    const int n = 2 + rng.uniform_int(0, 6);
    const Mat b = detail::random_skew_mat(n, rng);
    const Mat r = exp_skew(b);
    const double orth = max_abs(transpose(r) * r - Mat::identity(n));
    const double det_err = std::abs(determinant(r) - 1.0);
    if (orth > 1e-10 || det_err > 1e-9)
      fails.add(frobenius_norm(b), "exp_skew left SO(n): residual " + std::to_string(orth));

    const double s = rng.uniform(-2.0, 2.0), t = rng.uniform(-2.0, 2.0);
    const double hom = max_abs(exp_skew((s + t) * b) - exp_skew(s * b) * exp_skew(t * b));
    if (hom > 1e-9)
      fails.add(std::abs(s) + std::abs(t), "homomorphism residual " + std::to_string(hom));

    const int nb = 1 + rng.uniform_int(0, 2);
    Vec lambda(nb);
    for (double& l : lambda) l = rng.uniform(0.1, 3.0);
    const double tt = rng.uniform(-2.0, 2.0);
    std::vector<Mat> blocks;
    for (const double l : lambda) blocks.push_back(rot2(tt * l));
    const Mat gen = make_canonical_generator(lambda, 2 * nb, Family::Elliptic);
    const double canon = max_abs(exp_skew(tt * gen) - block_diag(blocks));
    if (canon > 1e-10) fails.add(std::abs(tt), "canonical-generator residual " + std::to_string(canon));
    res.cases += 3;
  }
  res.failures = fails.count;
  res.pass = fails.count == 0;
  res.counterexample = fails.description;
  return res;
}

// ---------------------------------------------------------------------------
// Orbit separation suite: invRep equality vs brute-force oracle
// ---------------------------------------------------------------------------

struct OrbitPairStats {
  int pairs = 0;
  int disagreements = 0;
  std::string worst;
};

/// Half the pairs are on-orbit by construction, half are pushed off-orbit by
/// scaling the canonical coordinates (which perturbs every family's conserved
/// quantity). invRep equality at 1e-7 must match the oracle verdict exactly.
inline OrbitPairStats orbit_agreement(Family family, int n, int pairs, std::uint64_t seed) {
  OrbitPairStats stats;
  Rng rng(derive_seed(seed, std::string("verify-orbit-") + family_name(family)));
  const int nb = n / 2;
  Vec lambda(nb);
  for (int i = 0; i < nb; ++i) lambda[i] = i == 0 ? 1.0 : static_cast<double>(rng.uniform_int(1, 2));
  const SubgroupSpec spec{n, random_so_n(n, rng), lambda, family};

  for (int p = 0; p < pairs; ++p) {
    // Canonical coordinates with comfortable margins for every family.
    Vec v(n);
    for (int i = 0; i < nb; ++i) {
      if (family == Family::Hyperbolic) {
        v[2 * i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(1.0, 2.0);
        v[2 * i + 1] = rng.uniform(-0.5, 0.5);
      } else if (family == Family::Parabolic) {
        v[2 * i] = rng.uniform(-1.0, 1.0);
        v[2 * i + 1] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
      } else {
        const double angle = rng.uniform(0.0, 6.283185307);
        const double radius = rng.uniform(0.3, 1.2);
        v[2 * i] = radius * std::cos(angle);
        v[2 * i + 1] = radius * std::sin(angle);
      }
    }
    if (n % 2 != 0) v[n - 1] = rng.uniform(-1.0, 1.0);
    const Vec x = matvec(spec.A, v);

    const bool same = p % 2 == 0;
    const double t_star = family == Family::Elliptic ? rng.uniform(0.0, 6.283185307)
                                                     : rng.uniform(-2.0, 2.0);
    Vec y_canon = v;
    {
      // Apply the canonical action at t_star.
      const Mat act = canonical_action(t_star, lambda, n, family);
      y_canon = matvec(act, v);
    }
    if (!same)
      for (double& c : y_canon) c *= 1.3;
    const Vec y = matvec(spec.A, y_canon);

    const InvRepOutput ra = inv_rep_family(x, spec);
    const InvRepOutput Rb = inv_rep_family(y, spec);
    if (ra.status != InvRepStatus::Ok || Rb.status != InvRepStatus::Ok) continue;
    const bool rep_equal = norm2(ra.rep - Rb.rep) < 1e-7;
    const bool oracle_equal = orbit_equal_oracle(x, y, spec, 500);
    ++stats.pairs;
    if (rep_equal != same || oracle_equal != same) {
      ++stats.disagreements;
      if (stats.worst.empty()) {
        std::ostringstream os;
        os << family_name(family) << " n=" << n << " pair " << p << " same=" << same
           << " rep_equal=" << rep_equal << " oracle_equal=" << oracle_equal << " t*=" << t_star;
        stats.worst = os.str();
      }
    }
  }
  return stats;
}

inline SuiteResult orbit_suite(Family family, std::uint64_t seed, int pairs = 200) {
  SuiteResult res{std::string("orbit-separation-") + family_name(family)};
  const std::vector<int> dims =
      family == Family::Elliptic ? std::vector<int>{3, 4, 6} : std::vector<int>{4};
  for (const int n : dims) {
    const OrbitPairStats stats = orbit_agreement(family, n, pairs, seed + n);
    res.cases += stats.pairs;
    res.failures += stats.disagreements;
    if (!stats.worst.empty() && res.counterexample.empty()) res.counterexample = stats.worst;
  }
  res.pass = res.failures == 0;
  return res;
}

// ---------------------------------------------------------------------------
// Gradient suite: analytic vs central finite differences, full pipeline
// ---------------------------------------------------------------------------

/// Margins keep finite differences away from ReLU kinks and invRep pivots.
inline bool gradient_margins_ok(const HGammaModel& m, const std::vector<Vec>& xs,
                                double margin = 2e-3) {
  for (const Vec& x : xs) {
    Vec h = model_features(m, x);
    if (m.mode != ModelMode::So3Canonical) {
      const Vec v = matvec_t(m.orientation(), x);
      for (size_t b = 0; b + 1 < v.size(); b += 2)
        if (std::hypot(v[b], v[b + 1]) < 0.05) return false;
    }
    for (size_t k = 0; k + 1 < m.mlp.w.size(); ++k) {
      Vec z = matvec(m.mlp.w[k], h);
      for (size_t i = 0; i < z.size(); ++i) {
        z[i] += m.mlp.b[k][i];
        if (std::abs(z[i]) < margin) return false;
      }
      for (double& val : z) val = val > 0.0 ? val : 0.0;
      h = std::move(z);
    }
  }
  return true;
}

struct GradientCheckStats {
  int configs = 0;
  double worst_rel_err = 0.0;
  std::string worst;
};

inline GradientCheckStats gradient_check(int configs, std::uint64_t seed, double h = 1e-5) {
  GradientCheckStats stats;
  std::uint64_t attempt = 0;
  while (stats.configs < configs) {
    Rng rng(derive_seed(seed, "verify-grad-" + std::to_string(attempt++)));
    const int pick = rng.uniform_int(0, 2);
    const int n = pick == 0 ? 3 : (pick == 1 ? 4 : 5);
    const ModelMode mode = pick == 0 ? ModelMode::So3Canonical : ModelMode::SOnInvRep;
    const bool equivariant = pick == 1 && rng.uniform() < 0.3;
    HGammaModel m = HGammaModel::init(n, mode, equivariant ? 2 : 1, 8, rng, equivariant);
    for (double& t : m.skew.theta) t = rng.uniform(-0.8, 0.8);
    for (double& r : m.log_rates) r = rng.uniform(-0.3, 0.3);

    std::vector<Vec> xs;
    std::vector<Vec> ys;
    for (int i = 0; i < 6; ++i) {
      Vec x(n);
      for (double& v : x) v = rng.uniform();
      xs.push_back(x);
      Vec y(m.out_dim());
      for (double& v : y) v = rng.uniform(-1.0, 1.0);
      ys.push_back(y);
    }
    if (!gradient_margins_ok(m, xs)) continue;

    const Vec p0 = m.get_params();
    const Vec analytic = loss_batch(m, xs, ys).grads;
    for (size_t c = 0; c < p0.size(); ++c) {
      HGammaModel mp = m;
      Vec pp = p0;
      pp[c] = p0[c] + h;
      mp.set_params(pp);
      const double fplus = loss_batch(mp, xs, ys).loss;
      pp[c] = p0[c] - h;
      mp.set_params(pp);
      const double fminus = loss_batch(mp, xs, ys).loss;
      const double fd = (fplus - fminus) / (2.0 * h);
      const double rel =
          std::abs(analytic[c] - fd) / std::max({std::abs(analytic[c]), std::abs(fd), 1e-6});
      if (rel > stats.worst_rel_err) {
        stats.worst_rel_err = rel;
        std::ostringstream os;
        os << mode_name(mode) << " n=" << n << " coord " << c << " analytic=" << analytic[c]
           << " fd=" << fd;
        stats.worst = os.str();
      }
    }
    ++stats.configs;
  }
  return stats;
}

inline SuiteResult gradient_suite(std::uint64_t seed, int configs = 5) {
  SuiteResult res{"gradient-check"};
  const GradientCheckStats stats = gradient_check(configs, seed);
  res.cases = stats.configs;
  res.pass = stats.worst_rel_err < 1e-4;
  res.failures = res.pass ? 0 : 1;
  if (!res.pass) res.counterexample = stats.worst;
  return res;
}

// ---------------------------------------------------------------------------
// Generator-invariance suite: every task's target is invariant before use
// ---------------------------------------------------------------------------

inline SuiteResult generator_invariance_suite(std::uint64_t seed, int pairs = 100) {
  SuiteResult res{"generator-invariance"};
  detail::FailureTracker fails;
  Rng rng(derive_seed(seed, "verify-gen"));
  const std::vector<TaskName> tasks = {TaskName::P3, TaskName::Q4, TaskName::R8, TaskName::U,
                                       TaskName::AnisotropicQuantum, TaskName::DoublePendulum};
  for (const TaskName t : tasks) {
    const TaskSpec spec = make_task_spec(t, seed + static_cast<int>(t), 64);
    const Dataset ds = generate(spec);
    const SubgroupSpec ref = reference_subgroup(spec);
    for (int i = 0; i < pairs; ++i) {
      const Vec& x = ds.inputs[rng.uniform_int(0, static_cast<int>(ds.inputs.size()) - 1)];
      const Vec hx = matvec(sample_element(ref, rng).matrix, x);
      Vec y0, y1;
      switch (t) {
        case TaskName::P3: y0 = {p3_value(spec, x)}; y1 = {p3_value(spec, hx)}; break;
        case TaskName::Q4:
        case TaskName::R8: y0 = {qr_value(spec, x)}; y1 = {qr_value(spec, hx)}; break;
        case TaskName::U: y0 = u_value(spec, x); y1 = u_value(spec, hx); break;
        case TaskName::AnisotropicQuantum:
          y0 = {aniso_value(spec, x)};
          y1 = {aniso_value(spec, hx)};
          break;
        case TaskName::DoublePendulum:
          y0 = double_pendulum_value(spec, x);
          y1 = double_pendulum_value(spec, hx);
          break;
        default: continue;
      }
      ++res.cases;
      double err = 0.0;
      for (size_t j = 0; j < y0.size(); ++j) err = std::max(err, std::abs(y0[j] - y1[j]));
      if (err > 1e-9)
        fails.add(norm2(x), std::string(task_name(t)) + " violation " + std::to_string(err));
    }
  }
  // Moment of inertia: conjugation equivariance instead of invariance.
  {
    const TaskSpec spec = make_task_spec(TaskName::MomentOfInertia, seed, 16);
    for (int i = 0; i < pairs; ++i) {
      Vec x(spec.n);
      for (int p = 0; p < spec.num_points; ++p) {
        x[4 * p] = rng.uniform(0.1, 1.0);
        for (int j = 1; j <= 3; ++j) x[4 * p + j] = rng.uniform();
      }
      const Mat r = random_so_n(3, rng);
      Vec rx = x;
      for (int p = 0; p < spec.num_points; ++p) {
        const Vec pos{x[4 * p + 1], x[4 * p + 2], x[4 * p + 3]};
        const Vec rp = matvec(r, pos);
        for (int j = 0; j < 3; ++j) rx[4 * p + 1 + j] = rp[j];
      }
      const Mat i0(3, 3, inertia_value(spec, x));
      const Mat i1(3, 3, inertia_value(spec, rx));
      ++res.cases;
      const double err = max_abs(i1 - r * i0 * transpose(r));
      if (err > 1e-9) fails.add(norm2(x), "inertia equivariance violation " + std::to_string(err));
    }
  }
  res.failures = fails.count;
  res.pass = fails.count == 0;
  res.counterexample = fails.description;
  return res;
}

// ---------------------------------------------------------------------------
// Entry point used by `hgamma verify`
// ---------------------------------------------------------------------------

inline std::vector<SuiteResult> run_verify_suites(const std::optional<Family>& family,
                                                  std::uint64_t seed, int pairs = 200) {
  std::vector<SuiteResult> out;
  if (!family) {
    out.push_back(group_theory_suite(seed));
    out.push_back(orbit_suite(Family::Elliptic, seed, pairs));
    out.push_back(orbit_suite(Family::Hyperbolic, seed, pairs));
    out.push_back(orbit_suite(Family::Parabolic, seed, pairs));
    out.push_back(gradient_suite(seed));
    out.push_back(generator_invariance_suite(seed));
    return out;
  }
  if (*family == Family::Elliptic) {
    out.push_back(group_theory_suite(seed));
    out.push_back(orbit_suite(Family::Elliptic, seed, pairs));
    out.push_back(gradient_suite(seed));
    out.push_back(generator_invariance_suite(seed));
  } else {
    out.push_back(orbit_suite(*family, seed, pairs));
  }
  return out;
}

}  // namespace hgamma
