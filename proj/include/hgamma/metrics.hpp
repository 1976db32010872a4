#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgamma/groups.hpp"
#include "hgamma/linalg.hpp"
#include "hgamma/rng.hpp"

namespace hgamma {

// ---------------------------------------------------------------------------
// Invariance error
// ---------------------------------------------------------------------------

struct InvarianceError {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo estimate of E[|f(x) - f(h x)|^2] with x uniform on the unit
/// hypercube and h sampled from the given parameter window (defaults to the
/// family's standard window).
inline InvarianceError invariance_error(const std::function<Vec(const Vec&)>& f,
                                        const SubgroupSpec& spec, Rng& rng, int num_pairs,
                                        std::optional<Interval> t_range = std::nullopt) {
  if (num_pairs < 1) throw std::invalid_argument("invariance_error: need num_pairs >= 1");
  const Interval range = t_range.value_or(default_t_range(spec.family));
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < num_pairs; ++i) {
    Vec x(spec.n);
    for (double& v : x) v = rng.uniform();
    const Vec hx = matvec(sample_element(spec, rng, range).matrix, x);
    const Vec fx = f(x), fhx = f(hx);
    double err = 0.0;
    for (size_t j = 0; j < fx.size(); ++j) {
      const double d = fx[j] - fhx[j];
      err += d * d;
    }
    sum += err;
    sum_sq += err * err;
  }
  const double mean = sum / num_pairs;
  const double var = std::max(0.0, sum_sq / num_pairs - mean * mean);
  return InvarianceError{mean, std::sqrt(var / num_pairs)};
}

// ---------------------------------------------------------------------------
// Generator alignment
// ---------------------------------------------------------------------------

/// Lie-algebra generator of the subgroup, B = A L0(lambda) A^{-1}, normalized
/// to unit Frobenius norm.
inline Mat generator_of(const SubgroupSpec& spec) {
  bool all_zero = true;
  for (const double l : spec.lambda)
    if (l != 0.0) all_zero = false;
  if (all_zero) throw std::domain_error("generator_of: zero generator (all rates vanish)");
  const Mat l0 = make_canonical_generator(spec.lambda, spec.n, spec.family);
  Mat b = spec.A * l0 * orientation_inverse(spec);
  const double nrm = frobenius_norm(b);
  for (double& x : b.data()) x /= nrm;
  return b;
}

/// 1 - |<B1, B2>_F| / (|B1| |B2|). The absolute value quotients out the sign:
/// B and -B generate the same subgroup.
inline double cosine_distance(const Mat& b1, const Mat& b2) {
  const double n1 = frobenius_norm(b1), n2 = frobenius_norm(b2);
  if (n1 < 1e-300 || n2 < 1e-300) throw std::domain_error("cosine_distance: zero generator");
  return 1.0 - std::abs(frobenius_inner(b1, b2)) / (n1 * n2);
}

// ---------------------------------------------------------------------------
// Interpretability block conditions
// ---------------------------------------------------------------------------

struct BlockConditionResult {
  double diag_residual = 0.0;
  double offdiag_residual = 0.0;
  std::vector<int> sign_pattern;  // +1 / -1 per 2x2 diagonal block
};

inline std::vector<double> default_theta_grid(int points = 32) {
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) grid[i] = 6.283185307179586 * i / points;
  return grid;
}

/// Tests whether A0 and A_learned generate the same one-parameter subgroup by
/// checking M(theta) = (A0^T A)^T (+R(theta)) (A0^T A) against +R(+-theta).
/// Odd n is handled by a trailing fixed 1x1 identity block.
inline BlockConditionResult block_condition_check(const Mat& a0, const Mat& a,
                                                  const std::vector<double>& theta_grid) {
  if (!a0.square() || a0.rows() != a.rows() || a0.cols() != a.cols())
    throw std::invalid_argument("block_condition_check: shape mismatch");
  const int n = a0.rows();
  const int nb = n / 2;
  if (nb < 1) throw std::invalid_argument("block_condition_check: n too small");
  const Mat q = transpose(a0) * a;
  const Vec ones(nb, 1.0);

  // Per-block worst-case residuals against R(theta) and R(-theta).
  std::vector<double> diag_plus(nb, 0.0), diag_minus(nb, 0.0);
  double offdiag = 0.0, trailing = 0.0;
  for (const double theta : theta_grid) {
    const Mat m = transpose(q) * canonical_action(theta, ones, n, Family::Elliptic) * q;
    const Mat rp = rot2(theta), rm = rot2(-theta);
    for (int i = 0; i < nb; ++i) {
      double dp = 0.0, dm = 0.0;
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
          dp = std::max(dp, std::abs(m(2 * i + r, 2 * i + c) - rp(r, c)));
          dm = std::max(dm, std::abs(m(2 * i + r, 2 * i + c) - rm(r, c)));
        }
      diag_plus[i] = std::max(diag_plus[i], dp);
      diag_minus[i] = std::max(diag_minus[i], dm);
      for (int k = 0; k < nb; ++k) {
        if (k == i) continue;
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 2; ++c)
            offdiag = std::max(offdiag, std::abs(m(2 * i + r, 2 * k + c)));
      }
      if (n % 2 != 0) {
        for (int r = 0; r < 2; ++r) {
          offdiag = std::max(offdiag, std::abs(m(2 * i + r, n - 1)));
          offdiag = std::max(offdiag, std::abs(m(n - 1, 2 * i + r)));
        }
      }
    }
    if (n % 2 != 0) trailing = std::max(trailing, std::abs(m(n - 1, n - 1) - 1.0));
  }

  BlockConditionResult res;
  res.offdiag_residual = offdiag;
  for (int i = 0; i < nb; ++i) {
    if (diag_plus[i] <= diag_minus[i]) {
      res.sign_pattern.push_back(1);
      res.diag_residual = std::max(res.diag_residual, diag_plus[i]);
    } else {
      res.sign_pattern.push_back(-1);
      res.diag_residual = std::max(res.diag_residual, diag_minus[i]);
    }
  }
  res.diag_residual = std::max(res.diag_residual, trailing);
  return res;
}

inline BlockConditionResult block_condition_check(const Mat& a0, const Mat& a) {
  return block_condition_check(a0, a, default_theta_grid());
}

// ---------------------------------------------------------------------------
// Rate recovery
// ---------------------------------------------------------------------------

/// Absolute per-rate errors after the best block matching (planes with equal
/// rates are exchangeable, so rates may permute freely).
inline Vec lambda_report(Vec learned, const Vec& reference) {
  if (learned.size() != reference.size())
    throw std::invalid_argument("lambda_report: length mismatch");
  const size_t nb = learned.size();
  std::vector<size_t> perm(nb);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<size_t> best = perm;
  double best_cost = 1e300;
  do {
    double cost = 0.0;
    for (size_t i = 0; i < nb; ++i) cost += std::abs(learned[perm[i]] - reference[i]);
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  Vec errors(nb);
  for (size_t i = 0; i < nb; ++i) errors[i] = std::abs(learned[best[i]] - reference[i]);
  return errors;
}

// ---------------------------------------------------------------------------
// Run report
// ---------------------------------------------------------------------------

struct RunReport {
  std::string task;
  std::uint64_t seed = 0;
  double val_mse = 0.0;
  double invariance_error = 0.0;
  double cosine_distance = 0.0;
  Vec learned_lambda;
  double block_diag_residual = 0.0;
  double block_offdiag_residual = 0.0;
  int epochs_run = 0;
  double wall_seconds = 0.0;
};

inline std::string run_report_csv_header() {
  return "task,seed,val_mse,invariance_error,cosine_distance,lambda,diag_residual,"
         "offdiag_residual,epochs,wall_seconds";
}

inline std::string run_report_csv_row(const RunReport& r) {
  std::string lambda;
  char buf[64];
  for (size_t i = 0; i < r.learned_lambda.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", r.learned_lambda[i]);
    if (i) lambda += ';';
    lambda += buf;
  }
  std::string row = r.task + "," + std::to_string(r.seed);
  const double nums[] = {r.val_mse, r.invariance_error, r.cosine_distance};
  for (const double v : nums) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    row += ",";
    row += buf;
  }
  row += "," + lambda;
  std::snprintf(buf, sizeof buf, "%.17g", r.block_diag_residual);
  row += ",";
  row += buf;
  std::snprintf(buf, sizeof buf, "%.17g", r.block_offdiag_residual);
  row += ",";
  row += buf;
  row += "," + std::to_string(r.epochs_run);
  std::snprintf(buf, sizeof buf, "%.6f", r.wall_seconds);
  row += ",";
  row += buf;
  return row;
}

}  // namespace hgamma
