#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "hgamma/linalg.hpp"
#include "hgamma/rng.hpp"

namespace hgamma {

/// One-parameter subgroup H = { A exp(t L0(lambda, family)) A^{-1} : t }.
/// The orientation A carries the invariant planes; canonical coordinates of a
/// point are v = A^{-1} x. Elliptic specs require A in SO(n); the hyperbolic
/// and parabolic families accept any invertible A.
struct SubgroupSpec {
  int n = 0;
  Mat A;
  Vec lambda;  // floor(n/2) rates; by convention lambda[0] == 1 for reference specs
  Family family = Family::Elliptic;

  static SubgroupSpec canonical(int n, Vec lambda, Family family = Family::Elliptic) {
    return SubgroupSpec{n, Mat::identity(n), std::move(lambda), family};
  }
};

struct GroupElement {
  Mat matrix;
  double t = 0.0;
};

struct SpecDiagnostics {
  bool ok = true;
  bool condition_warning = false;
  std::string message;
};

inline double orthogonality_residual(const Mat& a) {
  return max_abs(transpose(a) * a - Mat::identity(a.rows()));
}

inline SpecDiagnostics validate_spec(const SubgroupSpec& spec) {
  SpecDiagnostics d;
  if (spec.A.rows() != spec.n || spec.A.cols() != spec.n) {
    d.ok = false;
    d.message = "orientation matrix has wrong shape";
    return d;
  }
  if (spec.lambda.size() != static_cast<size_t>(spec.n / 2)) {
    d.ok = false;
    d.message = "need floor(n/2) rates";
    return d;
  }
  if (!all_finite(spec.lambda)) {
    d.ok = false;
    d.message = "non-finite rate";
    return d;
  }
  if (spec.family == Family::Elliptic) {
    if (orthogonality_residual(spec.A) > 1e-8 || std::abs(determinant(spec.A) - 1.0) > 1e-8) {
      d.ok = false;
      d.message = "elliptic orientation must lie in SO(n)";
    }
  } else {
    if (spec.n % 2 != 0) {
      d.ok = false;
      d.message = "hyperbolic/parabolic families require even n";
      return d;
    }
    try {
      const Mat inv = inverse(spec.A);
      const double cond = frobenius_norm(spec.A) * frobenius_norm(inv);
      if (cond > 1e8) {
        d.condition_warning = true;
        d.message = "orientation condition estimate above 1e8";
      }
    } catch (const std::invalid_argument&) {
      d.ok = false;
      d.message = "orientation matrix is singular";
    }
  }
  return d;
}

/// A^{-1} with the orthogonal shortcut for elliptic specs.
inline Mat orientation_inverse(const SubgroupSpec& spec) {
  if (spec.family == Family::Elliptic) return transpose(spec.A);
  return inverse(spec.A);
}

inline GroupElement element_at(const SubgroupSpec& spec, double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("element_at: non-finite parameter");
  const Mat action = canonical_action(t, spec.lambda, spec.n, spec.family);
  return GroupElement{spec.A * action * orientation_inverse(spec), t};
}

/// Nearest-by-QR special orthogonal matrix: modified Gram-Schmidt on columns
/// with positive-diagonal sign fix, then a last-column flip if det == -1.
inline Mat project_so_n(const Mat& m) {
  if (!m.square()) throw std::invalid_argument("project_so_n: not square");
  const int n = m.rows();
  Mat q = m;
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < j; ++k) {
      double proj = 0.0;
      for (int i = 0; i < n; ++i) proj += q(i, k) * q(i, j);
      for (int i = 0; i < n; ++i) q(i, j) -= proj * q(i, k);
    }
    double nrm = 0.0;
    for (int i = 0; i < n; ++i) nrm += q(i, j) * q(i, j);
    nrm = std::sqrt(nrm);
    if (nrm < 1e-12) throw std::invalid_argument("project_so_n: singular input");
    for (int i = 0; i < n; ++i) q(i, j) /= nrm;
  }
  if (determinant(q) < 0.0)
    for (int i = 0; i < n; ++i) q(i, n - 1) = -q(i, n - 1);
  return q;
}

/// Haar-ish random rotation: QR-projected Gaussian matrix.
inline Mat random_so_n(int n, Rng& rng) {
  Mat g(n, n);
  for (double& x : g.data()) x = rng.gauss();
  return project_so_n(g);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Sampling windows for the invariance-error expectation: one rotation period
/// for the compact family, a bounded window for the non-compact ones.
inline Interval default_t_range(Family family) {
  if (family == Family::Elliptic) return {0.0, 6.283185307179586476925286766559};
  return {-3.0, 3.0};
}

inline GroupElement sample_element(const SubgroupSpec& spec, Rng& rng, Interval t_range) {
  return element_at(spec, rng.uniform(t_range.lo, t_range.hi));
}

inline GroupElement sample_element(const SubgroupSpec& spec, Rng& rng) {
  return sample_element(spec, rng, default_t_range(spec.family));
}

}  // namespace hgamma
