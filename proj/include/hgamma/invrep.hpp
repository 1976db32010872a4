#pragma once

#include <cmath>
#include <stdexcept>

#include "hgamma/groups.hpp"
#include "hgamma/linalg.hpp"

namespace hgamma {

inline constexpr double kDegeneracyEps = 1e-9;

enum class InvRepStatus { Ok, DegenerateOrbit, LightconeRegion };

/// Canonical orbit representative plus the alignment parameter that produced
/// it. pivot_block is 1-based; 0 means no block could define t0 and rep is
/// the untouched canonical coordinates.
struct InvRepOutput {
  Vec rep;
  double t0 = 0.0;
  int pivot_block = 0;
  InvRepStatus status = InvRepStatus::Ok;
};

/// Arguments of phi in the SO(3) canonical form: squared radial part in the
/// invariant plane and the axial coordinate.
struct So3Features {
  double radial = 0.0;
  double axial = 0.0;
};

inline So3Features so3_features(const Vec& x, const Mat& a) {
  if (x.size() != 3 || a.rows() != 3 || a.cols() != 3)
    throw std::invalid_argument("so3_features: expects R^3 and a 3x3 matrix");
  if (orthogonality_residual(a) > 1e-6)
    throw std::invalid_argument("so3_features: A is not orthogonal within tolerance");
  const Vec v = matvec_t(a, x);
  return So3Features{v[0] * v[0] + v[1] * v[1], v[2]};
}

namespace detail {

inline void apply_rot2_inplace(Vec& v, int off, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double a = v[off], b = v[off + 1];
  v[off] = c * a - s * b;
  v[off + 1] = s * a + c * b;
}

inline void apply_hyp2_inplace(Vec& v, int off, double arg) {
  if (std::abs(arg) > kHyperbolicArgGuard)
    throw std::range_error("inv_rep_h: hyperbolic argument exceeds overflow guard");
  const double c = std::cosh(arg), s = std::sinh(arg);
  const double a = v[off], b = v[off + 1];
  v[off] = c * a + s * b;
  v[off + 1] = s * a + c * b;
}

inline void apply_shear2_inplace(Vec& v, int off, double arg) {
  v[off] += arg * v[off + 1];
}

}  // namespace detail

/// invRep for the elliptic family. The pivot is the first block with nonzero
/// rate and norm above eps; t0 aligns it with e1 and every other block is
/// counter-rotated by t0 times its own rate. Zero-rate blocks and the odd
/// trailing coordinate pass through unchanged (the action fixes them).
inline InvRepOutput inv_rep(const Vec& x, const SubgroupSpec& spec, double eps = kDegeneracyEps) {
  if (spec.family != Family::Elliptic) throw std::invalid_argument("inv_rep: elliptic family only");
  if (spec.n < 2 || static_cast<int>(x.size()) != spec.n)
    throw std::invalid_argument("inv_rep: dimension mismatch");
  const Vec v = matvec_t(spec.A, x);
  const int nb = spec.n / 2;

  int pivot = -1;
  for (int i = 0; i < nb; ++i) {
    if (spec.lambda[i] == 0.0) continue;
    if (std::hypot(v[2 * i], v[2 * i + 1]) > eps) {
      pivot = i;
      break;
    }
  }
  if (pivot < 0) return InvRepOutput{v, 0.0, 0, InvRepStatus::DegenerateOrbit};

  const double p1 = v[2 * pivot], p2 = v[2 * pivot + 1];
  const double t0 = std::atan2(p2, p1) / spec.lambda[pivot];

  Vec rep = v;
  rep[2 * pivot] = std::hypot(p1, p2);
  rep[2 * pivot + 1] = 0.0;
  for (int i = 0; i < nb; ++i) {
    if (i == pivot) continue;
    detail::apply_rot2_inplace(rep, 2 * i, -t0 * spec.lambda[i]);
  }
  return InvRepOutput{std::move(rep), t0, pivot + 1, InvRepStatus::Ok};
}

/// invRep for the hyperbolic family. Defined on the timelike region of the
/// first block (|v11| > |v12|); the lightcone region is reported as a signal
/// with the canonical coordinates passed through untouched.
inline InvRepOutput inv_rep_h(const Vec& x, const SubgroupSpec& spec, double eps = kDegeneracyEps) {
  if (spec.family != Family::Hyperbolic)
    throw std::invalid_argument("inv_rep_h: hyperbolic family only");
  if (spec.n % 2 != 0 || static_cast<int>(x.size()) != spec.n)
    throw std::invalid_argument("inv_rep_h: even dimension required");
  const Vec v = matvec(orientation_inverse(spec), x);
  const int nb = spec.n / 2;

  const double p1 = v[0], p2 = v[1];
  if (std::abs(p1) <= eps && std::abs(p2) <= eps)
    return InvRepOutput{v, 0.0, 0, InvRepStatus::DegenerateOrbit};
  if (std::abs(p1) <= std::abs(p2))
    return InvRepOutput{v, 0.0, 0, InvRepStatus::LightconeRegion};

  const double t0 = std::atanh(p2 / p1) / spec.lambda[0];
  const double pseudo = std::sqrt(std::abs(p1 * p1 - p2 * p2));

  Vec rep = v;
  rep[0] = (p1 >= 0.0 ? pseudo : -pseudo);
  rep[1] = 0.0;
  for (int i = 1; i < nb; ++i) detail::apply_hyp2_inplace(rep, 2 * i, -t0 * spec.lambda[i]);
  return InvRepOutput{std::move(rep), t0, 1, InvRepStatus::Ok};
}

/// invRep for the parabolic family. The shear fixes the second component of
/// every block, so the pivot is degenerate exactly when |v12| <= eps.
inline InvRepOutput inv_rep_p(const Vec& x, const SubgroupSpec& spec, double eps = kDegeneracyEps) {
  if (spec.family != Family::Parabolic)
    throw std::invalid_argument("inv_rep_p: parabolic family only");
  if (spec.n % 2 != 0 || static_cast<int>(x.size()) != spec.n)
    throw std::invalid_argument("inv_rep_p: even dimension required");
  const Vec v = matvec(orientation_inverse(spec), x);
  const int nb = spec.n / 2;

  if (std::abs(v[1]) <= eps) return InvRepOutput{v, 0.0, 0, InvRepStatus::DegenerateOrbit};

  const double t0 = v[0] / (v[1] * spec.lambda[0]);
  Vec rep = v;
  rep[0] = 0.0;
  for (int i = 1; i < nb; ++i) detail::apply_shear2_inplace(rep, 2 * i, -t0 * spec.lambda[i]);
  return InvRepOutput{std::move(rep), t0, 1, InvRepStatus::Ok};
}

/// Dispatch on the spec's family.
inline InvRepOutput inv_rep_family(const Vec& x, const SubgroupSpec& spec,
                                   double eps = kDegeneracyEps) {
  switch (spec.family) {
    case Family::Elliptic: return inv_rep(x, spec, eps);
    case Family::Hyperbolic: return inv_rep_h(x, spec, eps);
    case Family::Parabolic: return inv_rep_p(x, spec, eps);
  }
  throw std::logic_error("inv_rep_family: bad family");
}

/// Brute-force orbit membership test: scans a dense parameter grid for the
/// closest group element taking x to y, then sharpens the bracket around the
/// argmin by 1D search. This is the independent oracle the invRep equality
/// tests are checked against; for the elliptic family it assumes the rates
/// are commensurate so that one period [0, 2pi] covers the orbit.
inline bool orbit_equal_oracle(const Vec& x, const Vec& y, const SubgroupSpec& spec, int grid,
                               double tol = 1e-6) {
  if (grid < 100) throw std::invalid_argument("orbit_equal_oracle: grid must be >= 100");
  const Interval range = spec.family == Family::Elliptic
                             ? Interval{0.0, 6.283185307179586476925286766559}
                             : Interval{-6.0, 6.0};
  const Vec u = matvec(orientation_inverse(spec), x);

  const auto dist = [&](double t) {
    Vec z = u;
    const int nb = spec.n / 2;
    for (int i = 0; i < nb; ++i) {
      switch (spec.family) {
        case Family::Elliptic: detail::apply_rot2_inplace(z, 2 * i, t * spec.lambda[i]); break;
        case Family::Hyperbolic: detail::apply_hyp2_inplace(z, 2 * i, t * spec.lambda[i]); break;
        case Family::Parabolic: detail::apply_shear2_inplace(z, 2 * i, t * spec.lambda[i]); break;
      }
    }
    return norm2(matvec(spec.A, z) - y);
  };

  const double step = (range.hi - range.lo) / grid;
  double best_t = range.lo;
  double best = dist(best_t);
  for (int i = 1; i <= grid; ++i) {
    const double t = range.lo + step * i;
    const double d = dist(t);
    if (d < best) {
      best = d;
      best_t = t;
    }
  }

  // Bracket one grid step around the argmin, then ternary-search it down.
  double lo = best_t - step, hi = best_t + step;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (dist(m1) < dist(m2))
      hi = m2;
    else
      lo = m1;
  }
  best = std::min(best, dist(0.5 * (lo + hi)));
  return best < tol;
}

}  // namespace hgamma
