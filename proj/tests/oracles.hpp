#pragma once

// Independent reference implementations used only by tests. These stay
// deliberately naive so they share no code path with the library routines
// they check.

#include <cmath>
#include <functional>

#include "hgamma/linalg.hpp"
#include "hgamma/rng.hpp"

namespace oracle {

/// Plain truncated exponential series, no scaling, no squaring. Converges to
/// well below 1e-13 for the matrix norms used in tests (<= ~6).
inline hgamma::Mat taylor_exp(const hgamma::Mat& b, int terms = 80) {
  hgamma::Mat sum = hgamma::Mat::identity(b.rows());
  hgamma::Mat power = hgamma::Mat::identity(b.rows());
  double inv_fact = 1.0;
  for (int k = 1; k <= terms; ++k) {
    power = power * b;
    inv_fact /= k;
    sum = sum + inv_fact * power;
  }
  return sum;
}

inline hgamma::Mat random_skew(int n, hgamma::Rng& rng, double scale = 1.0) {
  hgamma::Mat s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = scale * rng.uniform(-1.0, 1.0);
      s(i, j) = v;
      s(j, i) = -v;
    }
  return s;
}

/// Central finite difference of a scalar function of one coordinate.
inline double central_diff(const std::function<double(double)>& f, double x0, double h = 1e-5) {
  return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

/// Floored relative error, so coordinates where both sides vanish compare
/// cleanly against the finite-difference noise floor.
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
