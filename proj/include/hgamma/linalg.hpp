#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hgamma {

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
  for (const double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void require_finite(const Vec& v, const char* what) {
  if (!all_finite(v)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

/// Dense row-major matrix of doubles. Checked construction: dimensions must
/// match the payload and every entry must be finite.
class Mat {
 public:
  Mat() = default;

  Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, 0.0) {
    if (rows <= 0 || cols <= 0) throw std::invalid_argument("Mat: non-positive dimension");
  }

  Mat(int rows, int cols, Vec data) : rows_(rows), cols_(cols), a_(std::move(data)) {
    if (rows <= 0 || cols <= 0) throw std::invalid_argument("Mat: non-positive dimension");
    if (a_.size() != static_cast<size_t>(rows) * cols)
      throw std::invalid_argument("Mat: data size mismatch");
    require_finite(a_, "Mat");
  }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

  const Vec& data() const { return a_; }
  Vec& data() { return a_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  Vec a_;
};

// ---------------------------------------------------------------------------
// Elementwise and product helpers
// ---------------------------------------------------------------------------

inline Mat operator*(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape mismatch");
  Mat c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Mat operator+(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("mat add: shape mismatch");
  Mat c = a;
  for (size_t i = 0; i < c.data().size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

inline Mat operator-(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("mat sub: shape mismatch");
  Mat c = a;
  for (size_t i = 0; i < c.data().size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

inline Mat operator*(double s, const Mat& a) {
  Mat c = a;
  for (double& x : c.data()) x *= s;
  return c;
}

inline Vec matvec(const Mat& a, const Vec& x) {
  if (a.cols() != static_cast<int>(x.size())) throw std::invalid_argument("matvec: shape mismatch");
  Vec y(a.rows(), 0.0);
  for (int i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

/// y = A^T x without forming the transpose.
inline Vec matvec_t(const Mat& a, const Vec& x) {
  if (a.rows() != static_cast<int>(x.size()))
    throw std::invalid_argument("matvec_t: shape mismatch");
  Vec y(a.cols(), 0.0);
  for (int i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    for (int j = 0; j < a.cols(); ++j) y[j] += a(i, j) * xi;
  }
  return y;
}

inline Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double max_abs(const Mat& a) {
  double m = 0.0;
  for (const double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

inline double frobenius_norm(const Mat& a) {
  double s = 0.0;
  for (const double x : a.data()) s += x * x;
  return std::sqrt(s);
}

inline double frobenius_inner(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("frobenius_inner: shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

inline double norm2(const Vec& v) {
  double s = 0.0;
  for (const double x : v) s += x * x;
  return std::sqrt(s);
}

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vec operator-(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vec sub: size mismatch");
  Vec c(a.size());
  for (size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
  return c;
}

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

/// LU with partial pivoting; throws std::invalid_argument on (numerically)
/// singular input.
inline Vec lu_solve(Mat a, Vec b) {
  if (!a.square() || a.rows() != static_cast<int>(b.size()))
    throw std::invalid_argument("lu_solve: shape mismatch");
  const int n = a.rows();
  std::vector<int> piv(n);
  for (int i = 0; i < n; ++i) piv[i] = i;
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::abs(a(k, k));
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > best) {
        best = std::abs(a(i, k));
        p = i;
      }
    if (best < 1e-300) throw std::invalid_argument("lu_solve: singular matrix");
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
      std::swap(b[k], b[p]);
    }
    for (int i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      a(i, k) = f;
      for (int j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  Vec x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

inline Mat inverse(const Mat& a) {
  if (!a.square()) throw std::invalid_argument("inverse: not square");
  const int n = a.rows();
  Mat inv(n, n);
  for (int j = 0; j < n; ++j) {
    Vec e(n, 0.0);
    e[j] = 1.0;
    const Vec col = lu_solve(a, e);
    for (int i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

inline double determinant(Mat a) {
  if (!a.square()) throw std::invalid_argument("determinant: not square");
  const int n = a.rows();
  double det = 1.0;
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (std::abs(a(p, k)) < 1e-300) return 0.0;
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
      det = -det;
    }
    det *= a(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (int j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return det;
}

// ---------------------------------------------------------------------------
// Canonical 2x2 actions
// ---------------------------------------------------------------------------

inline Mat rot2(double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("rot2: non-finite angle");
  const double c = std::cos(t), s = std::sin(t);
  return Mat(2, 2, {c, -s, s, c});
}

/// Guard keeps cosh well inside double range; products of a few elements stay
/// finite.
inline constexpr double kHyperbolicArgGuard = 300.0;

inline Mat hyp2(double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("hyp2: non-finite argument");
  if (std::abs(t) > kHyperbolicArgGuard) throw std::range_error("hyp2: |t| exceeds overflow guard");
  const double c = std::cosh(t), s = std::sinh(t);
  return Mat(2, 2, {c, s, s, c});
}

inline Mat shear2(double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("shear2: non-finite argument");
  return Mat(2, 2, {1.0, t, 0.0, 1.0});
}

inline Mat block_diag(const std::vector<Mat>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("block_diag: empty block list");
  int n = 0;
  for (const Mat& b : blocks) {
    if (!b.square()) throw std::invalid_argument("block_diag: non-square block");
    n += b.rows();
  }
  Mat m(n, n);
  int off = 0;
  for (const Mat& b : blocks) {
    for (int i = 0; i < b.rows(); ++i)
      for (int j = 0; j < b.cols(); ++j) m(off + i, off + j) = b(i, j);
    off += b.rows();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Skew-symmetric parameterization and exponential
// ---------------------------------------------------------------------------

/// Strictly-upper-triangle coordinates of a skew-symmetric n x n matrix,
/// enumerated row-major: (0,1), (0,2), ..., (n-2,n-1).
struct SkewParams {
  int n = 0;
  Vec theta;

  SkewParams() = default;
  SkewParams(int n_, Vec theta_) : n(n_), theta(std::move(theta_)) {
    if (n < 1) throw std::invalid_argument("SkewParams: n must be positive");
    if (theta.size() != static_cast<size_t>(n) * (n - 1) / 2)
      throw std::invalid_argument("SkewParams: theta size must be n(n-1)/2");
    require_finite(theta, "SkewParams");
  }

  static SkewParams zeros(int n_) { return SkewParams(n_, Vec(static_cast<size_t>(n_) * (n_ - 1) / 2, 0.0)); }
};

inline Mat skew_from_params(const SkewParams& p) {
  Mat s(p.n, p.n);
  size_t k = 0;
  for (int i = 0; i < p.n; ++i)
    for (int j = i + 1; j < p.n; ++j, ++k) {
      s(i, j) = p.theta[k];
      s(j, i) = -p.theta[k];
    }
  return s;
}

inline SkewParams params_from_skew(const Mat& s) {
  SkewParams p = SkewParams::zeros(s.rows());
  size_t k = 0;
  for (int i = 0; i < s.rows(); ++i)
    for (int j = i + 1; j < s.rows(); ++j, ++k) p.theta[k] = s(i, j);
  return p;
}

namespace detail {

/// Shared by exp_skew and its reverse-mode adjoint: scaling count and the
/// cached power series / squaring intermediates.
struct ExpWorkspace {
  int squarings = 0;
  std::vector<Mat> powers;   // powers[k] = T^k, T = B / 2^squarings
  std::vector<Mat> squares;  // squares[j]: j-th repeated square, squares[0] = series sum
};

inline constexpr int kExpSeriesTerms = 20;

inline Mat exp_series_scaled(const Mat& b, ExpWorkspace* ws) {
  const int n = b.rows();
  int s = 0;
  double scale = max_abs(b) * n;
  while (scale > 0.25 && s < 60) {
    scale *= 0.5;
    ++s;
  }
  Mat t = std::ldexp(1.0, -s) * b;

  std::vector<Mat> powers;
  powers.reserve(kExpSeriesTerms + 1);
  powers.push_back(Mat::identity(n));
  Mat sum = Mat::identity(n);
  double inv_fact = 1.0;
  for (int k = 1; k <= kExpSeriesTerms; ++k) {
    powers.push_back(powers.back() * t);
    inv_fact /= k;
    sum = sum + inv_fact * powers.back();
  }

  std::vector<Mat> squares;
  squares.push_back(sum);
  for (int j = 0; j < s; ++j) squares.push_back(squares.back() * squares.back());

  if (ws) {
    ws->squarings = s;
    ws->powers = std::move(powers);
    ws->squares = squares;
  }
  return squares.back();
}

}  // namespace detail

/// Matrix exponential of a skew-symmetric matrix via scaling-and-squaring of
/// a truncated series. The input is validated against |B + B^T|.
inline Mat exp_skew(const Mat& b) {
  if (!b.square()) throw std::invalid_argument("exp_skew: not square");
  if (max_abs(b + transpose(b)) >= 1e-10)
    throw std::invalid_argument("exp_skew: input is not skew-symmetric");
  return detail::exp_series_scaled(b, nullptr);
}

/// General exponential (no symmetry requirement); used for the hyperbolic and
/// parabolic canonical generators in oracle checks.
inline Mat exp_mat(const Mat& b) {
  if (!b.square()) throw std::invalid_argument("exp_mat: not square");
  return detail::exp_series_scaled(b, nullptr);
}

// ---------------------------------------------------------------------------
// Canonical generators of the three one-parameter families
// ---------------------------------------------------------------------------

enum class Family { Elliptic, Hyperbolic, Parabolic };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Elliptic: return "elliptic";
    case Family::Hyperbolic: return "hyperbolic";
    case Family::Parabolic: return "parabolic";
  }
  return "?";
}

/// Block-diagonal canonical generator: elliptic blocks (0 -l; l 0), hyperbolic
/// l*(0 1; 1 0), parabolic l*(0 1; 0 0). Odd n appends a 1x1 zero block and is
/// only defined for the elliptic family.
inline Mat make_canonical_generator(const Vec& lambda, int n, Family family) {
  if (n < 2) throw std::invalid_argument("make_canonical_generator: n must be >= 2");
  if (n % 2 != 0 && family != Family::Elliptic)
    throw std::invalid_argument("make_canonical_generator: odd n requires the elliptic family");
  if (lambda.size() != static_cast<size_t>(n / 2))
    throw std::invalid_argument("make_canonical_generator: need floor(n/2) rates");
  require_finite(lambda, "make_canonical_generator");
  Mat g(n, n);
  for (int k = 0; k < n / 2; ++k) {
    const double l = lambda[k];
    const int i = 2 * k;
    switch (family) {
      case Family::Elliptic:
        g(i, i + 1) = -l;
        g(i + 1, i) = l;
        break;
      case Family::Hyperbolic:
        g(i, i + 1) = l;
        g(i + 1, i) = l;
        break;
      case Family::Parabolic:
        g(i, i + 1) = l;
        break;
    }
  }
  return g;
}

/// exp(t * L0) in closed form: the block-diagonal canonical action.
inline Mat canonical_action(double t, const Vec& lambda, int n, Family family) {
  if (lambda.size() != static_cast<size_t>(n / 2))
    throw std::invalid_argument("canonical_action: need floor(n/2) rates");
  std::vector<Mat> blocks;
  blocks.reserve(lambda.size() + 1);
  for (const double l : lambda) {
    switch (family) {
      case Family::Elliptic: blocks.push_back(rot2(t * l)); break;
      case Family::Hyperbolic: blocks.push_back(hyp2(t * l)); break;
      case Family::Parabolic: blocks.push_back(shear2(t * l)); break;
    }
  }
  if (n % 2 != 0) {
    if (family != Family::Elliptic)
      throw std::invalid_argument("canonical_action: odd n requires the elliptic family");
    blocks.push_back(Mat::identity(1));
  }
  return block_diag(blocks);
}

}  // namespace hgamma
