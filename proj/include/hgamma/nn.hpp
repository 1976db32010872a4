#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hgamma/invrep.hpp"
#include "hgamma/linalg.hpp"
#include "hgamma/rng.hpp"

namespace hgamma {

// ---------------------------------------------------------------------------
// Reverse-mode tape
// ---------------------------------------------------------------------------

/// Records one adjoint closure per primitive in forward order; backward()
/// replays them exactly once in reverse. Forward values live in shared slots
/// captured by the closures.
class Tape {
 public:
  void record(std::function<void()> adjoint) { nodes_.push_back(std::move(adjoint)); }

  void backward() {
    if (nodes_.empty()) throw std::logic_error("Tape::backward: no forward pass recorded");
    if (ran_) throw std::logic_error("Tape::backward: tape already consumed");
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    ran_ = true;
  }

  void reset() {
    nodes_.clear();
    ran_ = false;
  }

  size_t size() const { return nodes_.size(); }
  bool consumed() const { return ran_; }

 private:
  std::vector<std::function<void()>> nodes_;
  bool ran_ = false;
};

struct VecSlot {
  Vec val;
  Vec grad;
  explicit VecSlot(Vec v) : val(std::move(v)), grad(val.size(), 0.0) {}
};
using VecNode = std::shared_ptr<VecSlot>;

struct MatSlot {
  Mat val;
  Mat grad;
  explicit MatSlot(Mat m) : val(std::move(m)), grad(val.rows(), val.cols()) {}
};
using MatNode = std::shared_ptr<MatSlot>;

struct ScalarSlot {
  double val = 0.0;
  double grad = 0.0;
};
using ScalarNode = std::shared_ptr<ScalarSlot>;

inline VecNode make_leaf(Vec v) { return std::make_shared<VecSlot>(std::move(v)); }

/// Seeds the output adjoint and drains the tape.
inline void backward(Tape& tape, const VecNode& output, const Vec& output_grad) {
  if (output->val.size() != output_grad.size())
    throw std::invalid_argument("backward: output grad size mismatch");
  output->grad = output_grad;
  tape.backward();
}

inline void backward(Tape& tape, const ScalarNode& output, double output_grad = 1.0) {
  output->grad = output_grad;
  tape.backward();
}

// ---------------------------------------------------------------------------
// Differentiable primitives for the H-gamma pipeline
// ---------------------------------------------------------------------------

/// y = A^T x for a constant input vector; gradient flows into A only.
inline VecNode matvec_t_node(Tape& tape, const MatNode& a, const Vec& x) {
  VecNode y = make_leaf(matvec_t(a->val, x));
  tape.record([a, x, y]() {
    const int rows = a->val.rows(), cols = a->val.cols();
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) a->grad(i, j) += x[i] * y->grad[j];
  });
  return y;
}

/// A = exp(skew(theta)) via scaling-and-squaring; the adjoint replays the
/// cached power series and squaring chain in reverse.
inline MatNode exp_skew_node(Tape& tape, const VecNode& theta, int n) {
  if (theta->val.size() != static_cast<size_t>(n) * (n - 1) / 2)
    throw std::invalid_argument("exp_skew_node: theta size mismatch");
  const Mat s = skew_from_params(SkewParams(n, theta->val));
  auto ws = std::make_shared<detail::ExpWorkspace>();
  MatNode a = std::make_shared<MatSlot>(detail::exp_series_scaled(s, ws.get()));
  tape.record([theta, a, ws, n]() {
    Mat g = a->grad;
    for (int j = ws->squarings - 1; j >= 0; --j) {
      const Mat& r = ws->squares[j];
      g = g * transpose(r) + transpose(r) * g;
    }
    const Mat& t = ws->powers[1];
    const int terms = static_cast<int>(ws->powers.size()) - 1;
    double inv_fact = 1.0;
    for (int k = 1; k <= terms; ++k) inv_fact /= k;
    // barP starts at the highest-order term; walking down accumulates both the
    // direct series coefficient and the chain through P_k = P_{k-1} T.
    Mat bar_p = inv_fact * g;
    Mat bar_t(n, n);
    for (int k = terms; k >= 1; --k) {
      bar_t = bar_t + transpose(ws->powers[k - 1]) * bar_p;
      if (k > 1) {
        inv_fact *= k;
        bar_p = bar_p * transpose(t) + inv_fact * g;
      }
    }
    const double scale = std::ldexp(1.0, -ws->squarings);
    size_t idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j, ++idx)
        theta->grad[idx] += scale * (bar_t(i, j) - bar_t(j, i));
  });
  return a;
}

/// lambda = [1, exp(rho_0), exp(rho_1), ...]; the first rate is frozen.
inline VecNode rates_node(Tape& tape, const VecNode& rho) {
  Vec lambda(rho->val.size() + 1);
  lambda[0] = 1.0;
  for (size_t i = 0; i < rho->val.size(); ++i) lambda[i + 1] = std::exp(rho->val[i]);
  VecNode out = make_leaf(std::move(lambda));
  tape.record([rho, out]() {
    for (size_t i = 0; i < rho->val.size(); ++i)
      rho->grad[i] += out->val[i + 1] * out->grad[i + 1];
  });
  return out;
}

/// SO(3) canonical features ((v1^2 + v2^2), v3) of canonical coordinates v.
inline VecNode so3_features_node(Tape& tape, const VecNode& v) {
  if (v->val.size() != 3) throw std::invalid_argument("so3_features_node: expects R^3");
  VecNode f = make_leaf(Vec{v->val[0] * v->val[0] + v->val[1] * v->val[1], v->val[2]});
  tape.record([v, f]() {
    v->grad[0] += 2.0 * v->val[0] * f->grad[0];
    v->grad[1] += 2.0 * v->val[1] * f->grad[0];
    v->grad[2] += f->grad[1];
  });
  return f;
}

struct InvRepNodes {
  VecNode rep;
  ScalarNode t0;
  int pivot_block = 0;  // 1-based, 0 when degenerate
  InvRepStatus status = InvRepStatus::Ok;
};

/// Differentiable invRep on canonical coordinates (all three families). The
/// pivot choice is treated as locally constant; the norm in the pivot adjoint
/// is clamped at eps so the measure-zero singularity cannot blow up a step.
inline InvRepNodes inv_rep_node(Tape& tape, const VecNode& v, const VecNode& lambda,
                                Family family, double eps = kDegeneracyEps) {
  const int n = static_cast<int>(v->val.size());
  const int nb = n / 2;
  if (lambda->val.size() != static_cast<size_t>(nb))
    throw std::invalid_argument("inv_rep_node: rate count mismatch");

  InvRepNodes out;
  out.t0 = std::make_shared<ScalarSlot>();

  int pivot = -1;
  if (family == Family::Elliptic) {
    for (int i = 0; i < nb; ++i) {
      if (lambda->val[i] == 0.0) continue;
      if (std::hypot(v->val[2 * i], v->val[2 * i + 1]) > eps) {
        pivot = i;
        break;
      }
    }
  } else {
    const double p1 = v->val[0], p2 = v->val[1];
    if (family == Family::Hyperbolic) {
      if (std::abs(p1) > eps && std::abs(p1) > std::abs(p2)) pivot = 0;
      if (std::abs(p1) <= eps && std::abs(p2) <= eps)
        out.status = InvRepStatus::DegenerateOrbit;
      else if (pivot < 0)
        out.status = InvRepStatus::LightconeRegion;
    } else {
      if (std::abs(p2) > eps)
        pivot = 0;
      else
        out.status = InvRepStatus::DegenerateOrbit;
    }
  }

  if (pivot < 0) {
    if (out.status == InvRepStatus::Ok) out.status = InvRepStatus::DegenerateOrbit;
    // Fallback: representation is the canonical coordinates themselves.
    out.rep = make_leaf(v->val);
    VecNode rep = out.rep;
    tape.record([v, rep]() {
      for (size_t i = 0; i < v->val.size(); ++i) v->grad[i] += rep->grad[i];
    });
    return out;
  }

  const double p1 = v->val[2 * pivot], p2 = v->val[2 * pivot + 1];
  const double lp = lambda->val[pivot];
  double t0 = 0.0, pivot_a = 0.0, pivot_b = 0.0;
  switch (family) {
    case Family::Elliptic:
      t0 = std::atan2(p2, p1) / lp;
      pivot_a = std::hypot(p1, p2);
      break;
    case Family::Hyperbolic:
      t0 = std::atanh(p2 / p1) / lp;
      pivot_a = (p1 >= 0.0 ? 1.0 : -1.0) * std::sqrt(std::abs(p1 * p1 - p2 * p2));
      break;
    case Family::Parabolic:
      t0 = p1 / (p2 * lp);
      pivot_b = p2;
      break;
  }

  Vec rep = v->val;
  rep[2 * pivot] = pivot_a;
  rep[2 * pivot + 1] = pivot_b;
  for (int i = 0; i < nb; ++i) {
    if (i == pivot) continue;
    switch (family) {
      case Family::Elliptic: detail::apply_rot2_inplace(rep, 2 * i, -t0 * lambda->val[i]); break;
      case Family::Hyperbolic: detail::apply_hyp2_inplace(rep, 2 * i, -t0 * lambda->val[i]); break;
      case Family::Parabolic: detail::apply_shear2_inplace(rep, 2 * i, -t0 * lambda->val[i]); break;
    }
  }

  out.rep = make_leaf(std::move(rep));
  out.t0->val = t0;
  out.pivot_block = pivot + 1;

  VecNode rep_node = out.rep;
  ScalarNode t0_node = out.t0;
  tape.record([v, lambda, rep_node, t0_node, family, pivot, nb, n, eps]() {
    const Vec& rv = rep_node->val;
    const Vec& rg = rep_node->grad;
    const double p1 = v->val[2 * pivot], p2 = v->val[2 * pivot + 1];
    const double lp = lambda->val[pivot];
    const double t0 = t0_node->val;

    double g_t0 = t0_node->grad;

    // Non-pivot blocks y_i = K(-t0 * l_i) v_i, with generator J/K/N per family.
    for (int i = 0; i < nb; ++i) {
      if (i == pivot) continue;
      const double li = lambda->val[i];
      const double y1 = rv[2 * i], y2 = rv[2 * i + 1];
      const double g1 = rg[2 * i], g2 = rg[2 * i + 1];
      double d1 = 0.0, d2 = 0.0;  // (d/d theta) y at theta = -t0 l_i
      const double arg = -t0 * li;
      switch (family) {
        case Family::Elliptic: {
          d1 = -y2;
          d2 = y1;
          const double c = std::cos(arg), s = std::sin(arg);
          v->grad[2 * i] += c * g1 + s * g2;
          v->grad[2 * i + 1] += -s * g1 + c * g2;
          break;
        }
        case Family::Hyperbolic: {
          d1 = y2;
          d2 = y1;
          const double c = std::cosh(arg), s = std::sinh(arg);
          v->grad[2 * i] += c * g1 + s * g2;
          v->grad[2 * i + 1] += s * g1 + c * g2;
          break;
        }
        case Family::Parabolic: {
          d1 = y2;
          d2 = 0.0;
          v->grad[2 * i] += g1;
          v->grad[2 * i + 1] += arg * g1 + g2;
          break;
        }
      }
      const double dir = g1 * d1 + g2 * d2;
      g_t0 += -li * dir;
      lambda->grad[i] += -t0 * dir;
    }

    if (n % 2 != 0) v->grad[n - 1] += rg[n - 1];

    // Pivot block and the t0 solve.
    switch (family) {
      case Family::Elliptic: {
        const double r = std::max(std::hypot(p1, p2), eps);
        v->grad[2 * pivot] += rg[2 * pivot] * p1 / r;
        v->grad[2 * pivot + 1] += rg[2 * pivot] * p2 / r;
        const double rho2 = std::max(p1 * p1 + p2 * p2, eps * eps);
        v->grad[2 * pivot] += g_t0 * (-p2 / (rho2 * lp));
        v->grad[2 * pivot + 1] += g_t0 * (p1 / (rho2 * lp));
        break;
      }
      case Family::Hyperbolic: {
        const double sgn = p1 >= 0.0 ? 1.0 : -1.0;
        const double nn = std::max(std::sqrt(std::abs(p1 * p1 - p2 * p2)), eps);
        v->grad[2 * pivot] += rg[2 * pivot] * sgn * p1 / nn;
        v->grad[2 * pivot + 1] += rg[2 * pivot] * (-sgn * p2 / nn);
        const double q = p1 * p1 - p2 * p2;
        v->grad[2 * pivot] += g_t0 * (-p2 / (q * lp));
        v->grad[2 * pivot + 1] += g_t0 * (p1 / (q * lp));
        break;
      }
      case Family::Parabolic: {
        v->grad[2 * pivot + 1] += rg[2 * pivot + 1];
        v->grad[2 * pivot] += g_t0 / (p2 * lp);
        v->grad[2 * pivot + 1] += g_t0 * (-p1 / (p2 * p2 * lp));
        break;
      }
    }
    lambda->grad[pivot] += g_t0 * (-t0 / lp);
  });
  return out;
}

/// Equivariant head: y = R(t0 * lambda1) * phi, phi in R^2, lambda1 frozen 1.
inline VecNode equivariant_head_node(Tape& tape, const VecNode& phi, const ScalarNode& t0) {
  if (phi->val.size() != 2)
    throw std::invalid_argument("equivariant_head_node: output dim must be 2");
  const double c = std::cos(t0->val), s = std::sin(t0->val);
  VecNode y = make_leaf(Vec{c * phi->val[0] - s * phi->val[1], s * phi->val[0] + c * phi->val[1]});
  tape.record([phi, t0, y, c, s]() {
    const double g1 = y->grad[0], g2 = y->grad[1];
    phi->grad[0] += c * g1 + s * g2;
    phi->grad[1] += -s * g1 + c * g2;
    t0->grad += -y->val[1] * g1 + y->val[0] * g2;
  });
  return y;
}

/// Accumulates weight * |pred - target|^2 into a shared scalar loss slot.
inline void squared_error_node(Tape& tape, const VecNode& pred, const Vec& target, double weight,
                               const ScalarNode& loss) {
  if (pred->val.size() != target.size())
    throw std::invalid_argument("squared_error_node: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < target.size(); ++i) {
    const double d = pred->val[i] - target[i];
    s += d * d;
  }
  loss->val += weight * s;
  tape.record([pred, target, weight, loss]() {
    for (size_t i = 0; i < target.size(); ++i)
      pred->grad[i] += 2.0 * weight * (pred->val[i] - target[i]) * loss->grad;
  });
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

/// Fully connected network: affine + ReLU on hidden layers, linear output.
struct MlpParams {
  std::vector<int> layer_dims;  // [in, h1, ..., out]
  std::vector<Mat> w;           // w[k]: layer_dims[k+1] x layer_dims[k]
  std::vector<Vec> b;

  static MlpParams init(std::vector<int> dims, Rng& rng) {
    if (dims.size() < 2) throw std::invalid_argument("MlpParams: need at least two layer dims");
    MlpParams p;
    p.layer_dims = std::move(dims);
    for (size_t k = 0; k + 1 < p.layer_dims.size(); ++k) {
      const int fan_in = p.layer_dims[k], fan_out = p.layer_dims[k + 1];
      Mat wk(fan_out, fan_in);
      const double bound = std::sqrt(6.0 / fan_in);
      for (double& x : wk.data()) x = rng.uniform(-bound, bound);
      p.w.push_back(std::move(wk));
      p.b.emplace_back(fan_out, 0.0);
    }
    return p;
  }
};

struct MlpGrads {
  std::vector<Mat> w;
  std::vector<Vec> b;

  static MlpGrads zeros_like(const MlpParams& p) {
    MlpGrads g;
    for (size_t k = 0; k < p.w.size(); ++k) {
      g.w.emplace_back(p.w[k].rows(), p.w[k].cols());
      g.b.emplace_back(p.b[k].size(), 0.0);
    }
    return g;
  }

  void zero() {
    for (Mat& m : w)
      for (double& x : m.data()) x = 0.0;
    for (Vec& v : b)
      for (double& x : v) x = 0.0;
  }
};

inline Vec mlp_eval(const MlpParams& p, const Vec& x) {
  if (static_cast<int>(x.size()) != p.layer_dims.front())
    throw std::invalid_argument("mlp_eval: input dim mismatch");
  Vec h = x;
  for (size_t k = 0; k < p.w.size(); ++k) {
    Vec z = matvec(p.w[k], h);
    for (size_t i = 0; i < z.size(); ++i) z[i] += p.b[k][i];
    if (k + 1 < p.w.size())
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    h = std::move(z);
  }
  return h;
}

/// Recorded forward pass. Gradients accumulate into `grads`; the ReLU adjoint
/// uses the 0 subgradient at the kink.
inline VecNode mlp_forward(const MlpParams& p, MlpGrads& grads, const VecNode& x, Tape& tape) {
  if (static_cast<int>(x->val.size()) != p.layer_dims.front())
    throw std::invalid_argument("mlp_forward: input dim mismatch");
  VecNode h = x;
  for (size_t k = 0; k < p.w.size(); ++k) {
    const Mat& wk = p.w[k];
    Vec zv = matvec(wk, h->val);
    for (size_t i = 0; i < zv.size(); ++i) zv[i] += p.b[k][i];
    VecNode z = make_leaf(std::move(zv));
    {
      Mat* wg = &grads.w[k];
      Vec* bg = &grads.b[k];
      const Mat* wptr = &wk;
      VecNode hin = h;
      tape.record([wptr, wg, bg, hin, z]() {
        const int rows = wptr->rows(), cols = wptr->cols();
        for (int i = 0; i < rows; ++i) {
          const double gi = z->grad[i];
          if (gi == 0.0) continue;
          (*bg)[i] += gi;
          for (int j = 0; j < cols; ++j) {
            (*wg)(i, j) += gi * hin->val[j];
            hin->grad[j] += (*wptr)(i, j) * gi;
          }
        }
      });
    }
    if (k + 1 < p.w.size()) {
      Vec av = z->val;
      for (double& v : av) v = v > 0.0 ? v : 0.0;
      VecNode a = make_leaf(std::move(av));
      tape.record([z, a]() {
        for (size_t i = 0; i < z->val.size(); ++i)
          if (z->val[i] > 0.0) z->grad[i] += a->grad[i];
      });
      h = a;
    } else {
      h = z;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  long step = 0;
  Vec m, v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(size_t count, double lr = 1e-3) {
    AdamState s;
    s.m.assign(count, 0.0);
    s.v.assign(count, 0.0);
    s.lr = lr;
    return s;
  }
};

/// One bias-corrected Adam update over a flat parameter view. `lr_scale`,
/// when non-empty, multiplies the step size per coordinate (Adam normalizes
/// per-coordinate gradients away, so scaling step sizes is the only way to
/// slow a parameter group down).
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
                      std::span<const double> lr_scale = {}) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (!lr_scale.empty() && lr_scale.size() != params.size())
    throw std::invalid_argument("adam_step: lr_scale size mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    const double lr = lr_scale.empty() ? state.lr : state.lr * lr_scale[i];
    params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace hgamma
