#include "hgamma/nn.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "hgamma/rng.hpp"
#include "oracles.hpp"

using namespace hgamma;

namespace {

// Flatten MLP parameters so finite differences can walk every coordinate.
Vec flatten(const MlpParams& p) {
  Vec out;
  for (size_t k = 0; k < p.w.size(); ++k) {
    out.insert(out.end(), p.w[k].data().begin(), p.w[k].data().end());
    out.insert(out.end(), p.b[k].begin(), p.b[k].end());
  }
  return out;
}

void unflatten(MlpParams& p, const Vec& flat) {
  size_t idx = 0;
  for (size_t k = 0; k < p.w.size(); ++k) {
    for (double& x : p.w[k].data()) x = flat[idx++];
    for (double& x : p.b[k]) x = flat[idx++];
  }
}

Vec flatten_grads(const MlpGrads& g) {
  Vec out;
  for (size_t k = 0; k < g.w.size(); ++k) {
    out.insert(out.end(), g.w[k].data().begin(), g.w[k].data().end());
    out.insert(out.end(), g.b[k].begin(), g.b[k].end());
  }
  return out;
}

}  // namespace

TEST(Tape, BackwardBeforeForwardIsStateError) {
  Tape tape;
  EXPECT_THROW(tape.backward(), std::logic_error);
}

TEST(Tape, DoubleBackwardIsStateError) {
  Tape tape;
  tape.record([] {});
  tape.backward();
  EXPECT_THROW(tape.backward(), std::logic_error);
  tape.reset();
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Mlp, ZeroParamsGiveZeroOutput) {
  Rng rng(41);
  MlpParams p = MlpParams::init({3, 5, 2}, rng);
  for (Mat& w : p.w)
    for (double& x : w.data()) x = 0.0;
  const Vec y = mlp_eval(p, {0.3, -0.7, 1.2});
  EXPECT_DOUBLE_EQ(y[0], 0.0);
  EXPECT_DOUBLE_EQ(y[1], 0.0);
}

TEST(Mlp, SingleLinearIdentityLayer) {
  Rng rng(42);
  MlpParams p = MlpParams::init({3, 3}, rng);
  p.w[0] = Mat::identity(3);
  const Vec x{0.5, -1.5, 2.0};
  const Vec y = mlp_eval(p, x);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(y[i], x[i]);
}

TEST(Mlp, ShapeMismatchThrows) {
  Rng rng(43);
  MlpParams p = MlpParams::init({3, 4, 1}, rng);
  EXPECT_THROW(mlp_eval(p, {1.0, 2.0}), std::invalid_argument);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  Rng rng(44);
  MlpParams p = MlpParams::init({3, 8, 8, 2}, rng);
  std::vector<Vec> xs, ys;
  for (int i = 0; i < 4; ++i) {
    Vec x(3), y(2);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    for (double& v : y) v = rng.uniform(-1.0, 1.0);
    xs.push_back(x);
    ys.push_back(y);
  }

  const auto loss_of = [&](const Vec& flat) {
    MlpParams q = p;
    unflatten(q, flat);
    double s = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      const Vec out = mlp_eval(q, xs[i]);
      for (size_t j = 0; j < out.size(); ++j) s += (out[j] - ys[i][j]) * (out[j] - ys[i][j]);
    }
    return s;
  };

  MlpGrads grads = MlpGrads::zeros_like(p);
  Tape tape;
  ScalarNode loss = std::make_shared<ScalarSlot>();
  for (size_t i = 0; i < xs.size(); ++i) {
    VecNode out = mlp_forward(p, grads, make_leaf(xs[i]), tape);
    squared_error_node(tape, out, ys[i], 1.0, loss);
  }
  backward(tape, loss);

  const Vec analytic = flatten_grads(grads);
  const Vec flat0 = flatten(p);
  for (size_t c = 0; c < flat0.size(); ++c) {
    const double fd = oracle::central_diff(
        [&](double v) {
          Vec f = flat0;
          f[c] = v;
          return loss_of(f);
        },
        flat0[c]);
    EXPECT_LT(oracle::rel_err(analytic[c], fd), 1e-5) << "coordinate " << c;
  }
}

TEST(Backward, ConstantLossGivesZeroGradients) {
  Rng rng(45);
  MlpParams p = MlpParams::init({2, 4, 1}, rng);
  MlpGrads grads = MlpGrads::zeros_like(p);
  Tape tape;
  ScalarNode loss = std::make_shared<ScalarSlot>();
  const Vec x{0.4, -0.2};
  VecNode out = mlp_forward(p, grads, make_leaf(x), tape);
  squared_error_node(tape, out, out->val, 1.0, loss);  // pred == target
  backward(tape, loss);
  for (const double g : flatten_grads(grads)) EXPECT_DOUBLE_EQ(g, 0.0);
}

TEST(Backward, HalfSquaredNormThroughIdentityGivesInput) {
  Rng rng(46);
  MlpParams p = MlpParams::init({3, 3}, rng);
  p.w[0] = Mat::identity(3);
  MlpGrads grads = MlpGrads::zeros_like(p);
  Tape tape;
  ScalarNode loss = std::make_shared<ScalarSlot>();
  const Vec x{0.7, -0.3, 1.1};
  VecNode xn = make_leaf(x);
  VecNode out = mlp_forward(p, grads, xn, tape);
  squared_error_node(tape, out, Vec(3, 0.0), 0.5, loss);  // ||x||^2 / 2
  backward(tape, loss);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(xn->grad[i], x[i], 1e-14);
}

TEST(ExpSkewNode, GradientMatchesFiniteDifferences) {
  Rng rng(47);
  const int n = 4;
  Vec theta(n * (n - 1) / 2);
  for (double& v : theta) v = rng.uniform(-1.0, 1.0);
  Mat c(n, n);
  for (double& v : c.data()) v = rng.uniform(-1.0, 1.0);

  const auto f = [&](const Vec& th) {
    return frobenius_inner(c, exp_skew(skew_from_params(SkewParams(n, th))));
  };

  Tape tape;
  VecNode th = make_leaf(theta);
  MatNode a = exp_skew_node(tape, th, n);
  a->grad = c;
  tape.backward();

  for (size_t i = 0; i < theta.size(); ++i) {
    const double fd = oracle::central_diff(
        [&](double v) {
          Vec t = theta;
          t[i] = v;
          return f(t);
        },
        theta[i]);
    EXPECT_LT(oracle::rel_err(th->grad[i], fd), 1e-6) << "theta " << i;
  }
}

TEST(RatesNode, FirstRateFrozenAndGradientExact) {
  Tape tape;
  VecNode rho = make_leaf(Vec{0.3, -1.2});
  VecNode lambda = rates_node(tape, rho);
  EXPECT_DOUBLE_EQ(lambda->val[0], 1.0);
  EXPECT_NEAR(lambda->val[1], std::exp(0.3), 1e-15);
  lambda->grad = {5.0, 2.0, -1.0};
  tape.backward();
  EXPECT_NEAR(rho->grad[0], 2.0 * std::exp(0.3), 1e-14);
  EXPECT_NEAR(rho->grad[1], -1.0 * std::exp(-1.2), 1e-14);
}

TEST(InvRepNode, GradientMatchesFiniteDifferencesAllFamilies) {
  struct Case {
    Family family;
    Vec v;
    Vec lambda;
  };
  const std::vector<Case> cases = {
      {Family::Elliptic, {0.8, 0.5, -0.3, 0.7}, {1.0, 0.7}},
      {Family::Hyperbolic, {1.5, 0.4, 0.3, -0.8}, {1.0, 0.6}},
      {Family::Parabolic, {0.5, 1.2, -0.7, 0.4}, {1.0, 1.4}},
  };
  Rng rng(48);
  for (const Case& cs : cases) {
    const int n = static_cast<int>(cs.v.size());
    Vec c(n), ct{rng.uniform(-1.0, 1.0)};
    for (double& x : c) x = rng.uniform(-1.0, 1.0);

    const auto f = [&](const Vec& v, const Vec& lambda) {
      const SubgroupSpec spec = SubgroupSpec::canonical(n, lambda, cs.family);
      const InvRepOutput out = inv_rep_family(v, spec);
      return dot(c, out.rep) + ct[0] * out.t0;
    };

    Tape tape;
    VecNode vn = make_leaf(cs.v);
    VecNode ln = make_leaf(cs.lambda);
    InvRepNodes nodes = inv_rep_node(tape, vn, ln, cs.family);
    ASSERT_EQ(nodes.status, InvRepStatus::Ok);
    nodes.rep->grad = c;
    nodes.t0->grad = ct[0];
    tape.backward();

    for (size_t i = 0; i < cs.v.size(); ++i) {
      const double fd = oracle::central_diff(
          [&](double val) {
            Vec v = cs.v;
            v[i] = val;
            return f(v, cs.lambda);
          },
          cs.v[i]);
      EXPECT_LT(oracle::rel_err(vn->grad[i], fd), 1e-6)
          << family_name(cs.family) << " v coord " << i;
    }
    for (size_t i = 0; i < cs.lambda.size(); ++i) {
      const double fd = oracle::central_diff(
          [&](double val) {
            Vec l = cs.lambda;
            l[i] = val;
            return f(cs.v, l);
          },
          cs.lambda[i]);
      EXPECT_LT(oracle::rel_err(ln->grad[i], fd), 1e-6)
          << family_name(cs.family) << " lambda " << i;
    }
  }
}

TEST(EquivariantHeadNode, GradientMatchesFiniteDifferences) {
  const Vec v0{0.6, 0.9, -0.4, 0.2};
  const Vec lambda{1.0, 0.8};
  const Vec c{0.7, -1.3};

  const auto f = [&](const Vec& v) {
    const SubgroupSpec spec = SubgroupSpec::canonical(4, lambda);
    const InvRepOutput r = inv_rep(v, spec);
    const double phi1 = r.rep[0] + 2.0 * r.rep[2];  // a fixed linear phi
    const double phi2 = r.rep[1] - r.rep[3];
    const double cc = std::cos(r.t0), ss = std::sin(r.t0);
    return c[0] * (cc * phi1 - ss * phi2) + c[1] * (ss * phi1 + cc * phi2);
  };

  Tape tape;
  VecNode vn = make_leaf(v0);
  VecNode ln = make_leaf(lambda);
  InvRepNodes nodes = inv_rep_node(tape, vn, ln, Family::Elliptic);
  // phi = fixed linear map of rep, recorded manually.
  VecNode phi = make_leaf(Vec{nodes.rep->val[0] + 2.0 * nodes.rep->val[2],
                              nodes.rep->val[1] - nodes.rep->val[3]});
  {
    VecNode rep = nodes.rep;
    tape.record([rep, phi]() {
      rep->grad[0] += phi->grad[0];
      rep->grad[2] += 2.0 * phi->grad[0];
      rep->grad[1] += phi->grad[1];
      rep->grad[3] -= phi->grad[1];
    });
  }
  VecNode y = equivariant_head_node(tape, phi, nodes.t0);
  y->grad = c;
  tape.backward();

  for (size_t i = 0; i < v0.size(); ++i) {
    const double fd = oracle::central_diff(
        [&](double val) {
          Vec v = v0;
          v[i] = val;
          return f(v);
        },
        v0[i]);
    EXPECT_LT(oracle::rel_err(vn->grad[i], fd), 1e-6) << "v coord " << i;
  }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  AdamState st = AdamState::init(3, 1e-3);
  Vec params{1.0, -2.0, 0.5};
  const Vec before = params;
  Vec grads(3, 0.0);
  adam_step(st, params, grads);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(params[i], before[i]);
}

TEST(Adam, FirstStepIsSignScaled) {
  AdamState st = AdamState::init(2, 1e-3);
  Vec params{0.0, 0.0};
  const Vec grads{3.0, -0.25};
  adam_step(st, params, grads);
  for (int i = 0; i < 2; ++i) {
    const double expected = -st.lr * grads[i] / (std::abs(grads[i]) + st.eps);
    EXPECT_NEAR(params[i], expected, 1e-12);
  }
}

TEST(Adam, ConvergesOnQuadraticBowl) {
  AdamState st = AdamState::init(4, 1e-3);
  const Vec target{0.3, -0.7, 1.1, 0.0};
  Vec w{0.0, 0.0, 0.0, 0.5};
  Vec g(4);
  for (int step = 0; step < 5000; ++step) {
    for (int i = 0; i < 4; ++i) g[i] = 2.0 * (w[i] - target[i]);
    adam_step(st, w, g);
  }
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(w[i], target[i], 1e-4);
}

TEST(Adam, ShapeMismatchThrows) {
  AdamState st = AdamState::init(2, 1e-3);
  Vec params{0.0, 0.0, 0.0};
  Vec grads{1.0, 1.0, 1.0};
  EXPECT_THROW(adam_step(st, params, grads), std::invalid_argument);
}
