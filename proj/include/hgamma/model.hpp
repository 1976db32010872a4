#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgamma/groups.hpp"
#include "hgamma/invrep.hpp"
#include "hgamma/linalg.hpp"
#include "hgamma/nn.hpp"
#include "hgamma/rng.hpp"

namespace hgamma {

enum class ModelMode { So3Canonical, SOnInvRep, SLnElliptic, SLnHyperbolic, SLnParabolic };

inline const char* mode_name(ModelMode m) {
  switch (m) {
    case ModelMode::So3Canonical: return "so3_canonical";
    case ModelMode::SOnInvRep: return "son_invrep";
    case ModelMode::SLnElliptic: return "sln_elliptic";
    case ModelMode::SLnHyperbolic: return "sln_hyperbolic";
    case ModelMode::SLnParabolic: return "sln_parabolic";
  }
  return "?";
}

inline ModelMode mode_from_name(const std::string& s) {
  for (const ModelMode m : {ModelMode::So3Canonical, ModelMode::SOnInvRep, ModelMode::SLnElliptic,
                            ModelMode::SLnHyperbolic, ModelMode::SLnParabolic})
    if (s == mode_name(m)) return m;
  throw std::invalid_argument("unknown model mode: " + s);
}

inline Family family_of(ModelMode m) {
  switch (m) {
    case ModelMode::SLnHyperbolic: return Family::Hyperbolic;
    case ModelMode::SLnParabolic: return Family::Parabolic;
    default: return Family::Elliptic;
  }
}

/// Learnable H-gamma network: orientation A = exp(skew(theta)) (always in
/// SO(n) by construction), rates lambda = [1, exp(rho_1), ...] with the first
/// rate frozen, and an MLP phi over the canonical representation.
struct HGammaModel {
  int n = 0;
  ModelMode mode = ModelMode::SOnInvRep;
  SkewParams skew;
  Vec log_rates;  // floor(n/2) - 1 entries
  MlpParams mlp;
  bool equivariant = false;

  static HGammaModel init(int n, ModelMode mode, int out_dim, int hidden_width, Rng& rng,
                          bool equivariant = false) {
    if (n < 2) throw std::invalid_argument("HGammaModel: n must be >= 2");
    if (mode == ModelMode::So3Canonical && n != 3)
      throw std::invalid_argument("HGammaModel: So3Canonical requires n = 3");
    if (family_of(mode) != Family::Elliptic && n % 2 != 0)
      throw std::invalid_argument("HGammaModel: non-elliptic modes require even n");
    HGammaModel m;
    m.n = n;
    m.mode = mode;
    m.equivariant = equivariant;
    m.skew = SkewParams::zeros(n);
    for (double& t : m.skew.theta) t = rng.uniform(-1e-2, 1e-2);
    m.log_rates.assign(n / 2 > 0 ? n / 2 - 1 : 0, 0.0);
    const int feat_dim = mode == ModelMode::So3Canonical ? 2 : n;
    m.mlp = MlpParams::init({feat_dim, hidden_width, hidden_width, hidden_width, out_dim}, rng);
    return m;
  }

  Mat orientation() const { return exp_skew(skew_from_params(skew)); }

  Vec lambda() const {
    Vec l(log_rates.size() + 1);
    l[0] = 1.0;
    for (size_t i = 0; i < log_rates.size(); ++i) l[i + 1] = std::exp(log_rates[i]);
    return l;
  }

  SubgroupSpec subgroup_spec() const {
    return SubgroupSpec{n, orientation(), lambda(), family_of(mode)};
  }

  int out_dim() const { return mlp.layer_dims.back(); }

  // -- flat parameter view: [theta | rho | W0 b0 W1 b1 ...] ------------------

  size_t param_count() const {
    size_t c = skew.theta.size() + log_rates.size();
    for (size_t k = 0; k < mlp.w.size(); ++k) c += mlp.w[k].data().size() + mlp.b[k].size();
    return c;
  }

  Vec get_params() const {
    Vec out;
    out.reserve(param_count());
    out.insert(out.end(), skew.theta.begin(), skew.theta.end());
    out.insert(out.end(), log_rates.begin(), log_rates.end());
    for (size_t k = 0; k < mlp.w.size(); ++k) {
      out.insert(out.end(), mlp.w[k].data().begin(), mlp.w[k].data().end());
      out.insert(out.end(), mlp.b[k].begin(), mlp.b[k].end());
    }
    return out;
  }

  void set_params(const Vec& flat) {
    if (flat.size() != param_count()) throw std::invalid_argument("set_params: size mismatch");
    size_t i = 0;
    for (double& t : skew.theta) t = flat[i++];
    for (double& r : log_rates) r = flat[i++];
    for (size_t k = 0; k < mlp.w.size(); ++k) {
      for (double& x : mlp.w[k].data()) x = flat[i++];
      for (double& x : mlp.b[k]) x = flat[i++];
    }
  }
};

inline Vec model_features(const HGammaModel& m, const Vec& x) {
  const Mat a = m.orientation();
  if (m.mode == ModelMode::So3Canonical) {
    const Vec v = matvec_t(a, x);
    return Vec{v[0] * v[0] + v[1] * v[1], v[2]};
  }
  const SubgroupSpec spec{m.n, a, m.lambda(), family_of(m.mode)};
  return inv_rep_family(x, spec).rep;
}

inline Vec predict(const HGammaModel& m, const Vec& x) {
  if (static_cast<int>(x.size()) != m.n) throw std::invalid_argument("predict: dim mismatch");
  return mlp_eval(m.mlp, model_features(m, x));
}

/// Equivariant head: rotates the two output coordinates of phi by the pivot
/// angle recovered from x (Psi(x) = R(t0 * lambda_1) phi(invRep(x))).
inline Vec predict_equivariant(const HGammaModel& m, const Vec& x) {
  if (m.mode != ModelMode::SOnInvRep)
    throw std::invalid_argument("predict_equivariant: requires SOnInvRep mode");
  if (m.out_dim() != 2)
    throw std::invalid_argument("predict_equivariant: phi output dim must be 2");
  const SubgroupSpec spec = m.subgroup_spec();
  const InvRepOutput r = inv_rep(x, spec);
  const Vec phi = mlp_eval(m.mlp, r.rep);
  const double c = std::cos(r.t0), s = std::sin(r.t0);
  return Vec{c * phi[0] - s * phi[1], s * phi[0] + c * phi[1]};
}

// ---------------------------------------------------------------------------
// Joint loss and training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 100;
  double lr = 1e-3;
  int batch_size = 64;
  std::uint64_t seed = 0;
  // Step-size multiplier for the log-rates. Rates see mostly gradient noise
  // on tasks whose symmetry holds for every rate value, and Adam walks such
  // coordinates at full speed; a smaller step keeps them near their init
  // while still leaving room to reach zero rates where the data demands it.
  double rate_lr_scale = 0.1;
  // Loss is mean squared error; kept explicit for the record.
  enum class Loss { MSE } loss = Loss::MSE;
};

struct BatchResult {
  double loss = 0.0;
  Vec grads;  // flat layout matching HGammaModel::get_params
};

struct LossWorkspace {
  MlpGrads mlp_grads;
};

/// Mean squared error over a batch with gradients for skew, log-rates, and
/// MLP weights, all through one recorded tape.
inline BatchResult loss_batch(const HGammaModel& m, const std::vector<Vec>& xs,
                              const std::vector<Vec>& ys, size_t begin, size_t end) {
  if (begin >= end || end > xs.size()) throw std::invalid_argument("loss_batch: empty batch");
  const size_t bsz = end - begin;
  const double weight = 1.0 / (static_cast<double>(bsz) * m.out_dim());

  Tape tape;
  MlpGrads mg = MlpGrads::zeros_like(m.mlp);
  VecNode theta = make_leaf(m.skew.theta);
  VecNode rho = make_leaf(m.log_rates);
  MatNode a = exp_skew_node(tape, theta, m.n);
  VecNode lambda = rates_node(tape, rho);

  ScalarNode loss = std::make_shared<ScalarSlot>();
  for (size_t i = begin; i < end; ++i) {
    VecNode v = matvec_t_node(tape, a, xs[i]);
    VecNode features;
    ScalarNode t0;
    if (m.mode == ModelMode::So3Canonical) {
      features = so3_features_node(tape, v);
    } else {
      InvRepNodes r = inv_rep_node(tape, v, lambda, family_of(m.mode));
      features = r.rep;
      t0 = r.t0;
    }
    VecNode out = mlp_forward(m.mlp, mg, features, tape);
    if (m.equivariant) {
      if (!t0) throw std::invalid_argument("loss_batch: equivariant head needs invRep mode");
      out = equivariant_head_node(tape, out, t0);
    }
    squared_error_node(tape, out, ys[i], weight, loss);
  }
  backward(tape, loss);

  BatchResult res;
  res.loss = loss->val;
  res.grads.reserve(m.param_count());
  res.grads.insert(res.grads.end(), theta->grad.begin(), theta->grad.end());
  res.grads.insert(res.grads.end(), rho->grad.begin(), rho->grad.end());
  for (size_t k = 0; k < mg.w.size(); ++k) {
    res.grads.insert(res.grads.end(), mg.w[k].data().begin(), mg.w[k].data().end());
    res.grads.insert(res.grads.end(), mg.b[k].begin(), mg.b[k].end());
  }
  return res;
}

inline BatchResult loss_batch(const HGammaModel& m, const std::vector<Vec>& xs,
                              const std::vector<Vec>& ys) {
  return loss_batch(m, xs, ys, 0, xs.size());
}

struct TrainingDiverged : std::runtime_error {
  int epoch;
  explicit TrainingDiverged(int epoch_, const std::string& what) : std::runtime_error(what), epoch(epoch_) {}
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int epochs_run = 0;
};

struct TrainResult {
  HGammaModel model;
  TrainHistory history;
};

inline double eval_mse(const HGammaModel& m, const std::vector<Vec>& xs, const std::vector<Vec>& ys,
                       const std::vector<size_t>& idx) {
  if (idx.empty()) return 0.0;
  double s = 0.0;
  for (const size_t i : idx) {
    const Vec p = m.equivariant ? predict_equivariant(m, xs[i]) : predict(m, xs[i]);
    for (size_t j = 0; j < p.size(); ++j) {
      const double d = p[j] - ys[i][j];
      s += d * d;
    }
  }
  return s / (static_cast<double>(idx.size()) * m.out_dim());
}

/// Shuffled mini-batch Adam over the deterministic 80/20 split. Aborts with
/// TrainingDiverged (epoch and parameter norms in the message) if the loss
/// leaves the reals.
inline TrainResult train(HGammaModel model, const std::vector<Vec>& xs, const std::vector<Vec>& ys,
                         const TrainConfig& cfg) {
  if (xs.empty() || xs.size() != ys.size()) throw std::invalid_argument("train: bad dataset");
  if (cfg.epochs < 1 || cfg.lr < 0.0) throw std::invalid_argument("train: bad config");

  std::vector<size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(cfg.seed, "split"));
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<size_t>(split_rng.uniform_int(0, static_cast<int>(i) - 1))]);
  const size_t train_count = std::max<size_t>(1, xs.size() * 4 / 5);
  std::vector<size_t> train_idx(order.begin(), order.begin() + train_count);
  std::vector<size_t> val_idx(order.begin() + train_count, order.end());

  std::vector<Vec> bx, by;
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Vec params = model.get_params();
  AdamState adam = AdamState::init(params.size(), cfg.lr);
  Vec lr_scale(params.size(), 1.0);
  for (size_t i = 0; i < model.log_rates.size(); ++i)
    lr_scale[model.skew.theta.size() + i] = cfg.rate_lr_scale;
  TrainHistory hist;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = train_idx.size(); i > 1; --i)
      std::swap(train_idx[i - 1],
                train_idx[static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1))]);

    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
      const size_t stop = std::min(train_idx.size(), start + cfg.batch_size);
      bx.clear();
      by.clear();
      for (size_t i = start; i < stop; ++i) {
        bx.push_back(xs[train_idx[i]]);
        by.push_back(ys[train_idx[i]]);
      }
      const BatchResult res = loss_batch(model, bx, by);
      if (!std::isfinite(res.loss)) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ": loss=" << res.loss
            << " |params|=" << norm2(params);
        throw TrainingDiverged(epoch, msg.str());
      }
      epoch_loss += res.loss;
      ++batches;
      adam_step(adam, params, res.grads, lr_scale);
      model.set_params(params);
    }
    hist.train_loss.push_back(epoch_loss / std::max<size_t>(1, batches));
    hist.val_loss.push_back(eval_mse(model, xs, ys, val_idx));
    hist.epochs_run = epoch + 1;
  }
  return TrainResult{std::move(model), std::move(hist)};
}

// ---------------------------------------------------------------------------
// Snapshot serialization: flat key-value text, decimal floats, reload exact.
// ---------------------------------------------------------------------------

namespace detail {
inline void write_floats(std::ostream& os, const Vec& v) {
  os.precision(17);
  for (size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
}
inline Vec read_floats(std::istringstream& is) {
  Vec v;
  double x;
  while (is >> x) v.push_back(x);
  return v;
}
}  // namespace detail

inline void save_model(const HGammaModel& m, std::ostream& os) {
  os << "hgamma_model v1\n";
  os << "n = " << m.n << "\n";
  os << "mode = " << mode_name(m.mode) << "\n";
  os << "equivariant = " << (m.equivariant ? 1 : 0) << "\n";
  os << "skew = ";
  detail::write_floats(os, m.skew.theta);
  os << "\nlog_rates = ";
  detail::write_floats(os, m.log_rates);
  os << "\nlayer_dims =";
  for (const int d : m.mlp.layer_dims) os << " " << d;
  os << "\n";
  for (size_t k = 0; k < m.mlp.w.size(); ++k) {
    os << "w" << k << " = ";
    detail::write_floats(os, m.mlp.w[k].data());
    os << "\nb" << k << " = ";
    detail::write_floats(os, m.mlp.b[k]);
    os << "\n";
  }
}

inline void save_model(const HGammaModel& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_model: cannot open " + path);
  save_model(m, os);
}

inline HGammaModel load_model(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "hgamma_model v1")
    throw std::runtime_error("load_model: bad header");
  HGammaModel m;
  Vec skew_theta, log_rates;
  std::vector<int> dims;
  std::vector<Vec> ws, bs;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    std::istringstream val(line.substr(eq + 1));
    if (key == "n")
      val >> m.n;
    else if (key == "mode") {
      std::string s;
      val >> s;
      m.mode = mode_from_name(s);
    } else if (key == "equivariant") {
      int e = 0;
      val >> e;
      m.equivariant = e != 0;
    } else if (key == "skew")
      skew_theta = detail::read_floats(val);
    else if (key == "log_rates")
      log_rates = detail::read_floats(val);
    else if (key == "layer_dims") {
      int d;
      while (val >> d) dims.push_back(d);
    } else if (key[0] == 'w') {
      ws.push_back(detail::read_floats(val));
    } else if (key[0] == 'b') {
      bs.push_back(detail::read_floats(val));
    }
  }
  if (dims.size() < 2 || ws.size() != dims.size() - 1 || bs.size() != ws.size())
    throw std::runtime_error("load_model: inconsistent layer data");
  m.skew = SkewParams(m.n, std::move(skew_theta));
  m.log_rates = std::move(log_rates);
  m.mlp.layer_dims = dims;
  for (size_t k = 0; k < ws.size(); ++k) {
    m.mlp.w.emplace_back(dims[k + 1], dims[k], std::move(ws[k]));
    m.mlp.b.push_back(std::move(bs[k]));
  }
  return m;
}

inline HGammaModel load_model_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_model: cannot open " + path);
  return load_model(is);
}

}  // namespace hgamma
