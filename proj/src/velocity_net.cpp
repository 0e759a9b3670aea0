#include "glidenav/velocity_net.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "glidenav/errors.hpp"
#include "glidenav/io.hpp"

namespace glidenav {

const std::vector<std::string>& all_input_channels() {
  static const std::vector<std::string> names = {
      "sin_yaw",  "cos_yaw", "roll_rad", "pitch_rad",     "p_rad_s",
      "q_rad_s",  "r_rad_s", "ax_m_s2",  "ay_m_s2",       "az_m_s2",
      "depth_m",  "heave_w_r_m_s", "vbs_m3", "mm_x_m",    "mm_roll_rad"};
  return names;
}

namespace {

double channel_value(const SensorRecord& rec, const std::string& name) {
  if (name == "sin_yaw") return std::sin(rec.euler.yaw);
  if (name == "cos_yaw") return std::cos(rec.euler.yaw);
  if (name == "roll_rad") return rec.euler.roll;
  if (name == "pitch_rad") return rec.euler.pitch;
  if (name == "p_rad_s") return rec.omega_meas(0);
  if (name == "q_rad_s") return rec.omega_meas(1);
  if (name == "r_rad_s") return rec.omega_meas(2);
  if (name == "ax_m_s2") return rec.accel_meas(0);
  if (name == "ay_m_s2") return rec.accel_meas(1);
  if (name == "az_m_s2") return rec.accel_meas(2);
  if (name == "depth_m") return rec.depth;
  if (name == "heave_w_r_m_s") return rec.heave_w_r;
  if (name == "vbs_m3") return rec.ctrl.vbs;
  if (name == "mm_x_m") return rec.ctrl.mm_x;
  if (name == "mm_roll_rad") return rec.ctrl.mm_roll;
  throw ConfigError("unknown input channel '" + name + "'");
}

}  // namespace

VectorXd build_input_vector(const SensorRecord& rec, const std::vector<std::string>& channels) {
  VectorXd x(channels.size());
  for (std::size_t i = 0; i < channels.size(); ++i) x(i) = channel_value(rec, channels[i]);
  return x;
}

VectorXd build_input_vector(const SensorRecord& rec) {
  return build_input_vector(rec, all_input_channels());
}

// ---------------------------------------------------------------------------

VectorXd Normalization::normalize_input(const VectorXd& x) const {
  if (x.size() != in_mean.size()) throw ShapeMismatch("input width does not match normalization");
  return (x - in_mean).cwiseQuotient(in_std);
}

MatrixXd Normalization::normalize_inputs(const MatrixXd& x) const {
  if (x.rows() != in_mean.size()) throw ShapeMismatch("input width does not match normalization");
  return (x.colwise() - in_mean).array().colwise() / in_std.array();
}

VectorXd Normalization::denormalize_input(const VectorXd& z) const {
  return z.cwiseProduct(in_std) + in_mean;
}

Normalization normalize_stats(const std::vector<MatrixXd>& inputs,
                              const std::vector<VectorXd>& targets,
                              const std::vector<VectorXd>& masks) {
  if (inputs.empty()) throw ConfigError("normalization needs a nonempty training partition");
  if (targets.size() != inputs.size() || masks.size() != inputs.size()) {
    throw LengthMismatch("normalization inputs, targets and masks differ in count");
  }
  const Eigen::Index n_in = inputs.front().rows();
  if (inputs.front().cols() == 0) throw ConfigError("first training episode is empty");
  // Sums are taken about the first sample so a constant channel has an exact mean.
  const VectorXd ref = inputs.front().col(0);
  VectorXd sum = VectorXd::Zero(n_in);
  double count = 0.0, ysum = 0.0, ycount = 0.0;
  for (std::size_t e = 0; e < inputs.size(); ++e) {
    if (inputs[e].rows() != n_in) throw ShapeMismatch("episodes disagree on input width");
    if (targets[e].size() != inputs[e].cols() || masks[e].size() != inputs[e].cols()) {
      throw LengthMismatch("episode targets do not match its inputs");
    }
    sum += (inputs[e].colwise() - ref).rowwise().sum();
    count += static_cast<double>(inputs[e].cols());
    ysum += targets[e].dot(masks[e]);
    ycount += masks[e].sum();
  }
  if (count == 0.0 || ycount == 0.0) throw ConfigError("training partition holds no samples");

  Normalization n;
  n.in_mean = ref + sum / count;
  n.out_mean = ysum / ycount;
  VectorXd sq = VectorXd::Zero(n_in);
  double ysq = 0.0;
  for (std::size_t e = 0; e < inputs.size(); ++e) {
    sq += (inputs[e].colwise() - n.in_mean).rowwise().squaredNorm();
    ysq += ((targets[e].array() - n.out_mean).square() * masks[e].array()).sum();
  }
  n.in_std = (sq / count).cwiseSqrt().cwiseMax(kStdFloor);
  n.out_std = std::max(std::sqrt(ysq / ycount), kStdFloor);
  return n;
}

// ---------------------------------------------------------------------------

RnnModel::RnnModel(int n_in, int layers, int hidden)
    : params(VectorXd::Zero(param_count(n_in, layers, hidden))),
      n_in_(n_in), layers_(layers), hidden_(hidden) {
  if (n_in < 1 || layers < 1 || hidden < 1) throw ShapeMismatch("network sizes must be positive");
  norm.in_mean = VectorXd::Zero(n_in);
  norm.in_std = VectorXd::Ones(n_in);
  if (n_in == static_cast<int>(all_input_channels().size())) channels = all_input_channels();
}

int RnnModel::param_count(int n_in, int layers, int hidden) {
  const int first = hidden * n_in + kContextTaps * hidden * hidden + hidden;
  const int rest = hidden * hidden + kContextTaps * hidden * hidden + hidden;
  return first + (layers - 1) * rest + hidden + 1;
}

int RnnModel::wx_offset(int k) const {
  if (k == 0) return 0;
  const int first = hidden_ * n_in_ + kContextTaps * hidden_ * hidden_ + hidden_;
  const int rest = hidden_ * hidden_ + kContextTaps * hidden_ * hidden_ + hidden_;
  return first + (k - 1) * rest;
}

int RnnModel::wh_offset(int k, int d) const {
  const int fan = k == 0 ? n_in_ : hidden_;
  return wx_offset(k) + hidden_ * fan + (d - 1) * hidden_ * hidden_;
}

int RnnModel::b_offset(int k) const { return wh_offset(k, kContextTaps + 1); }
int RnnModel::wy_offset() const { return wx_offset(layers_); }
int RnnModel::by_offset() const { return wy_offset() + hidden_; }

RnnModel RnnModel::random(int n_in, int layers, int hidden, std::uint64_t seed) {
  RnnModel m(n_in, layers, hidden);
  std::mt19937_64 rng(seed);
  auto fill = [&](int offset, int count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int i = 0; i < count; ++i) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      m.params(offset + i) = bound * (2.0 * u - 1.0);
    }
  };
  // Context weights stay zero: random ones swamp the feed-forward signal and
  // SCG then spends hundreds of iterations undoing them.
  for (int k = 0; k < layers; ++k) {
    const int fan = k == 0 ? n_in : hidden;
    fill(m.wx_offset(k), m.wh_offset(k, 1) - m.wx_offset(k), fan);
    fill(m.b_offset(k), hidden, fan);
  }
  fill(m.wy_offset(), hidden + 1, hidden);
  return m;
}

RnnContext RnnContext::zeros(const RnnModel& model) {
  RnnContext c;
  c.taps.assign(model.layers(), MatrixXd::Zero(model.hidden(), kContextTaps));
  return c;
}

// ---------------------------------------------------------------------------

namespace {

using ConstMap = Eigen::Map<const MatrixXd>;

struct Weights {
  std::vector<ConstMap> wx;
  std::vector<MatrixXd> wh_stack;  // (taps*H) x H, block d-1 = W_h[d]
  std::vector<Eigen::Map<const VectorXd>> b;
  Eigen::Map<const VectorXd> wy;
  double by;

  Weights(const RnnModel& m, const VectorXd& p)
      : wy(p.data() + m.wy_offset(), m.hidden()), by(p(m.by_offset())) {
    const int h = m.hidden();
    for (int k = 0; k < m.layers(); ++k) {
      const int fan = k == 0 ? m.n_in() : h;
      wx.emplace_back(p.data() + m.wx_offset(k), h, fan);
      MatrixXd st(kContextTaps * h, h);
      for (int d = 1; d <= kContextTaps; ++d) {
        st.middleRows((d - 1) * h, h) = ConstMap(p.data() + m.wh_offset(k, d), h, h);
      }
      wh_stack.push_back(std::move(st));
      b.emplace_back(p.data() + m.b_offset(k), h);
    }
  }
};

// Episodes laid out time-major: column t * B + e holds episode e at step t.
// Short episodes are padded with zero inputs and zero mask after their end,
// which cannot influence earlier steps.
struct Packed {
  int B = 0;
  int T = 0;
  MatrixXd x;
  VectorXd y;
  VectorXd mask;
  double count = 0.0;
};

Packed pack(const SequenceBatch& batch, const std::vector<std::size_t>* index = nullptr) {
  Packed pk;
  std::vector<const Episode*> eps;
  if (index) {
    for (std::size_t i : *index) eps.push_back(&batch.at(i));
  } else {
    for (const auto& e : batch) eps.push_back(&e);
  }
  if (eps.empty()) throw ConfigError("empty sequence batch");
  const Eigen::Index n_in = eps.front()->x.rows();
  pk.B = static_cast<int>(eps.size());
  for (const Episode* e : eps) {
    if (e->x.rows() != n_in) throw ShapeMismatch("episodes disagree on input width");
    if (e->y.size() != e->x.cols() || e->mask.size() != e->x.cols()) {
      throw LengthMismatch("episode targets do not match its inputs");
    }
    pk.T = std::max(pk.T, static_cast<int>(e->x.cols()));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(pk.T) * pk.B;
  pk.x = MatrixXd::Zero(n_in, n);
  pk.y = VectorXd::Zero(n);
  pk.mask = VectorXd::Zero(n);
  for (int e = 0; e < pk.B; ++e) {
    const Episode& ep = *eps[e];
    for (Eigen::Index t = 0; t < ep.x.cols(); ++t) {
      const Eigen::Index c = t * pk.B + e;
      pk.x.col(c) = ep.x.col(t);
      pk.y(c) = ep.y(t);
      pk.mask(c) = ep.mask(t);
    }
  }
  pk.count = pk.mask.sum();
  return pk;
}

// Forward pass over a packed batch, keeping every layer's activations.
VectorXd forward_packed(const RnnModel& m, const Weights& w, const MatrixXd& x, int B, int T,
                        std::vector<MatrixXd>& acts, const RnnContext* init = nullptr) {
  const int h = m.hidden();
  if (x.rows() != m.n_in()) throw ShapeMismatch("input width does not match the model");
  acts.resize(m.layers());
  const MatrixXd* in = &x;
  MatrixXd s(kContextTaps * h, B);
  for (int k = 0; k < m.layers(); ++k) {
    MatrixXd z = w.wx[k] * *in;
    z.colwise() += w.b[k];
    if (init) {
      for (int t = 0; t < std::min(T, kContextTaps); ++t) {
        for (int d = t + 1; d <= kContextTaps; ++d) {
          z.middleCols(t * B, B).colwise() +=
              w.wh_stack[k].middleRows((d - 1) * h, h) * init->taps[k].col(d - t - 1);
        }
      }
    }
    MatrixXd& a = acts[k];
    a.resize(h, z.cols());
    for (int t = 0; t < T; ++t) {
      a.middleCols(t * B, B) = z.middleCols(t * B, B).array().tanh();
      if (t + 1 < T) {
        s.noalias() = w.wh_stack[k] * a.middleCols(t * B, B);
        for (int d = 1; d <= kContextTaps && t + d < T; ++d) {
          z.middleCols((t + d) * B, B) += s.middleRows((d - 1) * h, h);
        }
      }
    }
    in = &a;
  }
  VectorXd y = in->transpose() * w.wy;
  y.array() += w.by;
  return y;
}

double loss_packed(const RnnModel& m, const VectorXd& p, const Packed& pk) {
  const Weights w(m, p);
  std::vector<MatrixXd> acts;
  const VectorXd y = forward_packed(m, w, pk.x, pk.B, pk.T, acts);
  return 0.5 * ((y - pk.y).array().square() * pk.mask.array()).sum();
}

double loss_grad_packed(const RnnModel& m, const VectorXd& p, const Packed& pk, VectorXd& grad) {
  const Weights w(m, p);
  const int h = m.hidden();
  const int B = pk.B, T = pk.T;
  const Eigen::Index n = static_cast<Eigen::Index>(T) * B;
  std::vector<MatrixXd> acts;
  const VectorXd y = forward_packed(m, w, pk.x, B, T, acts);
  const VectorXd r = (y - pk.y).cwiseProduct(pk.mask);
  const double loss = 0.5 * r.squaredNorm();

  grad.setZero(p.size());
  const MatrixXd& top = acts.back();
  grad.segment(m.wy_offset(), h).noalias() = top * r;
  grad(m.by_offset()) = r.sum();

  MatrixXd delta = w.wy * r.transpose();  // dE/dh for the top layer
  MatrixXd s(kContextTaps * h, B);
  for (int k = m.layers() - 1; k >= 0; --k) {
    const MatrixXd& a = acts[k];
    MatrixXd wh_t_stack(kContextTaps * h, h);
    for (int d = 1; d <= kContextTaps; ++d) {
      wh_t_stack.middleRows((d - 1) * h, h) = w.wh_stack[k].middleRows((d - 1) * h, h).transpose();
    }
    for (int t = T - 1; t >= 0; --t) {
      auto dt = delta.middleCols(t * B, B);
      dt.array() *= 1.0 - a.middleCols(t * B, B).array().square();
      if (t > 0) {
        s.noalias() = wh_t_stack * dt;
        for (int d = 1; d <= kContextTaps && t - d >= 0; ++d) {
          delta.middleCols((t - d) * B, B) += s.middleRows((d - 1) * h, h);
        }
      }
    }
    const MatrixXd& in = k == 0 ? pk.x : acts[k - 1];
    const int fan = static_cast<int>(in.rows());
    Eigen::Map<MatrixXd>(grad.data() + m.wx_offset(k), h, fan).noalias() = delta * in.transpose();
    for (int d = 1; d <= kContextTaps && d < T; ++d) {
      const Eigen::Index len = n - static_cast<Eigen::Index>(d) * B;
      Eigen::Map<MatrixXd>(grad.data() + m.wh_offset(k, d), h, h).noalias() =
          delta.rightCols(len) * a.leftCols(len).transpose();
    }
    grad.segment(m.b_offset(k), h) = delta.rowwise().sum();
    if (k > 0) delta = w.wx[k].transpose() * delta;
  }
  return loss;
}

}  // namespace

RnnOutput rnn_forward(const RnnModel& model, const MatrixXd& x, const RnnContext& initial) {
  if (static_cast<int>(initial.taps.size()) != model.layers()) {
    throw ShapeMismatch("context does not match the model depth");
  }
  for (const auto& c : initial.taps) {
    if (c.rows() != model.hidden() || c.cols() != kContextTaps) {
      throw ShapeMismatch("context does not match the model width");
    }
  }
  const Weights w(model, model.params);
  std::vector<MatrixXd> acts;
  const int T = static_cast<int>(x.cols());
  RnnOutput out;
  out.y_norm = forward_packed(model, w, x, 1, T, acts, &initial);
  out.y = out.y_norm.unaryExpr([&](double v) { return model.norm.denormalize_target(v); });
  out.context.taps.resize(model.layers());
  for (int k = 0; k < model.layers(); ++k) {
    MatrixXd& c = out.context.taps[k];
    c.resize(model.hidden(), kContextTaps);
    for (int j = 0; j < kContextTaps; ++j) {
      const int t = T - 1 - j;
      c.col(j) = t >= 0 ? MatrixXd(acts[k].col(t)) : MatrixXd(initial.taps[k].col(j - T));
    }
  }
  return out;
}

RnnOutput rnn_forward(const RnnModel& model, const MatrixXd& x) {
  return rnn_forward(model, x, RnnContext::zeros(model));
}

double rnn_loss(const VectorXd& pred, const VectorXd& target) {
  if (pred.size() != target.size()) throw LengthMismatch("prediction and target lengths differ");
  double e = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) e += (pred(i) - target(i)) * (pred(i) - target(i));
  return 0.5 * e;
}

double rnn_loss(const VectorXd& pred, const VectorXd& target, const VectorXd& mask) {
  if (pred.size() != target.size() || mask.size() != pred.size()) {
    throw LengthMismatch("prediction, target and mask lengths differ");
  }
  double e = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    e += mask(i) * (pred(i) - target(i)) * (pred(i) - target(i));
  }
  return 0.5 * e;
}

double batch_loss(const RnnModel& model, const VectorXd& params, const SequenceBatch& batch) {
  return loss_packed(model, params, pack(batch));
}

double batch_loss_gradient(const RnnModel& model, const VectorXd& params,
                           const SequenceBatch& batch, VectorXd& grad) {
  return loss_grad_packed(model, params, pack(batch), grad);
}

VectorXd rnn_gradient(const RnnModel& model, const SequenceBatch& batch) {
  VectorXd g;
  batch_loss_gradient(model, model.params, batch, g);
  return g;
}

double batch_count(const SequenceBatch& batch) {
  double c = 0.0;
  for (const auto& e : batch) c += e.mask.sum();
  return c;
}

double batch_mse(const RnnModel& model, const SequenceBatch& batch) {
  const Packed pk = pack(batch);
  if (pk.count == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 2.0 * loss_packed(model, model.params, pk) / pk.count;
}

// ---------------------------------------------------------------------------

namespace {
constexpr double kLambdaMax = 1e100;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DivergenceError(std::string("non-finite ") + what + " during training");
}
}  // namespace

ScgResult scg_minimize(const Objective& f, VectorXd w, const ScgOptions& opts,
                       const Validation& validation, const ScgCallback& on_iter) {
  const Eigen::Index n = w.size();
  ScgResult res;
  VectorXd g(n), g_new(n), g_probe(n), w_new(n);
  double err = f(w, &g);
  require_finite(err, "error");
  if (!g.allFinite()) throw DivergenceError("non-finite gradient during training");

  VectorXd r = -g;
  VectorXd p = r;
  double lambda = opts.lambda, lambda_bar = 0.0, delta = 0.0;
  bool success = true;

  double best_val = std::numeric_limits<double>::infinity();
  int fails = 0;
  res.w = w;
  auto check_validation = [&](int it) -> double {
    if (!validation) return std::numeric_limits<double>::quiet_NaN();
    const double v = validation(w);
    require_finite(v, "validation error");
    if (v < best_val) {
      best_val = v;
      res.w = w;
      res.best_iteration = it;
      fails = 0;
    } else if (v > best_val) {
      ++fails;
    }
    return v;
  };
  {
    ScgRecord rec{0, err, check_validation(0), lambda, true};
    res.history.push_back(rec);
    if (on_iter) on_iter(rec);
  }

  res.stop_reason = "max_iterations";
  int it = 1;
  for (; it <= opts.max_iterations; ++it) {
    if (r.norm() <= opts.gradient_tolerance) {
      res.stop_reason = "gradient_tolerance";
      break;
    }
    const double p2 = p.squaredNorm();
    if (p2 == 0.0) {
      res.stop_reason = "zero_direction";
      break;
    }
    if (success) {
      const double sigma_k = opts.sigma / std::sqrt(p2);
      f(w + sigma_k * p, &g_probe);
      if (!g_probe.allFinite()) throw DivergenceError("non-finite gradient during training");
      delta = p.dot(g_probe - g) / sigma_k;
    }
    delta += (lambda - lambda_bar) * p2;
    if (delta <= 0.0) {
      lambda_bar = 2.0 * (lambda - delta / p2);
      delta = -delta + lambda * p2;
      lambda = lambda_bar;
    }
    const double mu = p.dot(r);
    const double alpha = mu / delta;
    w_new = w + alpha * p;
    // A trial point that overflows is rejected like any other failed step.
    const double err_new = f(w_new, &g_new);
    const double comparison = std::isfinite(err_new)
                                  ? 2.0 * delta * (err - err_new) / (mu * mu)
                                  : -std::numeric_limits<double>::infinity();

    const bool accepted = comparison >= 0.0 && std::isfinite(comparison);
    if (accepted) {
      if (!g_new.allFinite()) throw DivergenceError("non-finite gradient during training");
      w.swap(w_new);
      err = err_new;
      g.swap(g_new);
      const VectorXd r_new = -g;
      lambda_bar = 0.0;
      success = true;
      if (it % n == 0) {
        p = r_new;
      } else {
        const double beta = (r_new.squaredNorm() - r_new.dot(r)) / mu;
        p = r_new + beta * p;
      }
      r = r_new;
      if (comparison >= 0.75) lambda *= 0.25;
    } else {
      lambda_bar = lambda;
      success = false;
    }
    if (comparison < 0.25 || !std::isfinite(comparison)) {
      lambda += delta * (1.0 - (std::isfinite(comparison) ? comparison : 0.0)) / p2;
    }

    const double val = accepted ? check_validation(it)
                                : (res.history.back().val_error);
    ScgRecord rec{it, err, val, lambda, accepted};
    res.history.push_back(rec);
    if (on_iter) on_iter(rec);
    if (validation && fails >= opts.patience) {
      res.stop_reason = "early_stopping";
      break;
    }
    // No step size makes progress any more, typically at an exact minimum.
    if (lambda > kLambdaMax) {
      res.stop_reason = "lambda_limit";
      break;
    }
  }
  res.iterations = std::min(it, opts.max_iterations);
  res.w_final = w;
  if (!validation) {
    res.w = w;
    res.best_iteration = res.iterations;
  }
  return res;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (train_ratio < 0.0 || val_ratio < 0.0 || test_ratio < 0.0 ||
      std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (!(scg_sigma > 0.0) || !(scg_lambda > 0.0)) throw ConfigError("SCG constants must be positive");
  if (window < 2) throw ConfigError("training window must hold at least 2 samples");
  if (warmup < 0) throw ConfigError("warmup must be non-negative");
  if (layers < 1 || hidden < 1) throw ConfigError("network sizes must be positive");
}

Split early_stopping_split(std::size_t n, const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto n_val = static_cast<std::size_t>(std::llround(cfg.val_ratio * double(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(cfg.test_ratio * double(n)));
  if (n_val + n_test >= n || n_val == 0 || n_test == 0) {
    throw ConfigError("dataset of " + std::to_string(n) +
                      " windows leaves an empty train, validation or test partition");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with a rejection-sampled bounded draw, so the permutation does
  // not depend on the standard library's distribution implementation.
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::uint64_t bound = i + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do v = rng(); while (v >= limit);
    std::swap(idx[i], idx[v % bound]);
  }
  Split s;
  s.val.assign(idx.begin(), idx.begin() + n_val);
  s.test.assign(idx.begin() + n_val, idx.begin() + n_val + n_test);
  s.train.assign(idx.begin() + n_val + n_test, idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

TrainResult scg_train(RnnModel model, const SequenceBatch& episodes, const Split& split,
                      const TrainConfig& cfg, const ScgCallback& on_iter) {
  cfg.validate();
  const Packed train = pack(episodes, &split.train);
  const Packed val = pack(episodes, &split.val);
  if (train.count == 0.0 || val.count == 0.0) {
    throw ConfigError("train or validation partition holds no valid labels");
  }

  ScgOptions opts;
  opts.sigma = cfg.scg_sigma;
  opts.lambda = cfg.scg_lambda;
  opts.max_iterations = cfg.max_epochs;
  opts.patience = cfg.patience;

  const Objective f = [&](const VectorXd& w, VectorXd* grad) {
    return grad ? loss_grad_packed(model, w, train, *grad) : loss_packed(model, w, train);
  };
  const Validation v = [&](const VectorXd& w) {
    return 2.0 * loss_packed(model, w, val) / val.count;
  };
  // Report the training error as a per-sample MSE; the scaling keeps it monotone.
  const ScgCallback cb = [&](const ScgRecord& rec) {
    if (!on_iter) return;
    ScgRecord scaled = rec;
    scaled.train_error = 2.0 * rec.train_error / train.count;
    on_iter(scaled);
  };

  TrainResult out;
  out.scg = scg_minimize(f, model.params, opts, v, cb);
  for (auto& rec : out.scg.history) rec.train_error = 2.0 * rec.train_error / train.count;
  model.params = out.scg.w;
  out.train_mse = 2.0 * loss_packed(model, model.params, train) / train.count;
  out.val_mse = 2.0 * loss_packed(model, model.params, val) / val.count;
  if (!split.test.empty()) {
    const Packed test = pack(episodes, &split.test);
    out.test_mse = test.count > 0.0 ? 2.0 * loss_packed(model, model.params, test) / test.count
                                    : std::numeric_limits<double>::quiet_NaN();
  }
  out.model = std::move(model);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kModelMagic = "glidenav-rnn";
constexpr int kModelVersion = 1;

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw SchemaMismatch("model file: bad number '" + s + "'");
  }
  return v;
}

std::vector<std::string> read_fields(std::istream& is, const std::string& key) {
  std::string line;
  if (!std::getline(is, line)) throw SchemaMismatch("model file truncated before '" + key + "'");
  std::istringstream ls(line);
  std::string k;
  ls >> k;
  if (k != key) throw SchemaMismatch("model file: expected '" + key + "', found '" + k + "'");
  std::vector<std::string> out;
  for (std::string f; ls >> f;) out.push_back(f);
  return out;
}

int read_int(std::istream& is, const std::string& key) {
  const auto f = read_fields(is, key);
  if (f.size() != 1) throw SchemaMismatch("model file: '" + key + "' needs one value");
  try {
    return std::stoi(f[0]);
  } catch (const std::exception&) {
    throw SchemaMismatch("model file: bad integer for '" + key + "'");
  }
}

VectorXd read_vector(std::istream& is, const std::string& key, Eigen::Index n) {
  const auto f = read_fields(is, key);
  if (static_cast<Eigen::Index>(f.size()) != n) {
    throw SchemaMismatch("model file: '" + key + "' has " + std::to_string(f.size()) +
                         " values, expected " + std::to_string(n));
  }
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = parse_double(f[i]);
  return v;
}

}  // namespace

void write_model(std::ostream& os, const RnnModel& m) {
  os << kModelMagic << ' ' << kModelVersion << '\n';
  os << "n_in " << m.n_in() << '\n';
  os << "layers " << m.layers() << '\n';
  os << "hidden " << m.hidden() << '\n';
  os << "taps " << kContextTaps << '\n';
  os << "activation " << m.activation << '\n';
  os << "fingerprint " << (m.fingerprint.empty() ? "-" : m.fingerprint) << '\n';
  os << "channels";
  for (const auto& c : m.channels) os << ' ' << c;
  os << '\n';
  auto vec = [&](const char* key, const VectorXd& v) {
    os << key;
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << fmt(v(i));
    os << '\n';
  };
  vec("in_mean", m.norm.in_mean);
  vec("in_std", m.norm.in_std);
  os << "out_mean " << fmt(m.norm.out_mean) << '\n';
  os << "out_std " << fmt(m.norm.out_std) << '\n';
  os << "params " << m.params.size() << '\n';
  for (Eigen::Index i = 0; i < m.params.size(); ++i) os << fmt(m.params(i)) << '\n';
  os << "end\n";
}

RnnModel read_model(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw SchemaMismatch("model file is empty");
  std::istringstream hs(line);
  std::string magic;
  int version = 0;
  hs >> magic >> version;
  if (magic != kModelMagic) throw SchemaMismatch("not a glidenav model file");
  if (version != kModelVersion) {
    throw SchemaMismatch("unsupported model file version " + std::to_string(version));
  }
  const int n_in = read_int(is, "n_in");
  const int layers = read_int(is, "layers");
  const int hidden = read_int(is, "hidden");
  if (read_int(is, "taps") != kContextTaps) throw SchemaMismatch("model uses a different tap count");
  if (n_in < 1 || layers < 1 || hidden < 1) throw SchemaMismatch("model sizes must be positive");

  RnnModel m(n_in, layers, hidden);
  const auto act = read_fields(is, "activation");
  if (act.size() != 1 || act[0] != "tanh") throw SchemaMismatch("unsupported activation");
  const auto fp = read_fields(is, "fingerprint");
  m.fingerprint = (fp.size() == 1 && fp[0] != "-") ? fp[0] : "";
  m.channels = read_fields(is, "channels");
  if (static_cast<int>(m.channels.size()) != n_in) {
    throw SchemaMismatch("model channel list does not match its input width");
  }
  m.norm.in_mean = read_vector(is, "in_mean", n_in);
  m.norm.in_std = read_vector(is, "in_std", n_in);
  m.norm.out_mean = read_vector(is, "out_mean", 1)(0);
  m.norm.out_std = read_vector(is, "out_std", 1)(0);
  if ((m.norm.in_std.array() <= 0.0).any() || !(m.norm.out_std > 0.0)) {
    throw SchemaMismatch("model normalization has non-positive std");
  }
  if (read_int(is, "params") != m.params.size()) {
    throw SchemaMismatch("model parameter count does not match its shape");
  }
  for (Eigen::Index i = 0; i < m.params.size(); ++i) {
    if (!std::getline(is, line)) throw SchemaMismatch("model file truncated in parameters");
    m.params(i) = parse_double(line);
  }
  if (!std::getline(is, line) || line != "end") throw SchemaMismatch("model file missing 'end'");
  return m;
}

void save_model(const std::string& path, const RnnModel& model) {
  std::ostringstream os;
  write_model(os, model);
  write_file_atomic(path, os.str());
}

RnnModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open model file '" + path + "'");
  return read_model(is);
}

}  // namespace glidenav
