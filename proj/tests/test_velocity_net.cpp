#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "glidenav/errors.hpp"
#include "glidenav/velocity_net.hpp"

using namespace glidenav;

namespace {

RnnModel unit_norm(RnnModel m) {
  m.norm.in_mean = VectorXd::Zero(m.n_in());
  m.norm.in_std = VectorXd::Ones(m.n_in());
  return m;
}

// Fresh models start with zero context weights; most checks need them live.
RnnModel with_context(RnnModel m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(kContextTaps * m.hidden());
  std::uniform_real_distribution<double> u(-bound, bound);
  for (int k = 0; k < m.layers(); ++k) {
    for (int i = m.wh_offset(k, 1); i < m.b_offset(k); ++i) m.params(i) = u(rng);
  }
  return m;
}

SequenceBatch random_batch(int n_in, std::vector<int> lengths, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  SequenceBatch b;
  for (int t : lengths) {
    Episode e;
    e.x = MatrixXd(n_in, t);
    for (Eigen::Index i = 0; i < e.x.size(); ++i) e.x.data()[i] = n(rng);
    e.y = VectorXd(t);
    for (int i = 0; i < t; ++i) e.y(i) = n(rng);
    e.mask = VectorXd::Ones(t);
    b.push_back(std::move(e));
  }
  return b;
}

// Central differences with step `rel_h` relative; `richardson` combines steps h
// and 2h to cancel the second-order truncation term.
double max_fd_error(const RnnModel& m, const SequenceBatch& b, double rel_h = 1e-6,
                    bool richardson = false) {
  const VectorXd g = rnn_gradient(m, b);
  auto central = [&](Eigen::Index i, double h) {
    VectorXd p = m.params;
    p(i) += h;
    const double ep = batch_loss(m, p, b);
    p(i) -= 2 * h;
    const double em = batch_loss(m, p, b);
    return (ep - em) / (2 * h);
  };
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.params.size(); ++i) {
    const double h = rel_h * std::max(1.0, std::abs(m.params(i)));
    double fd = central(i, h);
    if (richardson) fd = (4 * fd - central(i, 2 * h)) / 3;
    worst = std::max(worst, std::abs(fd - g(i)) / std::max(std::abs(g(i)), 1e-3));
  }
  return worst;
}

}  // namespace

TEST(Inputs, HeadingWrapContinuity) {
  SensorRecord a, b;
  a.euler.yaw = std::numbers::pi;
  b.euler.yaw = -std::numbers::pi;
  const VectorXd va = build_input_vector(a), vb = build_input_vector(b);
  EXPECT_NEAR(va(0), vb(0), 1e-15);
  EXPECT_NEAR(va(1), vb(1), 1e-15);
  EXPECT_EQ(va.size(), 15);
  EXPECT_EQ(all_input_channels().size(), 15u);
}

TEST(Inputs, ChannelOrder) {
  SensorRecord r;
  r.euler = {0.1, 0.2, 0.3};
  r.omega_meas = Vec3(1, 2, 3);
  r.accel_meas = Vec3(4, 5, 6);
  r.depth = 7;
  r.heave_w_r = 8;
  r.ctrl = {9, 10, 11};
  VectorXd expected(15);
  expected << std::sin(0.3), std::cos(0.3), 0.1, 0.2, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11;
  EXPECT_EQ(build_input_vector(r), expected);
  const VectorXd sub = build_input_vector(r, {"depth_m", "sin_yaw"});
  EXPECT_EQ(sub, (VectorXd(2) << 7, std::sin(0.3)).finished());
  EXPECT_THROW(build_input_vector(r, {"nope"}), ConfigError);
}

TEST(Normalization, TrainingStatistics) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(3.0, 2.0);
  std::vector<MatrixXd> xs;
  std::vector<VectorXd> ys, ms;
  for (int e = 0; e < 4; ++e) {
    MatrixXd x(3, 50);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    x.row(2).setConstant(4.2);
    xs.push_back(x);
    VectorXd y(50);
    for (int i = 0; i < 50; ++i) y(i) = n(rng);
    ys.push_back(y);
    ms.push_back(VectorXd::Ones(50));
  }
  const Normalization norm = normalize_stats(xs, ys, ms);
  MatrixXd all(3, 200);
  for (int e = 0; e < 4; ++e) all.middleCols(50 * e, 50) = norm.normalize_inputs(xs[e]);
  for (int c = 0; c < 2; ++c) {
    const double mean = all.row(c).mean();
    const double sd = std::sqrt((all.row(c).array() - mean).square().mean());
    EXPECT_LT(std::abs(mean), 1e-10);
    EXPECT_NEAR(sd, 1.0, 1e-10);
  }
  EXPECT_EQ(norm.in_std(2), kStdFloor);
  EXPECT_TRUE(all.row(2).isZero(0.0));
  EXPECT_TRUE(all.allFinite());
  const VectorXd x0 = xs[1].col(7);
  EXPECT_LT((norm.denormalize_input(norm.normalize_input(x0)) - x0).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(norm.denormalize_target(norm.normalize_target(0.731)), 0.731, 1e-12);
}

TEST(Normalization, MaskedTargetsIgnored) {
  std::vector<MatrixXd> xs{MatrixXd::Zero(1, 4)};
  std::vector<VectorXd> ys{(VectorXd(4) << 1, 3, 1000, -1000).finished()};
  std::vector<VectorXd> ms{(VectorXd(4) << 1, 1, 0, 0).finished()};
  const Normalization n = normalize_stats(xs, ys, ms);
  EXPECT_DOUBLE_EQ(n.out_mean, 2.0);
  EXPECT_DOUBLE_EQ(n.out_std, 1.0);
}

TEST(Model, ShapesAndOffsets) {
  const RnnModel m(15, 3, 50);
  EXPECT_EQ(m.params.size(), RnnModel::param_count(15, 3, 50));
  const int l1 = 50 * 15 + 5 * 50 * 50 + 50;
  const int l2 = 50 * 50 + 5 * 50 * 50 + 50;
  EXPECT_EQ(RnnModel::param_count(15, 3, 50), l1 + 2 * l2 + 51);
  EXPECT_EQ(m.wx_offset(0), 0);
  EXPECT_EQ(m.wh_offset(0, 1), 750);
  EXPECT_EQ(m.b_offset(0), 750 + 5 * 2500);
  EXPECT_EQ(m.wx_offset(1), l1);
  EXPECT_EQ(m.wy_offset(), l1 + 2 * l2);
  EXPECT_EQ(m.by_offset(), l1 + 2 * l2 + 50);
}

TEST(Model, RandomInitWithinFanInBound) {
  const RnnModel m = RnnModel::random(15, 2, 8, 42);
  auto span = [&](int from, int to) { return m.params.segment(from, to - from).cwiseAbs(); };
  const double b0 = 1.0 / std::sqrt(15.0), b1 = 1.0 / std::sqrt(8.0);
  EXPECT_LE(span(m.wx_offset(0), m.wh_offset(0, 1)).maxCoeff(), b0);
  EXPECT_GT(span(m.wx_offset(0), m.wh_offset(0, 1)).maxCoeff(), 0.8 * b0);
  EXPECT_LE(span(m.b_offset(0), m.b_offset(0) + 8).maxCoeff(), b0);
  EXPECT_LE(span(m.wx_offset(1), m.wh_offset(1, 1)).maxCoeff(), b1);
  EXPECT_GT(span(m.wx_offset(1), m.wh_offset(1, 1)).maxCoeff(), 0.8 * b1);
  EXPECT_LE(span(m.wy_offset(), m.by_offset() + 1).maxCoeff(), b1);
  for (int k = 0; k < 2; ++k) EXPECT_EQ(span(m.wh_offset(k, 1), m.b_offset(k)).maxCoeff(), 0.0);
  EXPECT_EQ(RnnModel::random(15, 2, 8, 42).params, m.params);
  EXPECT_NE(RnnModel::random(15, 2, 8, 43).params, m.params);
}

TEST(Forward, ZeroWeightsGiveZero) {
  const RnnModel m = unit_norm(RnnModel(4, 2, 5));
  const auto out = rnn_forward(m, MatrixXd::Random(4, 12));
  EXPECT_TRUE(out.y_norm.isZero(0.0));
}

TEST(Forward, HandComputedToyNet) {
  RnnModel m = unit_norm(RnnModel(1, 1, 1));
  const double wx = 0.7, wh[5] = {0.5, -0.3, 0.2, 0.1, -0.05}, b = 0.1, wy = 1.5, by = -0.2;
  m.params(m.wx_offset(0)) = wx;
  for (int d = 1; d <= 5; ++d) m.params(m.wh_offset(0, d)) = wh[d - 1];
  m.params(m.b_offset(0)) = b;
  m.params(m.wy_offset()) = wy;
  m.params(m.by_offset()) = by;
  m.norm.out_mean = 1.0;
  m.norm.out_std = 2.0;
  const double x[3] = {1.0, -2.0, 0.5};
  const double h1 = std::tanh(wx * x[0] + b);
  const double h2 = std::tanh(wx * x[1] + wh[0] * h1 + b);
  const double h3 = std::tanh(wx * x[2] + wh[0] * h2 + wh[1] * h1 + b);
  const auto out = rnn_forward(m, (MatrixXd(1, 3) << x[0], x[1], x[2]).finished());
  const double y[3] = {wy * h1 + by, wy * h2 + by, wy * h3 + by};
  for (int t = 0; t < 3; ++t) {
    EXPECT_NEAR(out.y_norm(t), y[t], 1e-12);
    EXPECT_NEAR(out.y(t), y[t] * 2.0 + 1.0, 1e-12);
  }
}

TEST(Forward, AblatedRecurrenceIsFeedForward) {
  RnnModel m = unit_norm(RnnModel::random(6, 3, 7, 5));
  for (int k = 0; k < 3; ++k) {
    for (int d = 1; d <= kContextTaps; ++d) m.params.segment(m.wh_offset(k, d), 49).setZero();
  }
  const MatrixXd x = MatrixXd::Random(6, 30);
  const auto seq = rnn_forward(m, x);
  for (int t = 0; t < 30; ++t) EXPECT_NEAR(rnn_forward(m, x.col(t)).y_norm(0), seq.y_norm(t), 1e-14);
  // Time-local: permuting columns permutes outputs.
  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  MatrixXd xp(6, 30);
  for (int t = 0; t < 30; ++t) xp.col(t) = x.col(perm[t]);
  const auto permuted = rnn_forward(m, xp);
  for (int t = 0; t < 30; ++t) EXPECT_NEAR(permuted.y_norm(t), seq.y_norm(perm[t]), 1e-14);
}

TEST(Forward, DeterministicAndResumable) {
  const RnnModel m = unit_norm(with_context(RnnModel::random(5, 3, 6, 9), 1));
  const MatrixXd x = MatrixXd::Random(5, 40);
  const auto a = rnn_forward(m, x), b = rnn_forward(m, x);
  EXPECT_EQ(a.y_norm, b.y_norm);
  const auto head = rnn_forward(m, x.leftCols(17));
  const auto tail = rnn_forward(m, x.rightCols(23), head.context);
  EXPECT_LT((tail.y_norm - a.y_norm.tail(23)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_THROW(rnn_forward(m, MatrixXd::Random(4, 3)), ShapeMismatch);
}

TEST(Loss, Examples) {
  const VectorXd p = (VectorXd(3) << 0.5, -1.0, 2.0).finished();
  EXPECT_EQ(rnn_loss(p, p), 0.0);
  EXPECT_DOUBLE_EQ(rnn_loss(VectorXd::Ones(2), VectorXd::Zero(2)), 1.0);
  EXPECT_THROW(rnn_loss(VectorXd::Ones(2), VectorXd::Ones(3)), LengthMismatch);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  VectorXd a(1000), b(1000);
  for (int i = 0; i < 1000; ++i) {
    a(i) = n(rng);
    b(i) = n(rng);
  }
  double naive = 0.0;
  for (int i = 0; i < 1000; ++i) naive += 0.5 * (a(i) - b(i)) * (a(i) - b(i));
  EXPECT_NEAR(rnn_loss(a, b), naive, 1e-12 * naive);
  VectorXd mask = VectorXd::Ones(1000);
  mask.head(500).setZero();
  double masked = 0.0;
  for (int i = 500; i < 1000; ++i) masked += 0.5 * (a(i) - b(i)) * (a(i) - b(i));
  EXPECT_NEAR(rnn_loss(a, b, mask), masked, 1e-12 * masked);
}

TEST(Loss, InvariantUnderEpisodeOrder) {
  const RnnModel m = unit_norm(with_context(RnnModel::random(4, 2, 5, 3), 7));
  SequenceBatch b = random_batch(4, {9, 14, 3, 20}, 8);
  const double e1 = batch_loss(m, m.params, b);
  std::reverse(b.begin(), b.end());
  EXPECT_NEAR(batch_loss(m, m.params, b), e1, 1e-12 * e1);
}

TEST(Gradient, MatchesFiniteDifferences) {
  const SequenceBatch b = random_batch(15, {20, 17, 20}, 21);
  EXPECT_LT(max_fd_error(with_context(RnnModel::random(15, 1, 3, 11), 2), b), 1e-6);
  // Three stacked layers: rounding dominates at h = 1e-6, so use a larger
  // extrapolated step.
  EXPECT_LT(max_fd_error(with_context(RnnModel::random(15, 3, 3, 12), 3), b, 1e-4, true), 1e-6);
}

TEST(Gradient, MaskedSamplesDoNotContribute) {
  const RnnModel m = with_context(RnnModel::random(4, 2, 3, 2), 4);
  SequenceBatch b = random_batch(4, {15}, 3);
  b[0].mask(4) = 0.0;
  b[0].mask(9) = 0.0;
  EXPECT_LT(max_fd_error(m, b), 1e-6);
  SequenceBatch c = b;
  c[0].y(4) += 100.0;
  EXPECT_EQ(rnn_gradient(m, b), rnn_gradient(m, c));
}

TEST(Gradient, ZeroAtPerfectFitAndOutputBiasIsResidualSum) {
  const RnnModel m = unit_norm(with_context(RnnModel::random(3, 2, 4, 6), 5));
  SequenceBatch b = random_batch(3, {12, 7}, 5);
  double residual_sum = 0.0;
  for (const auto& e : b) residual_sum += (rnn_forward(m, e.x).y_norm - e.y).sum();
  EXPECT_NEAR(rnn_gradient(m, b)(m.by_offset()), residual_sum, 1e-12);
  for (auto& e : b) e.y = rnn_forward(m, e.x).y_norm;
  EXPECT_TRUE(rnn_gradient(m, b).isZero(0.0));
}

TEST(Scg, QuadraticConvergesToMinimizer) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  MatrixXd a(10, 10);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  a = a * a.transpose() + MatrixXd::Identity(10, 10);
  VectorXd b(10);
  for (int i = 0; i < 10; ++i) b(i) = n(rng);
  const Objective f = [&](const VectorXd& w, VectorXd* g) {
    if (g) *g = a * w - b;
    return 0.5 * w.dot(a * w) - b.dot(w);
  };
  ScgOptions opts;
  opts.max_iterations = 50;
  const ScgResult r = scg_minimize(f, VectorXd::Zero(10), opts);
  EXPECT_LT((r.w - a.ldlt().solve(b)).norm(), 1e-8);
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    EXPECT_LE(r.history[i].train_error, r.history[i - 1].train_error);
  }
}

TEST(Scg, RosenbrockHistoryMonotone) {
  const Objective f = [](const VectorXd& w, VectorXd* g) {
    const double x = w(0), y = w(1);
    if (g) *g = (VectorXd(2) << -2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x)).finished();
    return (1 - x) * (1 - x) + 100 * (y - x * x) * (y - x * x);
  };
  ScgOptions opts;
  opts.max_iterations = 2000;
  const ScgResult r = scg_minimize(f, (VectorXd(2) << -1.2, 1.0).finished(), opts);
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    ASSERT_LE(r.history[i].train_error, r.history[i - 1].train_error);
  }
  EXPECT_LT((r.w - VectorXd::Ones(2)).norm(), 1e-4);
}

TEST(Scg, NonFiniteErrorThrows) {
  const Objective f = [](const VectorXd&, VectorXd* g) {
    if (g) *g = VectorXd::Ones(1);
    return std::numeric_limits<double>::quiet_NaN();
  };
  EXPECT_THROW(scg_minimize(f, VectorXd::Zero(1), ScgOptions{}), DivergenceError);
}

TEST(Scg, OverflowingTrialIsRejectedNotAccepted) {
  // Finite only on (-1, 1); the first full step lands outside.
  const Objective f = [](const VectorXd& w, VectorXd* g) {
    const double x = w(0);
    if (std::abs(x) >= 1.0) return std::numeric_limits<double>::infinity();
    if (g) *g = (VectorXd(1) << 2 * (x - 0.5) + 1e-3 * x / (1 - x * x)).finished();
    return (x - 0.5) * (x - 0.5) - 5e-4 * std::log(1 - x * x);
  };
  ScgOptions opts;
  opts.lambda = 1e-12;
  opts.max_iterations = 100;
  const ScgResult r = scg_minimize(f, (VectorXd(1) << -0.9).finished(), opts);
  for (const auto& rec : r.history) ASSERT_TRUE(std::isfinite(rec.train_error));
  EXPECT_NEAR(r.w(0), 0.5, 1e-2);
}

TEST(Scg, EarlyStoppingReturnsBestValidationWeights) {
  // Train error keeps falling while validation error bottoms out at w = 1.
  const Objective f = [](const VectorXd& w, VectorXd* g) {
    if (g) *g = (VectorXd(1) << w(0) - 3.0).finished();
    return 0.5 * (w(0) - 3.0) * (w(0) - 3.0);
  };
  const Validation v = [](const VectorXd& w) { return std::abs(w(0) - 1.0); };
  ScgOptions opts;
  opts.patience = 2;
  std::vector<double> seen;
  const ScgResult r = scg_minimize(f, VectorXd::Zero(1), opts, v,
                                   [&](const ScgRecord& rec) { seen.push_back(rec.val_error); });
  EXPECT_EQ(r.stop_reason, "early_stopping");
  const double best = *std::min_element(seen.begin(), seen.end());
  EXPECT_DOUBLE_EQ(v(r.w), best);
}

TEST(Split, SizesDisjointDeterministic) {
  TrainConfig cfg;
  const Split s = early_stopping_split(100, cfg, 7);
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.val.size(), 15u);
  EXPECT_EQ(s.test.size(), 15u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 100u);
  EXPECT_EQ(*all.rbegin(), 99u);
  const Split t = early_stopping_split(100, cfg, 7);
  EXPECT_EQ(s.train, t.train);
  EXPECT_EQ(s.val, t.val);
  EXPECT_NE(early_stopping_split(100, cfg, 8).val, s.val);
  EXPECT_THROW(early_stopping_split(3, cfg, 1), ConfigError);
  cfg.train_ratio = 0.9;
  EXPECT_THROW(early_stopping_split(100, cfg, 1), ConfigError);
}

TEST(Train, SmallProblemImprovesAndHistoryMonotone) {
  // Target is a delayed nonlinear function of the input, learnable with context.
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n;
  SequenceBatch eps;
  for (int e = 0; e < 20; ++e) {
    Episode ep;
    ep.x = MatrixXd(2, 40);
    for (Eigen::Index i = 0; i < ep.x.size(); ++i) ep.x.data()[i] = n(rng);
    ep.y = VectorXd::Zero(40);
    for (int t = 1; t < 40; ++t) ep.y(t) = std::tanh(ep.x(0, t) + 0.5 * ep.x(1, t - 1));
    ep.mask = VectorXd::Ones(40);
    eps.push_back(ep);
  }
  TrainConfig cfg;
  cfg.max_epochs = 300;
  cfg.hidden = 6;
  const Split split = early_stopping_split(eps.size(), cfg, 1);
  const RnnModel m = unit_norm(RnnModel::random(2, 2, 6, 3));
  const double before = batch_mse(m, eps);
  const TrainResult r = scg_train(m, eps, split, cfg);
  EXPECT_LT(r.train_mse, 0.1 * before);
  EXPECT_LT(r.test_mse, 0.2 * before);
  for (std::size_t i = 1; i < r.scg.history.size(); ++i) {
    ASSERT_LE(r.scg.history[i].train_error, r.scg.history[i - 1].train_error);
  }
}

TEST(ModelFile, RoundTrip) {
  RnnModel m = with_context(RnnModel::random(3, 2, 4, 77), 6);
  m.norm.in_mean = (VectorXd(3) << 0.1, -2.5, 1e-300).finished();
  m.norm.in_std = (VectorXd(3) << 1.0 / 3.0, kStdFloor, 7.0).finished();
  m.norm.out_mean = 0.7071067811865476;
  m.norm.out_std = 0.1;
  m.channels = {"roll_rad", "depth_m", "vbs_m3"};
  m.fingerprint = "abc123";
  std::stringstream ss;
  write_model(ss, m);
  const RnnModel r = read_model(ss);
  EXPECT_EQ(r.params, m.params);
  EXPECT_EQ(r.norm.in_mean, m.norm.in_mean);
  EXPECT_EQ(r.norm.in_std, m.norm.in_std);
  EXPECT_EQ(r.norm.out_mean, m.norm.out_mean);
  EXPECT_EQ(r.norm.out_std, m.norm.out_std);
  EXPECT_EQ(r.channels, m.channels);
  EXPECT_EQ(r.fingerprint, m.fingerprint);
  EXPECT_EQ(r.activation, "tanh");
  EXPECT_EQ(r.layers(), 2);
  std::stringstream again;
  write_model(again, r);
  std::stringstream first;
  write_model(first, m);
  EXPECT_EQ(again.str(), first.str());
}

TEST(ModelFile, RejectsCorruptInput) {
  std::stringstream bad("glidenav-rnn 99\n");
  EXPECT_THROW(read_model(bad), SchemaMismatch);
  RnnModel m = unit_norm(RnnModel::random(2, 1, 2, 1));
  m.channels = {"roll_rad", "pitch_rad"};
  std::stringstream ss;
  write_model(ss, m);
  std::string text = ss.str();
  text.resize(text.size() / 2);
  std::stringstream truncated(text);
  EXPECT_THROW(read_model(truncated), SchemaMismatch);
}
