#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "glidenav/sensor_models.hpp"

namespace glidenav {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kContextTaps = 5;

/// Full input channel set, in dataset order.
const std::vector<std::string>& all_input_channels();

/// Raw (unnormalized) values of the named channels for one record.
VectorXd build_input_vector(const SensorRecord& rec, const std::vector<std::string>& channels);
VectorXd build_input_vector(const SensorRecord& rec);

struct Normalization {
  VectorXd in_mean;
  VectorXd in_std;
  double out_mean = 0.0;
  double out_std = 1.0;

  VectorXd normalize_input(const VectorXd& x) const;
  MatrixXd normalize_inputs(const MatrixXd& x) const;  // one column per sample
  double normalize_target(double y) const { return (y - out_mean) / out_std; }
  double denormalize_target(double y) const { return y * out_std + out_mean; }
  VectorXd denormalize_input(const VectorXd& z) const;
};

inline constexpr double kStdFloor = 1e-8;

/// Per-channel statistics from the training partition. Inputs use every
/// sample, targets only the samples whose mask is nonzero.
Normalization normalize_stats(const std::vector<MatrixXd>& inputs,
                              const std::vector<VectorXd>& targets,
                              const std::vector<VectorXd>& masks);

/// One training/evaluation sequence in normalized units. Columns of `x` are
/// timesteps. `mask` holds 1 where the label counts toward the error, 0 otherwise.
struct Episode {
  MatrixXd x;
  VectorXd y;
  VectorXd mask;
};

using SequenceBatch = std::vector<Episode>;

/// Elman-style network: `layers` tanh hidden layers of `hidden` units, each fed
/// back to itself through kContextTaps delayed copies, linear scalar output.
///
/// Flat parameter order, all matrices column-major:
///   for each hidden layer k: W_x (hidden x fan_in), W_h[1..5] (hidden x hidden), b (hidden)
///   then w_y (hidden), b_y (1)
class RnnModel {
 public:
  RnnModel() = default;
  RnnModel(int n_in, int layers, int hidden);

  /// Feed-forward weights and biases uniform in +-1/sqrt(fan_in), fan_in being
  /// the unit's feed-forward inputs; context weights start at zero.
  static RnnModel random(int n_in, int layers, int hidden, std::uint64_t seed);

  int n_in() const { return n_in_; }
  int layers() const { return layers_; }
  int hidden() const { return hidden_; }
  static int param_count(int n_in, int layers, int hidden);

  VectorXd params;
  Normalization norm;
  std::vector<std::string> channels;
  std::string activation = "tanh";
  std::string fingerprint;

  // Offsets into `params`.
  int wx_offset(int k) const;
  int wh_offset(int k, int d) const;  // d = 1..kContextTaps
  int b_offset(int k) const;
  int wy_offset() const;
  int by_offset() const;

 private:
  int n_in_ = 0;
  int layers_ = 0;
  int hidden_ = 0;
};

/// Per-layer hidden history needed to continue a sequence: for every layer,
/// the last kContextTaps activations, column j holding h(t - 1 - j).
struct RnnContext {
  std::vector<MatrixXd> taps;
  static RnnContext zeros(const RnnModel& model);
};

struct RnnOutput {
  VectorXd y_norm;
  VectorXd y;  // denormalized
  RnnContext context;
};

/// Runs the network over normalized inputs (n_in x T).
RnnOutput rnn_forward(const RnnModel& model, const MatrixXd& x, const RnnContext& initial);
RnnOutput rnn_forward(const RnnModel& model, const MatrixXd& x);

/// E = 0.5 * sum (pred - target)^2.
double rnn_loss(const VectorXd& pred, const VectorXd& target);
double rnn_loss(const VectorXd& pred, const VectorXd& target, const VectorXd& mask);

/// Batch objective in normalized units, with or without the exact BPTT gradient.
double batch_loss(const RnnModel& model, const VectorXd& params, const SequenceBatch& batch);
double batch_loss_gradient(const RnnModel& model, const VectorXd& params,
                           const SequenceBatch& batch, VectorXd& grad);
VectorXd rnn_gradient(const RnnModel& model, const SequenceBatch& batch);

/// Number of masked-in targets in a batch.
double batch_count(const SequenceBatch& batch);

// ---------------------------------------------------------------------------
// Scaled conjugate gradient

struct ScgOptions {
  double sigma = 5e-5;
  double lambda = 5e-7;
  int max_iterations = 2000;
  double gradient_tolerance = 0.0;  // stop when |g| falls below this
  int patience = 6;                 // validation checks without improvement
};

struct ScgRecord {
  int iteration = 0;
  double train_error = 0.0;
  double val_error = 0.0;  // NaN without validation
  double lambda = 0.0;
  bool accepted = false;
};

struct ScgResult {
  VectorXd w;        // best-validation weights (final weights without validation)
  VectorXd w_final;
  int iterations = 0;
  int best_iteration = 0;
  std::string stop_reason;
  std::vector<ScgRecord> history;
};

using Objective = std::function<double(const VectorXd& w, VectorXd* grad)>;
using Validation = std::function<double(const VectorXd& w)>;
using ScgCallback = std::function<void(const ScgRecord&)>;

/// Moller's SCG. A step is taken only when the comparison parameter is
/// non-negative, so the recorded training error never increases.
ScgResult scg_minimize(const Objective& f, VectorXd w0, const ScgOptions& opts,
                       const Validation& validation = {}, const ScgCallback& on_iter = {});

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double train_ratio = 0.70;
  double val_ratio = 0.15;
  double test_ratio = 0.15;
  int patience = 6;
  int max_epochs = 2000;
  double scg_sigma = 5e-5;
  double scg_lambda = 5e-7;
  std::uint64_t seed = 1;
  int window = 500;
  int warmup = 40;  // input-only samples ahead of each window, loss masked
  int layers = 3;
  int hidden = 50;

  void validate() const;
};

struct Split {
  std::vector<std::size_t> train, val, test;
};

/// Random partition of `n` episodes; counts are round(ratio * n) for validation
/// and test, the rest train.
Split early_stopping_split(std::size_t n, const TrainConfig& cfg, std::uint64_t seed);

struct TrainResult {
  RnnModel model;
  ScgResult scg;
  double train_mse = 0.0;  // normalized units, best weights
  double val_mse = 0.0;
  double test_mse = 0.0;
};

/// Trains `model` (weights already initialized, normalization already set) on
/// the episodes selected by `split`.
TrainResult scg_train(RnnModel model, const SequenceBatch& episodes, const Split& split,
                      const TrainConfig& cfg, const ScgCallback& on_iter = {});

/// Mean squared error per masked-in target, normalized units.
double batch_mse(const RnnModel& model, const SequenceBatch& batch);

// ---------------------------------------------------------------------------
// Model file

void write_model(std::ostream& os, const RnnModel& model);
RnnModel read_model(std::istream& is);  // throws SchemaMismatch
void save_model(const std::string& path, const RnnModel& model);
RnnModel load_model(const std::string& path);

}  // namespace glidenav
