#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "glidenav/config.hpp"
#include "glidenav/dataset.hpp"
#include "glidenav/simulator.hpp"
#include "glidenav/velocity_net.hpp"

namespace glidenav {

enum class Axis { Surge, Sway };

Axis parse_axis(const std::string& name);  // throws ConfigError
std::string to_string(Axis axis);

// ---------------------------------------------------------------------------
// Simulation

/// Runs the scenario and converts it to a dataset. `current_spec` is a preset
/// name or "north,east". With `noise_free` every sensor error source is off.
/// The full truth log is returned through `truth` when given.
Dataset simulate_dataset(const Config& cfg, ScenarioKind kind, double duration_s,
                         const std::string& current_spec, std::uint64_t seed, bool noise_free,
                         RunLog* truth = nullptr);

// ---------------------------------------------------------------------------
// Training data

struct LabelSeries {
  std::vector<double> value;
  std::vector<bool> valid;
  std::size_t outliers = 0;
};

/// DVL labels for one axis after outlier removal, zero-phase low-pass
/// (forward and backward first-order passes) and Gaussian smoothing. Each run
/// of consecutive valid labels is conditioned on its own.
LabelSeries prepare_labels(const std::vector<SensorRecord>& records, Axis axis,
                           const PreprocessConfig& pre, double sample_rate);

/// Raw-unit episodes: each dataset is cut into consecutive windows of
/// `window` samples (the last one may be shorter). Windows never span files.
/// Each window is preceded by up to `warmup` earlier samples whose mask is 0,
/// so its context is warm when the scored part starts; every label is still
/// scored in exactly one episode.
SequenceBatch make_windows(const std::vector<Dataset>& datasets, Axis axis,
                           const std::vector<std::string>& channels, int window,
                           const PreprocessConfig& pre, int warmup = 0);

SequenceBatch normalize_episodes(const SequenceBatch& raw, const Normalization& norm);

struct TrainOutput {
  TrainResult result;
  Split split;
  std::size_t episodes = 0;
  std::string history_csv;
  std::string summary_json;
};

TrainOutput train_axis(const Config& cfg, const std::vector<Dataset>& datasets, Axis axis,
                       std::uint64_t seed, const ScgCallback& on_iter = {});

// ---------------------------------------------------------------------------
// Dead reckoning

struct Trajectory {
  std::vector<double> t;
  std::vector<NedPosition> est;
  std::vector<NedPosition> truth;
  std::vector<Vec3> velocity;  // body (u, v, w) used for integration
  std::vector<double> label_u;
  std::vector<double> label_v;
  std::vector<bool> label_valid;
};

/// est[0] = start, est[k] = est[k-1] + R(att[k]) * vel[k] * dt.
std::vector<NedPosition> dr_integrate(const NedPosition& start,
                                      const std::vector<EulerAngles>& attitude,
                                      const std::vector<Vec3>& velocity, double dt);

/// Physical-unit predictions of one model over a whole record sequence.
VectorXd predict_axis(const RnnModel& model, const std::vector<SensorRecord>& records);

Trajectory replay(const Dataset& ds, const RnnModel& surge, const RnnModel& sway, double dt,
                  const ReplayConfig& rc);

/// Replay driven by the simulator's true relative velocity and the logged attitude.
Trajectory replay_truth_velocity(const RunLog& log, double dt);

std::string format_trajectory_csv(const Trajectory& traj);
Trajectory parse_trajectory_csv(const std::string& text);  // throws SchemaMismatch

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  std::string label;
  std::vector<double> t;
  std::vector<PositionError> errors;
  double final_north = 0.0;
  double final_east = 0.0;
  double final_horizontal = 0.0;
  double rms_north = 0.0;
  double rms_east = 0.0;
  double distance_traveled = 0.0;  // horizontal truth path length, m
  double velocity_mse_u = 0.0;     // vs. valid DVL labels, (m/s)^2
  double velocity_mse_v = 0.0;
};

EvalReport evaluate(const Trajectory& traj, const std::string& label);

std::string format_report_csv(const EvalReport& r);
std::string format_report_json(const EvalReport& r);
EvalReport parse_report_csv(const std::string& text);  // series and label only

// ---------------------------------------------------------------------------
// Plots (SVG)

/// Positioning error against sample index, north and east panels, one
/// series per report.
std::string plot_errors_svg(const std::vector<EvalReport>& reports);

/// Top-down north/east view of estimated and true tracks.
std::string plot_track_svg(const std::vector<std::pair<std::string, Trajectory>>& tracks);

/// Oblique projection of the 3D estimated and true tracks.
std::string plot_track3d_svg(const std::vector<std::pair<std::string, Trajectory>>& tracks);

}  // namespace glidenav
