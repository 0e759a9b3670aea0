#include "glidenav/nav_pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "glidenav/errors.hpp"
#include "glidenav/io.hpp"
#include "json.hpp"

namespace glidenav {

Axis parse_axis(const std::string& name) {
  if (name == "surge") return Axis::Surge;
  if (name == "sway") return Axis::Sway;
  throw ConfigError("axis must be 'surge' or 'sway', got '" + name + "'");
}

std::string to_string(Axis axis) { return axis == Axis::Surge ? "surge" : "sway"; }

// ---------------------------------------------------------------------------

Dataset simulate_dataset(const Config& cfg, ScenarioKind kind, double duration_s,
                         const std::string& current_spec, std::uint64_t seed, bool noise_free,
                         RunLog* truth) {
  SimConfig sim = cfg.sim;
  if (noise_free) {
    const ImuParams clean = ImuParams::noise_free();
    sim.sensors.imu.gyro_bias_instability = clean.gyro_bias_instability;
    sim.sensors.imu.accel_bias_instability = clean.accel_bias_instability;
    sim.sensors.imu.gyro_noise_density = clean.gyro_noise_density;
    sim.sensors.imu.accel_noise_density = clean.accel_noise_density;
    sim.sensors.imu.roll_pitch_rms = clean.roll_pitch_rms;
    sim.sensors.imu.heading_rms = clean.heading_rms;
    sim.sensors.imu.gyro_bias.setZero();
    sim.sensors.imu.accel_bias.setZero();
    sim.sensors.dvl.accuracy = 0.0;
    sim.sensors.dvl.floor = 0.0;
    sim.sensors.pressure.noise_pa = 0.0;
  }
  const CurrentPreset cur = resolve_current(cfg, current_spec);
  RunLog log = scenario_generate(kind, duration_s, cur.current(), seed, sim);

  Dataset ds;
  ds.meta.scenario = log.meta.scenario;
  ds.meta.seed = seed;
  ds.meta.duration_s = duration_s;
  ds.meta.sample_rate = log.meta.sample_rate;
  ds.meta.sim_dt = log.meta.sim_dt;
  ds.meta.current_preset = cfg.currents.count(current_spec) ? current_spec : "custom";
  ds.meta.current_north = cur.north;
  ds.meta.current_east = cur.east;
  ds.meta.noise_free = noise_free;
  ds.meta.config_hash = config_fingerprint(cfg);
  ds.meta.rows = log.records.size();
  ds.records = log.records;
  if (truth) *truth = std::move(log);
  return ds;
}

// ---------------------------------------------------------------------------

LabelSeries prepare_labels(const std::vector<SensorRecord>& records, Axis axis,
                           const PreprocessConfig& pre, double sample_rate) {
  pre.validate(sample_rate);
  LabelSeries out;
  const std::size_t n = records.size();
  out.value.assign(n, 0.0);
  out.valid.assign(n, false);
  std::size_t i = 0;
  while (i < n) {
    if (!records[i].label_valid) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::vector<double> run;
    while (j < n && records[j].label_valid) {
      run.push_back(axis == Axis::Surge ? records[j].label_u_r : records[j].label_v_r);
      ++j;
    }
    auto cleaned = remove_outliers(run, pre.outlier_z, pre.outlier_half_window);
    out.outliers += static_cast<std::size_t>(
        std::count(cleaned.flagged.begin(), cleaned.flagged.end(), true));
    // Forward then backward pass cancels the first-order phase lag.
    auto s = lowpass_filter(cleaned.series, pre.lowpass_cutoff_hz, sample_rate);
    std::reverse(s.begin(), s.end());
    s = lowpass_filter(s, pre.lowpass_cutoff_hz, sample_rate);
    std::reverse(s.begin(), s.end());
    s = gaussian_smooth(s, pre.gaussian_sigma);
    for (std::size_t k = 0; k < s.size(); ++k) {
      out.value[i + k] = s[k];
      out.valid[i + k] = true;
    }
    i = j;
  }
  return out;
}

SequenceBatch make_windows(const std::vector<Dataset>& datasets, Axis axis,
                           const std::vector<std::string>& channels, int window,
                           const PreprocessConfig& pre, int warmup) {
  if (window < 2) throw ConfigError("training window must hold at least 2 samples");
  if (warmup < 0) throw ConfigError("warmup must be non-negative");
  SequenceBatch out;
  for (const auto& ds : datasets) {
    if (ds.records.empty()) continue;
    const LabelSeries labels = prepare_labels(ds.records, axis, pre, ds.meta.sample_rate);
    const std::size_t n = ds.records.size();
    for (std::size_t start = 0; start < n; start += window) {
      const std::size_t lead = std::min<std::size_t>(warmup, start);
      const std::size_t first = start - lead;
      const std::size_t len = std::min<std::size_t>(window, n - start) + lead;
      Episode ep;
      ep.x.resize(static_cast<Eigen::Index>(channels.size()), static_cast<Eigen::Index>(len));
      ep.y.resize(static_cast<Eigen::Index>(len));
      ep.mask.resize(static_cast<Eigen::Index>(len));
      for (std::size_t k = 0; k < len; ++k) {
        const auto c = static_cast<Eigen::Index>(k);
        ep.x.col(c) = build_input_vector(ds.records[first + k], channels);
        ep.y(c) = labels.value[first + k];
        ep.mask(c) = k >= lead && labels.valid[first + k] ? 1.0 : 0.0;
      }
      out.push_back(std::move(ep));
    }
  }
  return out;
}

SequenceBatch normalize_episodes(const SequenceBatch& raw, const Normalization& norm) {
  SequenceBatch out;
  out.reserve(raw.size());
  for (const auto& e : raw) {
    Episode n;
    n.x = norm.normalize_inputs(e.x);
    n.y = (e.y.array() - norm.out_mean) / norm.out_std;
    n.y = n.y.cwiseProduct(e.mask);  // masked targets carry no information
    n.mask = e.mask;
    out.push_back(std::move(n));
  }
  return out;
}

TrainOutput train_axis(const Config& cfg, const std::vector<Dataset>& datasets, Axis axis,
                       std::uint64_t seed, const ScgCallback& on_iter) {
  cfg.train.validate();
  if (datasets.empty()) throw ConfigError("no training datasets given");
  const double rate = datasets.front().meta.sample_rate;
  for (const auto& ds : datasets) {
    if (ds.meta.sample_rate != rate) throw SchemaMismatch("datasets disagree on sample rate");
  }
  const auto& channels = axis == Axis::Surge ? cfg.surge_channels : cfg.sway_channels;

  const SequenceBatch raw = make_windows(datasets, axis, channels, cfg.train.window, cfg.preprocess,
                                        cfg.train.warmup);
  TrainOutput out;
  out.episodes = raw.size();
  out.split = early_stopping_split(raw.size(), cfg.train, seed);

  std::vector<MatrixXd> xs;
  std::vector<VectorXd> ys, ms;
  for (std::size_t i : out.split.train) {
    xs.push_back(raw[i].x);
    ys.push_back(raw[i].y);
    ms.push_back(raw[i].mask);
  }
  const Normalization norm = normalize_stats(xs, ys, ms);
  const SequenceBatch eps = normalize_episodes(raw, norm);

  std::seed_seq init_seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                         static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(axis == Axis::Surge ? 1 : 2)};
  std::uint32_t init_seed[2];
  init_seq.generate(init_seed, init_seed + 2);
  RnnModel model = RnnModel::random(static_cast<int>(channels.size()), cfg.train.layers,
                                    cfg.train.hidden,
                                    (std::uint64_t{init_seed[0]} << 32) | init_seed[1]);
  model.norm = norm;
  model.channels = channels;
  model.fingerprint = sha256_hex(canonical_config(cfg) + "\naxis = " + to_string(axis) +
                                 "\nseed = " + std::to_string(seed) + "\n");

  spdlog::info("training {} network: {} windows ({} train / {} val / {} test), {} weights",
               to_string(axis), raw.size(), out.split.train.size(), out.split.val.size(),
               out.split.test.size(), model.params.size());
  out.result = scg_train(std::move(model), eps, out.split, cfg.train, on_iter);

  std::ostringstream hist;
  hist << "iteration,train_mse,val_mse,lambda,accepted\n";
  for (const auto& r : out.result.scg.history) {
    hist << r.iteration << ',' << format_double(r.train_error) << ','
         << format_double(r.val_error) << ',' << format_double(r.lambda) << ','
         << (r.accepted ? 1 : 0) << '\n';
  }
  out.history_csv = hist.str();

  const double scale = norm.out_std * norm.out_std;
  nlohmann::ordered_json j;
  j["axis"] = to_string(axis);
  j["seed"] = seed;
  j["channels"] = channels;
  j["episodes"] = raw.size();
  j["split"] = {{"train", out.split.train.size()},
                {"val", out.split.val.size()},
                {"test", out.split.test.size()}};
  j["iterations"] = out.result.scg.iterations;
  j["best_iteration"] = out.result.scg.best_iteration;
  j["stop_reason"] = out.result.scg.stop_reason;
  j["mse_normalized"] = {{"train", out.result.train_mse},
                         {"val", out.result.val_mse},
                         {"test", out.result.test_mse}};
  j["mse_physical_m2_s2"] = {{"train", out.result.train_mse * scale},
                             {"val", out.result.val_mse * scale},
                             {"test", out.result.test_mse * scale}};
  j["fingerprint"] = out.result.model.fingerprint;
  out.summary_json = j.dump(2) + "\n";
  return out;
}

// ---------------------------------------------------------------------------

std::vector<NedPosition> dr_integrate(const NedPosition& start,
                                      const std::vector<EulerAngles>& attitude,
                                      const std::vector<Vec3>& velocity, double dt) {
  if (attitude.size() != velocity.size()) {
    throw LengthMismatch("attitude and velocity series differ in length");
  }
  std::vector<NedPosition> out;
  if (attitude.empty()) return out;
  out.reserve(attitude.size());
  out.push_back(start);
  for (std::size_t k = 1; k < attitude.size(); ++k) {
    out.push_back(dr_step(out.back(), attitude[k],
                          {velocity[k](0), velocity[k](1), velocity[k](2)}, dt));
  }
  return out;
}

VectorXd predict_axis(const RnnModel& model, const std::vector<SensorRecord>& records) {
  const auto& all = all_input_channels();
  for (const auto& ch : model.channels) {
    if (std::find(all.begin(), all.end(), ch) == all.end()) {
      throw SchemaMismatch("model expects unknown input channel '" + ch + "'");
    }
  }
  if (static_cast<int>(model.channels.size()) != model.n_in()) {
    throw SchemaMismatch("model channel list does not match its input width");
  }
  MatrixXd x(model.n_in(), static_cast<Eigen::Index>(records.size()));
  for (std::size_t k = 0; k < records.size(); ++k) {
    x.col(static_cast<Eigen::Index>(k)) = build_input_vector(records[k], model.channels);
  }
  return rnn_forward(model, model.norm.normalize_inputs(x)).y;
}

namespace {

Trajectory base_trajectory(const std::vector<SensorRecord>& records) {
  Trajectory tr;
  for (const auto& r : records) {
    tr.t.push_back(r.t);
    tr.truth.push_back(r.truth_pos);
    tr.label_u.push_back(r.label_u_r);
    tr.label_v.push_back(r.label_v_r);
    tr.label_valid.push_back(r.label_valid);
  }
  return tr;
}

std::vector<EulerAngles> attitudes(const std::vector<SensorRecord>& records) {
  std::vector<EulerAngles> a;
  a.reserve(records.size());
  for (const auto& r : records) a.push_back(r.euler);
  return a;
}

}  // namespace

Trajectory replay(const Dataset& ds, const RnnModel& surge, const RnnModel& sway, double dt,
                  const ReplayConfig& rc) {
  if (ds.records.empty()) throw SchemaMismatch("dataset has no rows to replay");
  if (!(dt > 0.0)) throw ConfigError("replay dt must be positive");
  const VectorXd u = predict_axis(surge, ds.records);
  const VectorXd v = predict_axis(sway, ds.records);

  Trajectory tr = base_trajectory(ds.records);
  tr.velocity.resize(ds.records.size());
  for (std::size_t k = 0; k < ds.records.size(); ++k) {
    const auto& r = ds.records[k];
    const auto i = static_cast<Eigen::Index>(k);
    double w = r.heave_w_r;
    if (rc.heave == "depth_rate") {
      const double zdot =
          k > 0 ? (r.depth - ds.records[k - 1].depth) / (r.t - ds.records[k - 1].t) : 0.0;
      w = heave_from_depth_rate(zdot, r.euler, u(i), v(i));
    }
    tr.velocity[k] = Vec3(u(i), v(i), w);
  }
  tr.est = dr_integrate(ds.records.front().truth_pos, attitudes(ds.records), tr.velocity, dt);
  return tr;
}

Trajectory replay_truth_velocity(const RunLog& log, double dt) {
  if (log.records.empty() || log.truth.size() != log.records.size()) {
    throw LengthMismatch("run log has no aligned truth to replay");
  }
  Trajectory tr = base_trajectory(log.records);
  for (const auto& s : log.truth) tr.velocity.push_back(s.state.nu_r.head<3>());
  tr.est = dr_integrate(log.records.front().truth_pos, attitudes(log.records), tr.velocity, dt);
  return tr;
}

namespace {
const char* kTrajectoryHeader =
    "time_s,est_n_m,est_e_m,est_d_m,truth_n_m,truth_e_m,truth_d_m,u_r_m_s,v_r_m_s,w_r_m_s,"
    "label_u_r_m_s,label_v_r_m_s,label_valid";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    f.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return f;
}
}  // namespace

std::string format_trajectory_csv(const Trajectory& tr) {
  const std::size_t n = tr.t.size();
  if (tr.est.size() != n || tr.truth.size() != n || tr.velocity.size() != n ||
      tr.label_u.size() != n || tr.label_v.size() != n || tr.label_valid.size() != n) {
    throw LengthMismatch("trajectory series differ in length");
  }
  std::string out = std::string(kTrajectoryHeader) + "\n";
  for (std::size_t k = 0; k < n; ++k) {
    const double v[] = {tr.t[k],           tr.est[k].north,   tr.est[k].east,
                        tr.est[k].down,    tr.truth[k].north, tr.truth[k].east,
                        tr.truth[k].down,  tr.velocity[k](0), tr.velocity[k](1),
                        tr.velocity[k](2), tr.label_u[k],     tr.label_v[k]};
    for (double x : v) {
      out += format_double(x);
      out += ',';
    }
    out += tr.label_valid[k] ? "1\n" : "0\n";
  }
  return out;
}

Trajectory parse_trajectory_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kTrajectoryHeader) {
    throw SchemaMismatch("trajectory header does not match the expected columns");
  }
  Trajectory tr;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 13) throw SchemaMismatch("trajectory row has the wrong number of fields");
    double v[13];
    for (int i = 0; i < 13; ++i) v[i] = parse_double_field(f[i]);
    tr.t.push_back(v[0]);
    tr.est.push_back({v[1], v[2], v[3]});
    tr.truth.push_back({v[4], v[5], v[6]});
    tr.velocity.emplace_back(v[7], v[8], v[9]);
    tr.label_u.push_back(v[10]);
    tr.label_v.push_back(v[11]);
    tr.label_valid.push_back(v[12] != 0.0);
  }
  return tr;
}

// ---------------------------------------------------------------------------

EvalReport evaluate(const Trajectory& tr, const std::string& label) {
  const std::size_t n = tr.est.size();
  if (tr.truth.size() != n || tr.t.size() != n) {
    throw LengthMismatch("estimated and true trajectories differ in length");
  }
  if (n == 0) throw LengthMismatch("trajectory is empty");
  EvalReport r;
  r.label = label;
  r.t = tr.t;
  double sn = 0.0, se = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const PositionError e = positioning_error(tr.est[k], tr.truth[k]);
    r.errors.push_back(e);
    sn += e.north * e.north;
    se += e.east * e.east;
    if (k > 0) {
      r.distance_traveled += std::hypot(tr.truth[k].north - tr.truth[k - 1].north,
                                        tr.truth[k].east - tr.truth[k - 1].east);
    }
  }
  r.final_north = r.errors.back().north;
  r.final_east = r.errors.back().east;
  r.final_horizontal = std::hypot(tr.est.back().north - tr.truth.back().north,
                                  tr.est.back().east - tr.truth.back().east);
  r.rms_north = std::sqrt(sn / double(n));
  r.rms_east = std::sqrt(se / double(n));

  double su = 0.0, sv = 0.0, cnt = 0.0;
  if (tr.velocity.size() == n && tr.label_valid.size() == n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (!tr.label_valid[k]) continue;
      su += std::pow(tr.velocity[k](0) - tr.label_u[k], 2);
      sv += std::pow(tr.velocity[k](1) - tr.label_v[k], 2);
      cnt += 1.0;
    }
  }
  r.velocity_mse_u = cnt > 0.0 ? su / cnt : std::numeric_limits<double>::quiet_NaN();
  r.velocity_mse_v = cnt > 0.0 ? sv / cnt : std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::string format_report_csv(const EvalReport& r) {
  std::string out = "# glidenav report " + r.label + "\n";
  out += "sample,time_s,err_n_m,err_e_m,err_h_m\n";
  for (std::size_t k = 0; k < r.errors.size(); ++k) {
    out += std::to_string(k) + ',' + format_double(r.t[k]) + ',' +
           format_double(r.errors[k].north) + ',' + format_double(r.errors[k].east) + ',' +
           format_double(r.errors[k].horizontal()) + '\n';
  }
  return out;
}

std::string format_report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  j["label"] = r.label;
  j["samples"] = r.errors.size();
  j["final_north_error_m"] = r.final_north;
  j["final_east_error_m"] = r.final_east;
  j["final_horizontal_error_m"] = r.final_horizontal;
  j["rms_north_error_m"] = r.rms_north;
  j["rms_east_error_m"] = r.rms_east;
  j["distance_traveled_m"] = r.distance_traveled;
  j["final_error_fraction_of_distance"] =
      num(r.distance_traveled > 0.0 ? r.final_horizontal / r.distance_traveled
                                    : std::numeric_limits<double>::quiet_NaN());
  j["velocity_mse_surge_m2_s2"] = num(r.velocity_mse_u);
  j["velocity_mse_sway_m2_s2"] = num(r.velocity_mse_v);
  return j.dump(2) + "\n";
}

EvalReport parse_report_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  const std::string prefix = "# glidenav report ";
  if (!std::getline(is, line) || line.rfind(prefix, 0) != 0) {
    throw SchemaMismatch("not a glidenav report");
  }
  EvalReport r;
  r.label = line.substr(prefix.size());
  if (!std::getline(is, line) || line != "sample,time_s,err_n_m,err_e_m,err_h_m") {
    throw SchemaMismatch("report header does not match the expected columns");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) throw SchemaMismatch("report row has the wrong number of fields");
    r.t.push_back(parse_double_field(f[1]));
    r.errors.push_back({parse_double_field(f[2]), parse_double_field(f[3])});
  }
  if (!r.errors.empty()) {
    r.final_north = r.errors.back().north;
    r.final_east = r.errors.back().east;
  }
  return r;
}

}  // namespace glidenav
