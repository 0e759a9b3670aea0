#include "glidenav/sensor_models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "glidenav/errors.hpp"

namespace glidenav {

ImuParams ImuParams::noise_free() {
  ImuParams p;
  p.gyro_bias_instability = 0.0;
  p.accel_bias_instability = 0.0;
  p.gyro_noise_density = 0.0;
  p.accel_noise_density = 0.0;
  p.roll_pitch_rms = 0.0;
  p.heading_rms = 0.0;
  return p;
}

void ImuParams::validate() const {
  const double values[] = {gyro_bias_instability, accel_bias_instability,
                           gyro_noise_density,    accel_noise_density,
                           roll_pitch_rms,        heading_rms};
  for (double v : values) {
    if (!(v >= 0.0)) throw ConfigError("IMU noise parameters must be non-negative");
  }
  if (!(bias_correlation_s > 0.0) || !(attitude_correlation_s > 0.0)) {
    throw ConfigError("IMU correlation times must be positive");
  }
}

DvlParams DvlParams::noise_free() {
  DvlParams p;
  p.accuracy = 0.0;
  p.floor = 0.0;
  return p;
}

void DvlParams::validate() const {
  if (!(min_altitude < max_altitude)) {
    throw ConfigError("DVL min_altitude must be below max_altitude");
  }
  if (!(accuracy >= 0.0) || !(floor >= 0.0)) {
    throw ConfigError("DVL accuracy terms must be non-negative");
  }
  if (!(ping_rate > 0.0)) throw ConfigError("DVL ping rate must be positive");
}

SensorParams SensorParams::noise_free() {
  SensorParams p;
  p.imu = ImuParams::noise_free();
  p.dvl = DvlParams::noise_free();
  p.pressure.noise_pa = 0.0;
  return p;
}

ImuSimulator::ImuSimulator(ImuParams params, std::uint64_t seed, double sample_dt)
    : params_(std::move(params)), dt_(sample_dt), rng_(seed) {
  params_.validate();
}

ImuMeasurement ImuSimulator::sample(const ImuTruth& truth) {
  const Vec3 att_sigma(params_.roll_pitch_rms, params_.roll_pitch_rms, params_.heading_rms);

  auto gauss_markov = [this](Vec3& state, const Vec3& sigma, double tau, bool first) {
    const double a = first ? 0.0 : std::exp(-dt_ / tau);
    const double b = std::sqrt(1.0 - a * a);
    for (int i = 0; i < 3; ++i) state(i) = a * state(i) + b * sigma(i) * draw();
  };

  const bool first = !initialized_;
  initialized_ = true;
  gauss_markov(gyro_drift_, Vec3::Constant(params_.gyro_bias_instability),
               params_.bias_correlation_s, first);
  gauss_markov(accel_drift_, Vec3::Constant(params_.accel_bias_instability),
               params_.bias_correlation_s, first);
  gauss_markov(attitude_error_, att_sigma, params_.attitude_correlation_s, first);

  const double white_scale = 1.0 / std::sqrt(dt_);
  Vec3 gyro_white, accel_white;
  for (int i = 0; i < 3; ++i) gyro_white(i) = params_.gyro_noise_density * white_scale * draw();
  for (int i = 0; i < 3; ++i) accel_white(i) = params_.accel_noise_density * white_scale * draw();

  ImuMeasurement m;
  m.omega = truth.omega + params_.gyro_bias + gyro_drift_ + gyro_white;
  m.accel = truth.specific_force + params_.accel_bias + accel_drift_ + accel_white;
  m.attitude = normalized(EulerAngles::from(truth.attitude.vec() + attitude_error_));
  return m;
}

DepthHeave depth_and_heave(double pressure_pa, double density, double gravity,
                           const EulerAngles& att, std::optional<double> prev_depth,
                           double dt) {
  if (!(density > 0.0) || !(gravity > 0.0)) {
    throw ConfigError("water density and gravity must be positive");
  }
  DepthHeave out;
  out.depth = pressure_pa / (density * gravity);
  const double zdot = (prev_depth && dt > 0.0) ? (out.depth - *prev_depth) / dt : 0.0;
  const Vec3 body = rot_body_to_ned(att).transpose() * Vec3(0.0, 0.0, zdot);
  out.heave_w_r = body(2);
  return out;
}

double heave_from_depth_rate(double zdot, const EulerAngles& att, double u_r, double v_r) {
  check_pitch(att.pitch);
  const double cphi = std::cos(att.roll), sphi = std::sin(att.roll);
  const double cth = std::cos(att.pitch), sth = std::sin(att.pitch);
  return (zdot + sth * u_r - cth * sphi * v_r) / (cth * cphi);
}

bool dvl_in_range(double altitude, const DvlParams& params) {
  return altitude >= params.min_altitude && altitude <= params.max_altitude;
}

DvlLabel dvl_label(double u_r, double v_r, double altitude, const DvlParams& params,
                   std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double n_u = normal(rng), n_v = normal(rng);
  const double f_u = normal(rng), f_v = normal(rng);

  DvlLabel label;
  label.valid = dvl_in_range(altitude, params);
  label.u_r = u_r * (1.0 + params.accuracy * n_u) + params.floor * f_u;
  label.v_r = v_r * (1.0 + params.accuracy * n_v) + params.floor * f_v;
  return label;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("Gaussian sigma must be positive");
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[i + radius] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

std::vector<double> gaussian_smooth(const std::vector<double>& series, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const long n = static_cast<long>(series.size());
  if (n == 0) throw ConfigError("cannot smooth an empty series");
  const long radius = static_cast<long>(kernel.size() / 2);

  // Half-sample symmetric reflection: (c b a | a b c | c b a), period 2n.
  auto reflect = [n](long i) {
    long m = i % (2 * n);
    if (m < 0) m += 2 * n;
    return m < n ? m : 2 * n - 1 - m;
  };

  std::vector<double> out(series.size());
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (long j = -radius; j <= radius; ++j) {
      acc += kernel[j + radius] * series[reflect(i + j)];
    }
    out[i] = acc;
  }
  return out;
}

std::vector<double> lowpass_filter(const std::vector<double>& series, double cutoff_hz,
                                   double rate_hz) {
  if (!(rate_hz > 0.0) || !(cutoff_hz > 0.0) || !(cutoff_hz < rate_hz / 2.0)) {
    throw ConfigError("low-pass cutoff must satisfy 0 < fc < rate/2 (fc=" +
                      std::to_string(cutoff_hz) + ", rate=" + std::to_string(rate_hz) + ")");
  }
  std::vector<double> out(series.size());
  if (series.empty()) return out;
  const double dt = 1.0 / rate_hz;
  const double rc = 1.0 / (2.0 * std::numbers::pi * cutoff_hz);
  const double a = dt / (rc + dt);
  double y = series.front();
  for (std::size_t i = 0; i < series.size(); ++i) {
    y += a * (series[i] - y);
    out[i] = y;
  }
  return out;
}

namespace {
double median_of(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  }
  return m;
}
}  // namespace

OutlierResult remove_outliers(const std::vector<double>& series, double z_threshold,
                              int half_window) {
  if (!(z_threshold > 0.0)) throw ConfigError("outlier threshold must be positive");
  if (half_window < 1) throw ConfigError("outlier window must be at least 3 samples");

  const long n = static_cast<long>(series.size());
  OutlierResult res{series, std::vector<bool>(series.size(), false)};
  std::vector<double> window;
  for (long i = 0; i < n; ++i) {
    const long lo = std::max(0L, i - half_window);
    const long hi = std::min(n - 1, i + half_window);
    window.assign(series.begin() + lo, series.begin() + hi + 1);
    const double med = median_of(window);
    for (double& v : window) v = std::abs(v - med);
    const double mad = median_of(window);
    if (std::abs(series[i] - med) > z_threshold * 1.4826 * mad) res.flagged[i] = true;
  }

  long prev_clean = -1;
  for (long i = 0; i < n; ++i) {
    if (!res.flagged[i]) {
      prev_clean = i;
      continue;
    }
    long next_clean = i + 1;
    while (next_clean < n && res.flagged[next_clean]) ++next_clean;
    if (prev_clean < 0 && next_clean >= n) break;  // nothing clean to anchor on
    if (prev_clean < 0) {
      res.series[i] = series[next_clean];
    } else if (next_clean >= n) {
      res.series[i] = series[prev_clean];
    } else {
      const double f = double(i - prev_clean) / double(next_clean - prev_clean);
      res.series[i] = (1.0 - f) * series[prev_clean] + f * series[next_clean];
    }
  }
  return res;
}

}  // namespace glidenav
