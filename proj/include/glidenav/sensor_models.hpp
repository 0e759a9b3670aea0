#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <vector>

#include "glidenav/frames.hpp"
#include "glidenav/glider_dynamics.hpp"

namespace glidenav {

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kStandardGravity = 9.80665;

/// MEMS IMU/AHRS error model. Defaults follow a Microstrain 3DM-GX5-25 data sheet.
struct ImuParams {
  Vec3 gyro_bias = Vec3::Zero();   // rad/s, fixed
  Vec3 accel_bias = Vec3::Zero();  // m/s^2, fixed
  double gyro_bias_instability = 8.0 * kDegToRad / 3600.0;     // rad/s
  double accel_bias_instability = 0.04e-3 * kStandardGravity;  // m/s^2
  double bias_correlation_s = 300.0;
  double gyro_noise_density = 0.005 * kDegToRad;        // rad/s/sqrt(Hz)
  double accel_noise_density = 25e-6 * kStandardGravity;  // m/s^2/sqrt(Hz)
  double roll_pitch_rms = 0.25 * kDegToRad;
  double heading_rms = 0.8 * kDegToRad;
  double attitude_correlation_s = 60.0;

  static ImuParams noise_free();
  void validate() const;
};

/// LinkQuest 600 kHz micro DVL.
struct DvlParams {
  double max_altitude = 110.0;  // m
  double min_altitude = 0.3;    // m
  double accuracy = 0.01;       // fraction of speed
  double floor = 0.001;         // m/s
  double ping_rate = 5.0;       // Hz

  static DvlParams noise_free();
  void validate() const;
};

struct PressureParams {
  double noise_pa = 50.0;  // 1-sigma, Pa
};

struct SensorParams {
  ImuParams imu;
  DvlParams dvl;
  PressureParams pressure;

  static SensorParams noise_free();
};

struct ImuTruth {
  EulerAngles attitude;
  Vec3 omega = Vec3::Zero();
  Vec3 specific_force = Vec3::Zero();
};

struct ImuMeasurement {
  EulerAngles attitude;
  Vec3 omega = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

/// Stateful IMU sampler: fixed bias + Gauss-Markov bias drift + white noise on
/// rates and specific force, Gauss-Markov attitude error with the configured RMS.
/// Deterministic for a given seed and call sequence.
class ImuSimulator {
 public:
  ImuSimulator(ImuParams params, std::uint64_t seed, double sample_dt);

  ImuMeasurement sample(const ImuTruth& truth);

 private:
  double draw() { return normal_(rng_); }

  ImuParams params_;
  double dt_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Vec3 gyro_drift_ = Vec3::Zero();
  Vec3 accel_drift_ = Vec3::Zero();
  Vec3 attitude_error_ = Vec3::Zero();
  bool initialized_ = false;
};

struct DepthHeave {
  double depth = 0.0;      // m
  double heave_w_r = 0.0;  // m/s
};

/// Depth from gauge pressure, depth rate by backward difference, and the heave
/// channel as the body-z component of R^T * [0, 0, zdot]. Without a previous
/// depth the rate is taken as zero.
DepthHeave depth_and_heave(double pressure_pa, double density, double gravity,
                           const EulerAngles& att, std::optional<double> prev_depth,
                           double dt);

/// Heave velocity that makes the NED down-rate of R * [u, v, w] equal `zdot`.
double heave_from_depth_rate(double zdot, const EulerAngles& att, double u_r, double v_r);

struct DvlLabel {
  double u_r = 0.0;
  double v_r = 0.0;
  bool valid = false;
};

/// Bottom-locked velocity measurement. Noise is always drawn so the generator
/// advances identically whether or not the ping is valid.
DvlLabel dvl_label(double u_r, double v_r, double altitude, const DvlParams& params,
                   std::mt19937_64& rng);

bool dvl_in_range(double altitude, const DvlParams& params);

/// Zero-phase Gaussian smoothing, kernel truncated at +-4 sigma, edges reflected.
std::vector<double> gaussian_smooth(const std::vector<double>& series, double sigma);

/// Normalized Gaussian kernel of half-width ceil(4 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// First-order IIR low-pass:
///   a = dt / (RC + dt), RC = 1 / (2 pi fc),  y[n] = y[n-1] + a (x[n] - y[n-1]),
/// started at y[-1] = x[0] so the DC gain is exactly one.
std::vector<double> lowpass_filter(const std::vector<double>& series, double cutoff_hz,
                                   double rate_hz);

struct OutlierResult {
  std::vector<double> series;
  std::vector<bool> flagged;
};

/// Hampel filter: a sample is an outlier when it lies more than
/// z * 1.4826 * MAD from the rolling median of its window; outliers are
/// replaced by linear interpolation between the nearest clean neighbours.
OutlierResult remove_outliers(const std::vector<double>& series, double z_threshold,
                              int half_window = 5);

/// One dataset row.
struct SensorRecord {
  double t = 0.0;
  EulerAngles euler;
  Vec3 omega_meas = Vec3::Zero();
  Vec3 accel_meas = Vec3::Zero();
  double depth = 0.0;
  double heave_w_r = 0.0;
  ControlInput ctrl;
  double label_u_r = 0.0;
  double label_v_r = 0.0;
  bool label_valid = false;
  NedPosition truth_pos;
  double current_north = 0.0;
  double current_east = 0.0;
};

}  // namespace glidenav
