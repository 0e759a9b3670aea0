#pragma once

#include <Eigen/Dense>
#include <numbers>

/**
 * Attitude kinematics and the dead-reckoning integrator.
 *
 * Frames follow the usual marine convention:
 *  - NED (n): x north, y east, z down, local tangent plane.
 *  - Body (b): x forward (surge), y starboard (sway), z down (heave).
 *
 * Euler angles are roll-pitch-yaw applied as R = Rz(yaw) * Ry(pitch) * Rx(roll),
 * mapping body vectors into NED.
 */
namespace glidenav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Distance from +-pi/2 pitch (about 5 deg) at which Euler kinematics are refused.
inline constexpr double kGimbalMargin = 0.0873;
inline constexpr double kPitchLimit = std::numbers::pi / 2.0 - kGimbalMargin;

struct EulerAngles {
  double roll = 0.0;   // phi, rad
  double pitch = 0.0;  // theta, rad
  double yaw = 0.0;    // psi, rad

  Vec3 vec() const { return {roll, pitch, yaw}; }
  static EulerAngles from(const Vec3& v) { return {v(0), v(1), v(2)}; }
};

/// Relative (through-water) body velocity.
struct BodyVelocityRel {
  double u = 0.0;
  double v = 0.0;
  double w = 0.0;

  Vec3 vec() const { return {u, v, w}; }
};

struct NedPosition {
  double north = 0.0;
  double east = 0.0;
  double down = 0.0;

  Vec3 vec() const { return {north, east, down}; }
  static NedPosition from(const Vec3& v) { return {v(0), v(1), v(2)}; }
  bool operator==(const NedPosition&) const = default;
};

/// Absolute north/east positioning error, metres.
struct PositionError {
  double north = 0.0;
  double east = 0.0;

  double horizontal() const;
};

/// Wraps to (-pi, pi].
double wrap_angle(double a);

/// Shortest signed arc from `from` to `to`, in (-pi, pi].
double heading_difference(double to, double from);

/// Wraps roll and yaw to (-pi, pi]; pitch untouched.
EulerAngles normalized(const EulerAngles& att);

/// Throws GimbalProximity when |pitch| >= kPitchLimit.
void check_pitch(double pitch);

/// S(v) with S(v) * y == v.cross(y).
Mat3 skew(const Vec3& v);

Mat3 rot_body_to_ned(const EulerAngles& att);

/// T(roll, pitch): body rates [p q r] -> Euler angle rates.
Mat3 euler_rate_matrix(const EulerAngles& att);

/// One forward-Euler dead-reckoning step: chi + R(att) * vel * dt.
NedPosition dr_step(const NedPosition& chi, const EulerAngles& att,
                    const BodyVelocityRel& vel, double dt);

PositionError positioning_error(const NedPosition& est,
                                const NedPosition& truth);

}  // namespace glidenav
