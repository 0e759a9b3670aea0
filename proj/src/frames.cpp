#include "glidenav/frames.hpp"

#include <cmath>
#include <string>

#include "glidenav/errors.hpp"

namespace glidenav {

namespace {
constexpr double kPi = std::numbers::pi;
}

double PositionError::horizontal() const { return std::hypot(north, east); }

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

double heading_difference(double to, double from) {
  return wrap_angle(to - from);
}

EulerAngles normalized(const EulerAngles& att) {
  return {wrap_angle(att.roll), att.pitch, wrap_angle(att.yaw)};
}

void check_pitch(double pitch) {
  if (!(std::abs(pitch) < kPitchLimit)) {
    throw GimbalProximity("pitch " + std::to_string(pitch) +
                          " rad is within the gimbal guard margin");
  }
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v(2), v(1),
       v(2), 0.0, -v(0),
       -v(1), v(0), 0.0;
  return s;
}

Mat3 rot_body_to_ned(const EulerAngles& att) {
  check_pitch(att.pitch);
  const double cphi = std::cos(att.roll), sphi = std::sin(att.roll);
  const double cth = std::cos(att.pitch), sth = std::sin(att.pitch);
  const double cpsi = std::cos(att.yaw), spsi = std::sin(att.yaw);

  Mat3 r;
  r << cpsi * cth, -spsi * cphi + cpsi * sth * sphi, spsi * sphi + cpsi * cphi * sth,
       spsi * cth, cpsi * cphi + sphi * sth * spsi, -cpsi * sphi + sth * spsi * cphi,
       -sth, cth * sphi, cth * cphi;
  return r;
}

Mat3 euler_rate_matrix(const EulerAngles& att) {
  check_pitch(att.pitch);
  const double cphi = std::cos(att.roll), sphi = std::sin(att.roll);
  const double cth = std::cos(att.pitch), tth = std::tan(att.pitch);

  Mat3 t;
  t << 1.0, sphi * tth, cphi * tth,
       0.0, cphi, -sphi,
       0.0, sphi / cth, cphi / cth;
  return t;
}

NedPosition dr_step(const NedPosition& chi, const EulerAngles& att,
                    const BodyVelocityRel& vel, double dt) {
  const Vec3 next = chi.vec() + rot_body_to_ned(att) * vel.vec() * dt;
  return NedPosition::from(next);
}

PositionError positioning_error(const NedPosition& est,
                                const NedPosition& truth) {
  return {std::abs(est.north - truth.north), std::abs(est.east - truth.east)};
}

}  // namespace glidenav
