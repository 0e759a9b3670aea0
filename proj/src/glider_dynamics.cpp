#include "glidenav/glider_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "glidenav/errors.hpp"

namespace glidenav {

namespace {

constexpr double kMaxCondition = 1e12;

// Force and moment about the body origin from one lifting surface.
Vec6 surface_force(const LiftingSurface& s, const Vec6& nu_r, double rho) {
  Vec6 tau = Vec6::Zero();
  if (s.area <= 0.0) return tau;

  const Vec3 r_s(s.x_position, 0.0, 0.0);
  const Vec3 v_local = nu_r.head<3>() + nu_r.tail<3>().cross(r_s);
  const double u = v_local(0);
  const double cross = s.vertical ? v_local(1) : v_local(2);
  const double speed2 = u * u + cross * cross;
  if (speed2 < 1e-24) return tau;
  const double speed = std::sqrt(speed2);

  // Lift coefficient a*sin(alpha)*cos(alpha): slope a near zero incidence,
  // bounded and sign-correct for reversed inflow.
  const double alpha = std::atan2(cross, u);
  const double cl = s.lift_slope * std::sin(alpha) * std::cos(alpha);
  const double cd = s.drag_parasitic + s.drag_induced * cl * cl;
  const double qs = 0.5 * rho * s.area * speed2;
  const double lift = qs * cl;
  const double drag = qs * cd;

  const double ca = u / speed, sa = cross / speed;
  const double fx = -drag * ca + lift * sa;
  const double fn = -drag * sa - lift * ca;  // along +y (fin) or +z (wing)

  Vec3 f = Vec3::Zero();
  f(0) = fx;
  if (s.vertical) {
    f(1) = fn;
  } else {
    f(2) = fn;
  }
  tau.head<3>() = f;
  tau.tail<3>() = r_s.cross(f);
  return tau;
}

}  // namespace

GliderParams GliderParams::reference() {
  GliderParams p;
  p.env = Environment{};

  auto& b = p.body;
  b.mass = 65.0;
  b.inertia = Vec3(0.5, 20.0, 20.0).asDiagonal();
  b.r_cg = Vec3(0.0, 0.0, 0.012);
  b.r_cb = Vec3::Zero();
  b.weight = b.mass * p.env.gravity;
  b.buoyancy0 = b.weight;

  auto& h = p.hydro;
  h.added_mass = (Vec6() << 3.0, 30.0, 30.0, 0.1, 5.0, 5.0).finished().asDiagonal();
  h.linear_damping = (Vec6() << 2.0, 20.0, 20.0, 2.0, 15.0, 15.0).finished().asDiagonal();
  h.quadratic_damping << 5.0, 150.0, 150.0, 0.0, 0.0, 0.0;
  h.wing = {0.0, 0.1, 3.5, 0.02, 0.3, false};
  h.fins = {{-1.0, 0.04, 3.5, 0.01, 0.2, false},
            {-1.0, 0.04, 3.5, 0.01, 0.2, true}};

  p.moving_mass = MovingMassParams{};
  p.actuators = ActuatorLimits{};
  return p;
}

Vec12 GliderState::packed() const {
  Vec12 x;
  x << eta, nu_r;
  return x;
}

GliderState GliderState::unpack(const Vec12& x) {
  return {x.head<6>(), x.tail<6>()};
}

OceanCurrent OceanCurrent::from_components(double north, double east) {
  return {std::hypot(north, east), std::atan2(east, north)};
}

double OceanCurrent::north() const { return speed * std::cos(direction); }
double OceanCurrent::east() const { return speed * std::sin(direction); }

Vec3 current_body(double speed, double direction, double yaw) {
  return {speed * std::cos(direction - yaw), speed * std::sin(direction - yaw), 0.0};
}

Vec3 current_body_derivative(const Vec3& omega, const Vec3& nu_c_b) {
  return -skew(omega) * nu_c_b;
}

Mat6 rigid_body_mass(const RigidBodyParams& body) {
  Mat6 m = Mat6::Zero();
  const Mat3 s_rg = skew(body.r_cg);
  m.topLeftCorner<3, 3>() = body.mass * Mat3::Identity();
  m.topRightCorner<3, 3>() = -body.mass * s_rg;
  m.bottomLeftCorner<3, 3>() = body.mass * s_rg;
  m.bottomRightCorner<3, 3>() = body.inertia;
  return m;
}

Mat6 coriolis_rb(const RigidBodyParams& body, const Vec3& omega) {
  const Mat3 s_w = skew(omega);
  const Mat3 s_rg = skew(body.r_cg);
  Mat6 c;
  c.topLeftCorner<3, 3>() = body.mass * s_w;
  c.topRightCorner<3, 3>() = -body.mass * s_w * s_rg;
  c.bottomLeftCorner<3, 3>() = body.mass * s_rg * s_w;
  c.bottomRightCorner<3, 3>() = -skew(body.inertia * omega);
  return c;
}

Mat6 coriolis_added(const Mat6& added_mass, const Vec6& nu_r) {
  const Vec3 nu1 = nu_r.head<3>();
  const Vec3 nu2 = nu_r.tail<3>();
  const Vec3 a1 = added_mass.topLeftCorner<3, 3>() * nu1 +
                  added_mass.topRightCorner<3, 3>() * nu2;
  const Vec3 a2 = added_mass.bottomLeftCorner<3, 3>() * nu1 +
                  added_mass.bottomRightCorner<3, 3>() * nu2;
  Mat6 c = Mat6::Zero();
  c.topRightCorner<3, 3>() = -skew(a1);
  c.bottomLeftCorner<3, 3>() = -skew(a1);
  c.bottomRightCorner<3, 3>() = -skew(a2);
  return c;
}

Vec6 damping_force(const HydroParams& hydro, const Vec6& nu_r, double water_density) {
  Vec6 tau = -hydro.linear_damping * nu_r;
  tau -= (hydro.quadratic_damping.array() * nu_r.array().abs() * nu_r.array()).matrix();
  tau += surface_force(hydro.wing, nu_r, water_density);
  for (const auto& fin : hydro.fins) tau += surface_force(fin, nu_r, water_density);
  return tau;
}

Vec6 restoring_force(const EulerAngles& att, const RigidBodyParams& body,
                     double vbs, const Environment& env) {
  const Mat3 rt = rot_body_to_ned(att).transpose();
  const double buoyancy = body.buoyancy0 + env.water_density * env.gravity * vbs;
  const Vec3 f_g = rt * Vec3(0.0, 0.0, body.weight);
  const Vec3 f_b = rt * Vec3(0.0, 0.0, -buoyancy);
  Vec6 tau;
  tau.head<3>() = f_g + f_b;
  tau.tail<3>() = body.r_cg.cross(f_g) + body.r_cb.cross(f_b);
  return tau;
}

RigidBodyParams loaded_body(const GliderParams& params, const ControlInput& ctrl) {
  RigidBodyParams body = params.body;
  const auto& mm = params.moving_mass;
  const double radius = mm.roll_radius;
  const Vec3 shift(ctrl.mm_x, radius * std::sin(ctrl.mm_roll),
                   radius * std::cos(ctrl.mm_roll) - radius);
  body.r_cg += (mm.mass / body.mass) * shift;
  return body;
}

MassProperties mass_properties(const GliderParams& params, const ControlInput& ctrl) {
  MassProperties mp;
  mp.body = loaded_body(params, ctrl);
  mp.mass = rigid_body_mass(mp.body) + params.hydro.added_mass;
  mp.vbs = ctrl.vbs;

  Eigen::SelfAdjointEigenSolver<Mat6> eig(mp.mass, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    throw SingularMass("mass matrix is singular or ill-conditioned (eigenvalues " +
                       std::to_string(lo) + " .. " + std::to_string(hi) + ")");
  }
  mp.mass_inverse = mp.mass.inverse();
  return mp;
}

Vec12 dynamics_derivative(const GliderState& state, const MassProperties& mp,
                          const OceanCurrent& current, const GliderParams& params) {
  const EulerAngles att = state.attitude();
  const Mat3 r = rot_body_to_ned(att);
  const Mat3 t = euler_rate_matrix(att);
  const Vec3 omega = state.omega();

  Vec12 dx;
  dx.segment<3>(0) = r * state.nu_r.head<3>() + current.ned();
  dx.segment<3>(3) = t * omega;

  const Vec6 tau = damping_force(params.hydro, state.nu_r, params.env.water_density) +
                   restoring_force(att, mp.body, mp.vbs, params.env);
  const Mat6 c = coriolis_rb(mp.body, omega) +
                 coriolis_added(params.hydro.added_mass, state.nu_r);
  dx.tail<6>() = mp.mass_inverse * (tau - c * state.nu_r);
  return dx;
}

Vec12 dynamics_derivative(const GliderState& state, const ControlInput& ctrl,
                          const OceanCurrent& current, const GliderParams& params) {
  return dynamics_derivative(state, mass_properties(params, ctrl), current, params);
}

GliderState rk4_step(const GliderState& state, const ControlInput& ctrl,
                     const OceanCurrent& current, double dt,
                     const GliderParams& params) {
  if (!(dt > 0.0 && dt <= 1.0)) {
    throw ConfigError("integration step must lie in (0, 1] s, got " + std::to_string(dt));
  }
  const MassProperties mp = mass_properties(params, ctrl);
  const Vec12 x = state.packed();
  auto f = [&](const Vec12& xi) {
    return dynamics_derivative(GliderState::unpack(xi), mp, current, params);
  };
  const Vec12 k1 = f(x);
  const Vec12 k2 = f(x + 0.5 * dt * k1);
  const Vec12 k3 = f(x + 0.5 * dt * k2);
  const Vec12 k4 = f(x + dt * k3);
  GliderState next = GliderState::unpack(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  next.eta(3) = wrap_angle(next.eta(3));
  next.eta(5) = wrap_angle(next.eta(5));
  return next;
}

Vec3 specific_force(const GliderState& state, const Vec12& derivative,
                    const Environment& env) {
  const Vec3 v = state.nu_r.head<3>();
  const Vec3 vdot = derivative.segment<3>(6);
  const Mat3 rt = rot_body_to_ned(state.attitude()).transpose();
  return vdot + state.omega().cross(v) - rt * Vec3(0.0, 0.0, env.gravity);
}

double mechanical_energy(const GliderState& state, const MassProperties& mp,
                         const Environment& env) {
  const double kinetic = 0.5 * state.nu_r.dot(mp.mass * state.nu_r);
  const Mat3 r = rot_body_to_ned(state.attitude());
  const double z = state.eta(2);
  const double buoyancy = mp.body.buoyancy0 + env.water_density * env.gravity * mp.vbs;
  const double z_g = z + r.row(2).dot(mp.body.r_cg);
  const double z_b = z + r.row(2).dot(mp.body.r_cb);
  return kinetic - mp.body.weight * z_g + buoyancy * z_b;
}

namespace {
double approach(double from, double to, double max_delta) {
  return from + std::clamp(to - from, -max_delta, max_delta);
}
}  // namespace

ControlInput rate_limit(const ControlInput& current, const ControlInput& command,
                        const ActuatorLimits& lim, double dt) {
  ControlInput out;
  out.vbs = std::clamp(approach(current.vbs, command.vbs, lim.vbs_rate * dt),
                       -lim.vbs_max, lim.vbs_max);
  out.mm_x = std::clamp(approach(current.mm_x, command.mm_x, lim.mm_x_rate * dt),
                        -lim.mm_x_max, lim.mm_x_max);
  out.mm_roll = std::clamp(approach(current.mm_roll, command.mm_roll, lim.mm_roll_rate * dt),
                           -lim.mm_roll_max, lim.mm_roll_max);
  return out;
}

PidController::PidController(PidGains gains, bool angular, bool anti_windup)
    : gains_(gains), angular_(angular), anti_windup_(anti_windup) {}

void PidController::reset() {
  integral_ = 0.0;
  prev_error_ = 0.0;
  has_prev_ = false;
}

double PidController::step(double setpoint, double measurement, double dt) {
  const double error = angular_ ? heading_difference(setpoint, measurement)
                                : setpoint - measurement;
  double derivative = 0.0;
  if (has_prev_) {
    const double de = angular_ ? wrap_angle(error - prev_error_) : error - prev_error_;
    derivative = de / dt;
  }
  prev_error_ = error;
  has_prev_ = true;

  const double candidate = integral_ + error * dt;
  const double unsat = gains_.kp * error + gains_.ki * candidate + gains_.kd * derivative;
  const double out = std::clamp(unsat, gains_.out_min, gains_.out_max);

  const bool pushing_high = unsat > gains_.out_max && gains_.ki * error > 0.0;
  const bool pushing_low = unsat < gains_.out_min && gains_.ki * error < 0.0;
  if (anti_windup_ && (pushing_high || pushing_low)) {
    // Integral frozen; output recomputed from the held state.
    return std::clamp(gains_.kp * error + gains_.ki * integral_ + gains_.kd * derivative,
                      gains_.out_min, gains_.out_max);
  }
  integral_ = candidate;
  return out;
}

}  // namespace glidenav
