#pragma once

#include <Eigen/Dense>
#include <vector>

#include "glidenav/frames.hpp"

namespace glidenav {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec12 = Eigen::Matrix<double, 12, 1>;

struct Environment {
  double water_density = 1025.0;  // kg/m^3
  double gravity = 9.81;           // m/s^2
};

/// Rigid-body properties about the body origin (centre of buoyancy at rest).
struct RigidBodyParams {
  double mass = 65.0;
  Mat3 inertia = Mat3::Identity();
  Vec3 r_cg = Vec3::Zero();
  Vec3 r_cb = Vec3::Zero();
  double weight = 0.0;     // N
  double buoyancy0 = 0.0;  // N at zero VBS displacement
};

/// A wing or fin. Lift acts normal to the local inflow in the surface's plane
/// (x-z for horizontal surfaces, x-y for vertical fins); drag along the inflow.
struct LiftingSurface {
  double x_position = 0.0;     // m along body x
  double area = 0.0;           // m^2
  double lift_slope = 0.0;     // per rad
  double drag_parasitic = 0.0;
  double drag_induced = 0.0;   // K in Cd = Cd0 + K * Cl^2
  bool vertical = false;
};

struct HydroParams {
  Mat6 added_mass = Mat6::Zero();
  Mat6 linear_damping = Mat6::Zero();
  Vec6 quadratic_damping = Vec6::Zero();
  LiftingSurface wing;
  std::vector<LiftingSurface> fins;
};

/// Internal battery pack: translates along x and rotates about the x axis.
struct MovingMassParams {
  double mass = 10.0;
  double roll_radius = 0.04;  // m, offset below the rotation axis
};

struct ActuatorLimits {
  double vbs_max = 2.0e-3;      // m^3
  double vbs_rate = 1.0e-4;     // m^3/s
  double mm_x_max = 0.08;       // m
  double mm_x_rate = 0.01;      // m/s
  double mm_roll_max = 1.5;     // rad
  double mm_roll_rate = 0.3;    // rad/s
};

struct GliderParams {
  RigidBodyParams body;
  HydroParams hydro;
  MovingMassParams moving_mass;
  ActuatorLimits actuators;
  Environment env;

  /// Seawing-like reference glider: 65 kg, 2 m hull.
  static GliderParams reference();
};

/// eta = [x y z roll pitch yaw], nu_r = [u_r v_r w_r p q r].
struct GliderState {
  Vec6 eta = Vec6::Zero();
  Vec6 nu_r = Vec6::Zero();

  EulerAngles attitude() const { return {eta(3), eta(4), eta(5)}; }
  NedPosition position() const { return {eta(0), eta(1), eta(2)}; }
  Vec3 omega() const { return nu_r.tail<3>(); }
  Vec12 packed() const;
  static GliderState unpack(const Vec12& x);
};

struct ControlInput {
  double vbs = 0.0;      // m^3, positive adds displaced volume
  double mm_x = 0.0;     // m, positive forward
  double mm_roll = 0.0;  // rad, positive rolls starboard-down

  bool operator==(const ControlInput&) const = default;
};

/// Horizontal, irrotational current. `direction` is where the water flows
/// toward, measured from north like a heading.
struct OceanCurrent {
  double speed = 0.0;      // m/s
  double direction = 0.0;  // rad

  static OceanCurrent from_components(double north, double east);
  double north() const;
  double east() const;
  Vec3 ned() const { return {north(), east(), 0.0}; }
};

/// Current in body axes for a level vehicle with heading `yaw`.
Vec3 current_body(double speed, double direction, double yaw);

/// Body-frame rate of change of an inertially fixed current: -S(omega) * nu_c.
Vec3 current_body_derivative(const Vec3& omega, const Vec3& nu_c_b);

Mat6 rigid_body_mass(const RigidBodyParams& body);

/// Velocity-independent rigid-body Coriolis/centripetal matrix (angular rates only).
Mat6 coriolis_rb(const RigidBodyParams& body, const Vec3& omega);

/// Added-mass Coriolis matrix built from the partitions of M_A * nu_r.
Mat6 coriolis_added(const Mat6& added_mass, const Vec6& nu_r);

/// Hydrodynamic damping and lifting-surface forces acting on the vehicle.
Vec6 damping_force(const HydroParams& hydro, const Vec6& nu_r,
                   double water_density = 1025.0);

/// Gravity and buoyancy generalized force acting on the vehicle, body axes.
Vec6 restoring_force(const EulerAngles& att, const RigidBodyParams& body,
                     double vbs, const Environment& env);

/// Body parameters with the centre of gravity shifted by the moving mass.
RigidBodyParams loaded_body(const GliderParams& params, const ControlInput& ctrl);

/// Mass matrix and its factorization for one actuator configuration.
struct MassProperties {
  RigidBodyParams body;
  Mat6 mass;
  Mat6 mass_inverse;
  double vbs = 0.0;
};

/// Throws SingularMass if cond(M) > 1e12.
MassProperties mass_properties(const GliderParams& params, const ControlInput& ctrl);

Vec12 dynamics_derivative(const GliderState& state, const MassProperties& mp,
                          const OceanCurrent& current, const GliderParams& params);
Vec12 dynamics_derivative(const GliderState& state, const ControlInput& ctrl,
                          const OceanCurrent& current, const GliderParams& params);

/// Classical RK4 with the control held over the step. dt in (0, 1].
GliderState rk4_step(const GliderState& state, const ControlInput& ctrl,
                     const OceanCurrent& current, double dt,
                     const GliderParams& params);

/// Body specific force an accelerometer at the origin would sense.
Vec3 specific_force(const GliderState& state, const Vec12& derivative,
                    const Environment& env);

/// Kinetic plus gravitational potential energy (zero current), J.
double mechanical_energy(const GliderState& state, const MassProperties& mp,
                         const Environment& env);

/// Moves `current` toward `command` at no more than `rate * dt`, then clamps.
ControlInput rate_limit(const ControlInput& current, const ControlInput& command,
                        const ActuatorLimits& limits, double dt);

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double out_min = -1.0;
  double out_max = 1.0;
};

class PidController {
 public:
  PidController() = default;
  explicit PidController(PidGains gains, bool angular = false,
                         bool anti_windup = true);

  /// Saturated output. Angular controllers take the shortest-arc error.
  double step(double setpoint, double measurement, double dt);
  void reset();

  double integral() const { return integral_; }
  const PidGains& gains() const { return gains_; }

 private:
  PidGains gains_;
  bool angular_ = false;
  bool anti_windup_ = true;
  double integral_ = 0.0;
  double prev_error_ = 0.0;
  bool has_prev_ = false;
};

}  // namespace glidenav
