#include "glidenav/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include "glidenav/errors.hpp"

namespace glidenav {

namespace {

struct Segment {
  double start = 0.0;
  bool spiral = false;
  double heading = 0.0;
  double pitch = 0.0;
  double vbs = 0.0;
  double roll = 0.0;
  double top = 0.0;
  double bottom = 0.0;
};

enum Stream : std::uint32_t { kSchedule = 1, kImu, kPressure, kDvl, kCurrent };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

// Uniform double in [lo, hi) from the top 53 bits, independent of library
// distribution implementations.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

Segment base_segment(const ScenarioConfig& sc) {
  Segment s;
  s.heading = sc.heading_deg * kDegToRad;
  s.pitch = sc.pitch_deg * kDegToRad;
  s.vbs = sc.vbs_command;
  s.roll = sc.spiral_roll;
  s.top = sc.depth_top;
  s.bottom = sc.depth_bottom;
  return s;
}

std::vector<Segment> build_schedule(ScenarioKind kind, double active_s, const ScenarioConfig& sc,
                                    std::mt19937_64& rng) {
  std::vector<Segment> out;
  const Segment base = base_segment(sc);
  switch (kind) {
    case ScenarioKind::WingsLevelSawtooth:
      out.push_back(base);
      break;
    case ScenarioKind::Spiral: {
      Segment s = base;
      s.spiral = true;
      out.push_back(s);
      break;
    }
    case ScenarioKind::MixedTest: {
      // Spiral, wings-level leg, spiral the other way.
      Segment a = base, b = base, c = base;
      a.spiral = true;
      b.start = active_s / 3.0;
      c.start = 2.0 * active_s / 3.0;
      c.spiral = true;
      c.roll = -base.roll;
      out = {a, b, c};
      break;
    }
    case ScenarioKind::MixedTrain: {
      double t = 0.0;
      while (t < active_s) {
        Segment s;
        s.start = t;
        s.spiral = uniform(rng, 0.0, 1.0) < 0.5;
        s.heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
        s.pitch = uniform(rng, 15.0, 35.0) * kDegToRad;
        s.vbs = uniform(rng, 0.6, 1.0) * sc.vbs_command;
        s.roll = uniform(rng, 0.3, 1.2) * (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
        s.top = uniform(rng, sc.depth_top, sc.depth_top + 15.0);
        s.bottom = uniform(rng, 0.6, 1.0) * sc.depth_bottom;
        if (s.bottom < s.top + 20.0) s.bottom = s.top + 20.0;
        out.push_back(s);
        t += uniform(rng, sc.segment_min_s, sc.segment_max_s);
      }
      break;
    }
  }
  return out;
}

}  // namespace

ScenarioKind parse_scenario(const std::string& name) {
  if (name == "wings_level_sawtooth") return ScenarioKind::WingsLevelSawtooth;
  if (name == "spiral") return ScenarioKind::Spiral;
  if (name == "mixed_test") return ScenarioKind::MixedTest;
  if (name == "mixed_train") return ScenarioKind::MixedTrain;
  throw ConfigError("unknown scenario kind '" + name + "'");
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::WingsLevelSawtooth: return "wings_level_sawtooth";
    case ScenarioKind::Spiral: return "spiral";
    case ScenarioKind::MixedTest: return "mixed_test";
    case ScenarioKind::MixedTrain: return "mixed_train";
  }
  return "unknown";
}

void ScenarioConfig::validate() const {
  if (!(sim_dt > 0.0 && sim_dt <= 1.0)) throw ConfigError("sim_dt must lie in (0, 1] s");
  if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
  const double ratio = 1.0 / (sample_rate * sim_dt);
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
    throw ConfigError("sample interval must be an integer multiple of sim_dt");
  }
  if (!(depth_top < depth_bottom)) throw ConfigError("depth_top must be above depth_bottom");
  if (!(segment_min_s > 0.0 && segment_min_s <= segment_max_s)) {
    throw ConfigError("segment duration bounds are inconsistent");
  }
  if (!(terminal_coast_s >= 0.0)) throw ConfigError("terminal_coast_s must be >= 0");
}

RunLog scenario_generate(ScenarioKind kind, double duration_s, const OceanCurrent& current,
                         std::uint64_t seed, const SimConfig& config) {
  const auto& sc = config.scenario;
  sc.validate();
  config.sensors.dvl.validate();
  if (!(duration_s > 0.0)) throw ConfigError("scenario duration must be positive");

  const double dt = sc.sim_dt;
  const long steps_per_sample = std::lround(1.0 / (sc.sample_rate * dt));
  const long steps_per_ping =
      std::max(1L, std::lround(1.0 / (config.sensors.dvl.ping_rate * dt)));
  const long n_samples = static_cast<long>(std::floor(duration_s * sc.sample_rate + 1e-9));
  const long n_steps = n_samples * steps_per_sample;
  const double sample_dt = 1.0 / sc.sample_rate;
  const double coast_start = std::max(0.0, duration_s - sc.terminal_coast_s);

  auto schedule_rng = make_rng(seed, kSchedule);
  auto pressure_rng = make_rng(seed, kPressure);
  auto dvl_rng = make_rng(seed, kDvl);
  auto current_rng = make_rng(seed, kCurrent);
  ImuSimulator imu(config.sensors.imu, make_rng(seed, kImu)(), sample_dt);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto schedule = build_schedule(kind, coast_start, sc, schedule_rng);
  const auto& env = config.glider.env;

  RunLog log;
  log.meta.scenario = to_string(kind);
  log.meta.seed = seed;
  log.meta.duration_s = duration_s;
  log.meta.sample_rate = sc.sample_rate;
  log.meta.sim_dt = dt;
  log.meta.current_north = current.north();
  log.meta.current_east = current.east();
  log.records.reserve(n_samples);
  log.truth.reserve(n_samples);

  GliderState state;
  state.eta(2) = sc.initial_depth;
  state.eta(5) = wrap_angle(schedule.front().heading);
  ControlInput actuators;
  PidController pitch_pid(config.controllers.pitch, false);
  PidController heading_pid(config.controllers.heading, true);
  bool diving = true;

  const bool varying_current = kind == ScenarioKind::MixedTrain && sc.current_variation > 0.0;
  const double cur_decay = std::exp(-dt / sc.current_correlation_s);
  const double cur_kick = sc.current_variation * std::sqrt(1.0 - cur_decay * cur_decay);
  double dn = 0.0, de = 0.0;
  OceanCurrent cur_now = current;

  DvlLabel last_ping;
  std::optional<double> prev_depth;
  std::size_t seg_idx = 0;

  for (long step = 0; step < n_steps; ++step) {
    const double t = step * dt;
    const bool coasting = t >= coast_start;
    while (seg_idx + 1 < schedule.size() && t >= schedule[seg_idx + 1].start) ++seg_idx;
    const Segment& seg = schedule[seg_idx];

    const EulerAngles att = state.attitude();
    const double depth = state.eta(2);
    ControlInput command;
    if (!coasting) {
      if (diving && depth >= seg.bottom) diving = false;
      if (!diving && depth <= seg.top) diving = true;
      const double pitch_sp = diving ? -seg.pitch : seg.pitch;
      command.vbs = diving ? -seg.vbs : seg.vbs;
      command.mm_x = -pitch_pid.step(pitch_sp, att.pitch, dt);
      if (seg.spiral) {
        command.mm_roll = seg.roll;
      } else {
        // Lift tilts the other way on ascent, so the roll sense flips.
        const double sense = diving ? 1.0 : -1.0;
        command.mm_roll = sense * heading_pid.step(seg.heading, att.yaw, dt);
      }
    } else {
      command.mm_x = -pitch_pid.step(0.0, att.pitch, dt);
    }
    actuators = rate_limit(actuators, command, config.glider.actuators, dt);

    if (step % steps_per_ping == 0) {
      last_ping = dvl_label(state.nu_r(0), state.nu_r(1), sc.seafloor_depth - depth,
                            config.sensors.dvl, dvl_rng);
    }

    if (step % steps_per_sample == 0) {
      const MassProperties mp = mass_properties(config.glider, actuators);
      const Vec12 xdot = dynamics_derivative(state, mp, cur_now, config.glider);
      const ImuMeasurement m =
          imu.sample({att, state.omega(), specific_force(state, xdot, env)});

      const double pressure = env.water_density * env.gravity * depth +
                              config.sensors.pressure.noise_pa * normal(pressure_rng);
      const DepthHeave dh = depth_and_heave(pressure, env.water_density, env.gravity,
                                            m.attitude, prev_depth, sample_dt);
      prev_depth = dh.depth;

      SensorRecord rec;
      rec.t = static_cast<double>(step / steps_per_sample) * sample_dt;
      rec.euler = m.attitude;
      rec.omega_meas = m.omega;
      rec.accel_meas = m.accel;
      rec.depth = dh.depth;
      rec.heave_w_r = dh.heave_w_r;
      rec.ctrl = actuators;
      rec.label_u_r = last_ping.u_r;
      rec.label_v_r = last_ping.v_r;
      rec.label_valid = last_ping.valid;
      rec.truth_pos = state.position();
      rec.current_north = cur_now.north();
      rec.current_east = cur_now.east();
      log.records.push_back(rec);
      log.truth.push_back({rec.t, state, actuators, rec.current_north, rec.current_east});
    }

    state = rk4_step(state, actuators, cur_now, dt, config.glider);

    if (varying_current) {
      dn = cur_decay * dn + cur_kick * normal(current_rng);
      de = cur_decay * de + cur_kick * normal(current_rng);
      cur_now = OceanCurrent::from_components(current.north() + dn, current.east() + de);
    }
  }
  return log;
}

}  // namespace glidenav
