#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glidenav/glider_dynamics.hpp"
#include "glidenav/sensor_models.hpp"

namespace glidenav {

enum class ScenarioKind { WingsLevelSawtooth, Spiral, MixedTest, MixedTrain };

ScenarioKind parse_scenario(const std::string& name);  // throws ConfigError
std::string to_string(ScenarioKind kind);

struct ControllerConfig {
  // Pitch loop: pitch error (rad) -> moving-mass position (m).
  PidGains pitch{0.8, 0.005, 1.5, -0.08, 0.08};
  // Heading loop: heading error (rad) -> moving-mass roll (rad).
  PidGains heading{1.5, 0.0, 6.0, -1.2, 1.2};
};

struct ScenarioConfig {
  double sim_dt = 0.1;           // s, dynamics step
  double sample_rate = 2.0;      // Hz, dataset rate
  double seafloor_depth = 120.0; // m, flat bottom for DVL altitude
  double initial_depth = 2.0;    // m
  double depth_top = 20.0;       // m, climb-to-dive switch
  double depth_bottom = 100.0;   // m, dive-to-climb switch
  double pitch_deg = 25.0;
  double vbs_command = 2.0e-3;   // m^3
  double spiral_roll = 0.8;      // rad of moving-mass rotation
  double heading_deg = 45.0;
  double terminal_coast_s = 300.0;

  // Randomized training runs.
  double segment_min_s = 600.0;
  double segment_max_s = 1800.0;
  double current_variation = 0.03;       // m/s, per component
  double current_correlation_s = 1800.0;

  void validate() const;
};

struct SimConfig {
  GliderParams glider = GliderParams::reference();
  SensorParams sensors;
  ControllerConfig controllers;
  ScenarioConfig scenario;
};

/// One logged ground-truth sample (same timestamps as the sensor records).
struct TruthSample {
  double t = 0.0;
  GliderState state;
  ControlInput ctrl;
  double current_north = 0.0;
  double current_east = 0.0;
};

struct ScenarioMeta {
  std::string scenario;
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  double sample_rate = 0.0;
  double sim_dt = 0.0;
  std::string current_preset;
  double current_north = 0.0;
  double current_east = 0.0;
};

struct RunLog {
  ScenarioMeta meta;
  std::vector<SensorRecord> records;
  std::vector<TruthSample> truth;
};

/// Closed-loop simulation of a scenario. Produces floor(duration * rate) samples
/// at t = k / rate. Deterministic in (kind, duration, current, seed, config).
RunLog scenario_generate(ScenarioKind kind, double duration_s, const OceanCurrent& current,
                         std::uint64_t seed, const SimConfig& config);

}  // namespace glidenav
