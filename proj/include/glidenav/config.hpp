#pragma once

#include <map>
#include <string>
#include <vector>

#include "glidenav/simulator.hpp"
#include "glidenav/velocity_net.hpp"

namespace glidenav {

/// Label conditioning applied before training.
struct PreprocessConfig {
  double outlier_z = 3.0;
  int outlier_half_window = 5;
  double lowpass_cutoff_hz = 0.2;
  double gaussian_sigma = 3.0;  // samples

  void validate(double sample_rate) const;
};

struct ReplayConfig {
  // "depth_rate": heave solved from the depth rate and the predicted surge/sway.
  // "rotated": heave channel from the dataset (third row of R^T [0 0 zdot]).
  std::string heave = "depth_rate";
};

/// Inertial current components, m/s.
struct CurrentPreset {
  double north = 0.0;
  double east = 0.0;

  OceanCurrent current() const { return OceanCurrent::from_components(north, east); }
};

struct Config {
  SimConfig sim;
  TrainConfig train;
  PreprocessConfig preprocess;
  ReplayConfig replay;
  std::vector<std::string> surge_channels = all_input_channels();
  std::vector<std::string> sway_channels = all_input_channels();
  std::map<std::string, CurrentPreset> currents = default_currents();

  static std::map<std::string, CurrentPreset> default_currents();
  void validate() const;
};

/// Parses sectioned key = value text. Missing keys keep their defaults;
/// unknown sections or keys are a ConfigError.
Config parse_config(const std::string& text);
Config load_config(const std::string& path);  // empty path -> defaults

/// Every setting in a fixed order, in the same format parse_config reads.
std::string canonical_config(const Config& cfg);

/// SHA-256 of the canonical form, so equal settings hash equally however
/// they were written.
std::string config_fingerprint(const Config& cfg);

/// A preset name from the config or an explicit "north,east" pair in m/s.
CurrentPreset resolve_current(const Config& cfg, const std::string& spec);

}  // namespace glidenav
