#include "glidenav/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "glidenav/errors.hpp"
#include "glidenav/io.hpp"

namespace glidenav {

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError("'" + key + "': expected a number, got '" + s + "'");
  }
  return v;
}

std::vector<double> to_doubles(const std::string& key, const std::string& s, std::size_t n) {
  const auto items = split_list(s);
  if (items.size() != n) {
    throw ConfigError("'" + key + "': expected " + std::to_string(n) + " comma-separated values");
  }
  std::vector<double> out;
  for (const auto& i : items) out.push_back(to_double(key, i));
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

struct Binding {
  std::string section;
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

void add(std::vector<Binding>& b, const std::string& sec, const std::string& key, double& ref) {
  b.push_back({sec, key, [&ref] { return fmt(ref); },
               [&ref, key](const std::string& s) { ref = to_double(key, s); }});
}

void add(std::vector<Binding>& b, const std::string& sec, const std::string& key, int& ref) {
  b.push_back({sec, key, [&ref] { return std::to_string(ref); },
               [&ref, key](const std::string& s) {
                 const double v = to_double(key, s);
                 if (v != static_cast<int>(v)) throw ConfigError("'" + key + "': expected an integer");
                 ref = static_cast<int>(v);
               }});
}

void add(std::vector<Binding>& b, const std::string& sec, const std::string& key,
         std::uint64_t& ref) {
  b.push_back({sec, key, [&ref] { return std::to_string(ref); },
               [&ref, key](const std::string& s) {
                 const std::string t = trim(s);
                 const auto res = std::from_chars(t.data(), t.data() + t.size(), ref);
                 if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
                   throw ConfigError("'" + key + "': expected an unsigned integer");
                 }
               }});
}

void add(std::vector<Binding>& b, const std::string& sec, const std::string& key, Vec3& ref) {
  b.push_back({sec, key, [&ref] { return fmt(ref(0)) + ", " + fmt(ref(1)) + ", " + fmt(ref(2)); },
               [&ref, key](const std::string& s) {
                 const auto v = to_doubles(key, s, 3);
                 ref = Vec3(v[0], v[1], v[2]);
               }});
}

void add_diag(std::vector<Binding>& b, const std::string& sec, const std::string& key, Mat6& ref) {
  b.push_back({sec, key,
               [&ref] {
                 std::string out;
                 for (int i = 0; i < 6; ++i) out += (i ? ", " : "") + fmt(ref(i, i));
                 return out;
               },
               [&ref, key](const std::string& s) {
                 const auto v = to_doubles(key, s, 6);
                 ref.setZero();
                 for (int i = 0; i < 6; ++i) ref(i, i) = v[i];
               }});
}

void add(std::vector<Binding>& b, const std::string& sec, const std::string& key, Vec6& ref) {
  b.push_back({sec, key,
               [&ref] {
                 std::string out;
                 for (int i = 0; i < 6; ++i) out += (i ? ", " : "") + fmt(ref(i));
                 return out;
               },
               [&ref, key](const std::string& s) {
                 const auto v = to_doubles(key, s, 6);
                 for (int i = 0; i < 6; ++i) ref(i) = v[i];
               }});
}

void add(std::vector<Binding>& b, const std::string& sec, const std::string& key,
         std::vector<std::string>& ref) {
  b.push_back({sec, key, [&ref] { return join(ref); },
               [&ref](const std::string& s) { ref = split_list(s); }});
}

void add(std::vector<Binding>& b, const std::string& sec, const std::string& key, std::string& ref) {
  b.push_back({sec, key, [&ref] { return ref; }, [&ref](const std::string& s) { ref = trim(s); }});
}

void add_surface(std::vector<Binding>& b, const std::string& sec, LiftingSurface& s) {
  add(b, sec, "x_position", s.x_position);
  add(b, sec, "area", s.area);
  add(b, sec, "lift_slope", s.lift_slope);
  add(b, sec, "drag_parasitic", s.drag_parasitic);
  add(b, sec, "drag_induced", s.drag_induced);
}

void add_pid(std::vector<Binding>& b, const std::string& sec, PidGains& g) {
  add(b, sec, "kp", g.kp);
  add(b, sec, "ki", g.ki);
  add(b, sec, "kd", g.kd);
  add(b, sec, "out_min", g.out_min);
  add(b, sec, "out_max", g.out_max);
}

// Inertia is stored as a full matrix but configured by its diagonal.
void add_inertia(std::vector<Binding>& b, Mat3& ref) {
  b.push_back({"body", "inertia_diag",
               [&ref] { return fmt(ref(0, 0)) + ", " + fmt(ref(1, 1)) + ", " + fmt(ref(2, 2)); },
               [&ref](const std::string& s) {
                 const auto v = to_doubles("inertia_diag", s, 3);
                 ref = Vec3(v[0], v[1], v[2]).asDiagonal();
               }});
}

std::vector<Binding> bindings(Config& c) {
  std::vector<Binding> b;
  auto& g = c.sim.glider;
  add(b, "environment", "water_density", g.env.water_density);
  add(b, "environment", "gravity", g.env.gravity);

  add(b, "body", "mass", g.body.mass);
  add_inertia(b, g.body.inertia);
  add(b, "body", "r_cg", g.body.r_cg);
  add(b, "body", "r_cb", g.body.r_cb);
  add(b, "body", "weight_n", g.body.weight);
  add(b, "body", "buoyancy0_n", g.body.buoyancy0);

  add_diag(b, "hydro", "added_mass_diag", g.hydro.added_mass);
  add_diag(b, "hydro", "linear_damping_diag", g.hydro.linear_damping);
  add(b, "hydro", "quadratic_damping", g.hydro.quadratic_damping);
  add_surface(b, "wing", g.hydro.wing);
  add_surface(b, "fin_horizontal", g.hydro.fins.at(0));
  add_surface(b, "fin_vertical", g.hydro.fins.at(1));

  add(b, "moving_mass", "mass", g.moving_mass.mass);
  add(b, "moving_mass", "roll_radius", g.moving_mass.roll_radius);

  auto& a = g.actuators;
  add(b, "actuators", "vbs_max", a.vbs_max);
  add(b, "actuators", "vbs_rate", a.vbs_rate);
  add(b, "actuators", "mm_x_max", a.mm_x_max);
  add(b, "actuators", "mm_x_rate", a.mm_x_rate);
  add(b, "actuators", "mm_roll_max", a.mm_roll_max);
  add(b, "actuators", "mm_roll_rate", a.mm_roll_rate);

  add_pid(b, "pitch_pid", c.sim.controllers.pitch);
  add_pid(b, "heading_pid", c.sim.controllers.heading);

  auto& s = c.sim.scenario;
  add(b, "scenario", "sim_dt", s.sim_dt);
  add(b, "scenario", "sample_rate", s.sample_rate);
  add(b, "scenario", "seafloor_depth", s.seafloor_depth);
  add(b, "scenario", "initial_depth", s.initial_depth);
  add(b, "scenario", "depth_top", s.depth_top);
  add(b, "scenario", "depth_bottom", s.depth_bottom);
  add(b, "scenario", "pitch_deg", s.pitch_deg);
  add(b, "scenario", "vbs_command", s.vbs_command);
  add(b, "scenario", "spiral_roll", s.spiral_roll);
  add(b, "scenario", "heading_deg", s.heading_deg);
  add(b, "scenario", "terminal_coast_s", s.terminal_coast_s);
  add(b, "scenario", "segment_min_s", s.segment_min_s);
  add(b, "scenario", "segment_max_s", s.segment_max_s);
  add(b, "scenario", "current_variation", s.current_variation);
  add(b, "scenario", "current_correlation_s", s.current_correlation_s);

  auto& imu = c.sim.sensors.imu;
  add(b, "imu", "gyro_bias", imu.gyro_bias);
  add(b, "imu", "accel_bias", imu.accel_bias);
  add(b, "imu", "gyro_bias_instability", imu.gyro_bias_instability);
  add(b, "imu", "accel_bias_instability", imu.accel_bias_instability);
  add(b, "imu", "bias_correlation_s", imu.bias_correlation_s);
  add(b, "imu", "gyro_noise_density", imu.gyro_noise_density);
  add(b, "imu", "accel_noise_density", imu.accel_noise_density);
  add(b, "imu", "roll_pitch_rms", imu.roll_pitch_rms);
  add(b, "imu", "heading_rms", imu.heading_rms);
  add(b, "imu", "attitude_correlation_s", imu.attitude_correlation_s);

  auto& dvl = c.sim.sensors.dvl;
  add(b, "dvl", "max_altitude", dvl.max_altitude);
  add(b, "dvl", "min_altitude", dvl.min_altitude);
  add(b, "dvl", "accuracy", dvl.accuracy);
  add(b, "dvl", "floor", dvl.floor);
  add(b, "dvl", "ping_rate", dvl.ping_rate);
  add(b, "pressure", "noise_pa", c.sim.sensors.pressure.noise_pa);

  auto& p = c.preprocess;
  add(b, "preprocess", "outlier_z", p.outlier_z);
  add(b, "preprocess", "outlier_half_window", p.outlier_half_window);
  add(b, "preprocess", "lowpass_cutoff_hz", p.lowpass_cutoff_hz);
  add(b, "preprocess", "gaussian_sigma", p.gaussian_sigma);

  auto& t = c.train;
  add(b, "train", "train_ratio", t.train_ratio);
  add(b, "train", "val_ratio", t.val_ratio);
  add(b, "train", "test_ratio", t.test_ratio);
  add(b, "train", "patience", t.patience);
  add(b, "train", "max_epochs", t.max_epochs);
  add(b, "train", "scg_sigma", t.scg_sigma);
  add(b, "train", "scg_lambda", t.scg_lambda);
  add(b, "train", "seed", t.seed);
  add(b, "train", "window", t.window);
  add(b, "train", "warmup", t.warmup);
  add(b, "train", "layers", t.layers);
  add(b, "train", "hidden", t.hidden);
  add(b, "train", "surge_channels", c.surge_channels);
  add(b, "train", "sway_channels", c.sway_channels);

  add(b, "replay", "heave", c.replay.heave);
  return b;
}

}  // namespace

void PreprocessConfig::validate(double sample_rate) const {
  if (!(outlier_z > 0.0)) throw ConfigError("outlier_z must be positive");
  if (outlier_half_window < 1) throw ConfigError("outlier_half_window must be at least 1");
  if (!(gaussian_sigma > 0.0)) throw ConfigError("gaussian_sigma must be positive");
  if (!(lowpass_cutoff_hz > 0.0 && lowpass_cutoff_hz < sample_rate / 2.0)) {
    throw ConfigError("lowpass_cutoff_hz must lie in (0, sample_rate / 2)");
  }
}

std::map<std::string, CurrentPreset> Config::default_currents() {
  return {{"low", {-0.05, -0.002}}, {"medium", {-0.09, -0.12}}, {"strong", {-0.18, -0.24}}};
}

void Config::validate() const {
  sim.scenario.validate();
  sim.sensors.imu.validate();
  sim.sensors.dvl.validate();
  train.validate();
  preprocess.validate(sim.scenario.sample_rate);
  if (!(sim.glider.body.mass > 0.0)) throw ConfigError("body mass must be positive");
  for (const auto* list : {&surge_channels, &sway_channels}) {
    if (list->empty()) throw ConfigError("input channel list is empty");
    std::set<std::string> seen;
    for (const auto& ch : *list) {
      const auto& all = all_input_channels();
      if (std::find(all.begin(), all.end(), ch) == all.end()) {
        throw ConfigError("unknown input channel '" + ch + "'");
      }
      if (!seen.insert(ch).second) throw ConfigError("duplicate input channel '" + ch + "'");
    }
  }
  if (replay.heave != "depth_rate" && replay.heave != "rotated") {
    throw ConfigError("replay heave must be 'depth_rate' or 'rotated'");
  }
}

Config parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  Config cfg;
  auto binds = bindings(cfg);
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty()) {
      throw ConfigError("config key '" + section + "' must sit inside a section");
    }
    if (section == "currents") {
      cfg.currents.clear();
      for (const auto& [name, value] : entries) {
        const auto v = to_doubles("currents." + name, value.data(), 2);
        cfg.currents[name] = {v[0], v[1]};
      }
      continue;
    }
    bool known_section = false;
    for (const auto& b : binds) known_section |= b.section == section;
    if (!known_section) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : entries) {
      auto it = std::find_if(binds.begin(), binds.end(), [&](const Binding& b) {
        return b.section == section && b.key == key;
      });
      if (it == binds.end()) throw ConfigError("unknown config key '" + section + "." + key + "'");
      it->set(value.data());
    }
  }
  cfg.validate();
  return cfg;
}

Config load_config(const std::string& path) {
  if (path.empty()) return Config{};
  return parse_config(read_file(path));
}

std::string canonical_config(const Config& cfg) {
  Config copy = cfg;
  std::ostringstream os;
  std::string section;
  for (const auto& b : bindings(copy)) {
    if (b.section != section) {
      os << (section.empty() ? "" : "\n") << '[' << b.section << "]\n";
      section = b.section;
    }
    os << b.key << " = " << b.get() << '\n';
  }
  os << "\n[currents]\n";
  for (const auto& [name, c] : cfg.currents) {
    os << name << " = " << fmt(c.north) << ", " << fmt(c.east) << '\n';
  }
  return os.str();
}

std::string config_fingerprint(const Config& cfg) { return sha256_hex(canonical_config(cfg)); }

CurrentPreset resolve_current(const Config& cfg, const std::string& spec) {
  if (auto it = cfg.currents.find(spec); it != cfg.currents.end()) return it->second;
  const auto items = split_list(spec);
  if (items.size() == 2) {
    return {to_double("current", items[0]), to_double("current", items[1])};
  }
  throw ConfigError("current '" + spec + "' is neither a preset nor 'north,east'");
}

}  // namespace glidenav
