#include "glidenav/dataset.hpp"

#include <charconv>
#include <filesystem>
#include <sstream>

#include "glidenav/errors.hpp"
#include "glidenav/io.hpp"
#include "json.hpp"

namespace glidenav {

namespace {
constexpr const char* kVersionLine = "# glidenav dataset schema ";
}

const std::vector<std::string>& dataset_columns() {
  static const std::vector<std::string> cols = {
      "time_s",        "roll_rad",      "pitch_rad",     "yaw_rad",     "p_rad_s",
      "q_rad_s",       "r_rad_s",       "ax_m_s2",       "ay_m_s2",     "az_m_s2",
      "depth_m",       "heave_w_r_m_s", "vbs_m3",        "mm_x_m",      "mm_roll_rad",
      "label_u_r_m_s", "label_v_r_m_s", "label_valid",   "truth_n_m",   "truth_e_m",
      "truth_d_m",     "cur_u_m_s",     "cur_v_m_s"};
  return cols;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double_field(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw SchemaMismatch("bad numeric field '" + s + "'");
  }
  return v;
}

std::string format_dataset_csv(const std::vector<SensorRecord>& records) {
  std::string out = kVersionLine + std::to_string(kDatasetSchemaVersion) + "\n";
  const auto& cols = dataset_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  out.reserve(out.size() + records.size() * 400);
  for (const auto& r : records) {
    const double v[] = {r.t,
                        r.euler.roll,
                        r.euler.pitch,
                        r.euler.yaw,
                        r.omega_meas(0),
                        r.omega_meas(1),
                        r.omega_meas(2),
                        r.accel_meas(0),
                        r.accel_meas(1),
                        r.accel_meas(2),
                        r.depth,
                        r.heave_w_r,
                        r.ctrl.vbs,
                        r.ctrl.mm_x,
                        r.ctrl.mm_roll,
                        r.label_u_r,
                        r.label_v_r};
    for (double x : v) {
      out += format_double(x);
      out += ',';
    }
    out += r.label_valid ? "1," : "0,";
    const double tail[] = {r.truth_pos.north, r.truth_pos.east, r.truth_pos.down,
                           r.current_north, r.current_east};
    for (std::size_t i = 0; i < 5; ++i) {
      out += format_double(tail[i]);
      out += i + 1 < 5 ? ',' : '\n';
    }
  }
  return out;
}

std::vector<SensorRecord> parse_dataset_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind(kVersionLine, 0) != 0) {
    throw SchemaMismatch("dataset is missing its schema version line");
  }
  if (line.substr(std::string(kVersionLine).size()) != std::to_string(kDatasetSchemaVersion)) {
    throw SchemaMismatch("unsupported dataset schema '" + line + "'");
  }
  const auto& cols = dataset_columns();
  std::string expected;
  for (std::size_t i = 0; i < cols.size(); ++i) expected += (i ? "," : "") + cols[i];
  if (!std::getline(is, line) || line != expected) {
    throw SchemaMismatch("dataset header does not match the expected column order");
  }

  std::vector<SensorRecord> out;
  std::vector<std::string> f;
  std::size_t line_no = 2;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    f.clear();
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != cols.size()) {
      throw SchemaMismatch("dataset line " + std::to_string(line_no) + " has " +
                           std::to_string(f.size()) + " fields, expected " +
                           std::to_string(cols.size()));
    }
    std::vector<double> v(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) v[i] = parse_double_field(f[i]);
    SensorRecord r;
    r.t = v[0];
    r.euler = {v[1], v[2], v[3]};
    r.omega_meas = Vec3(v[4], v[5], v[6]);
    r.accel_meas = Vec3(v[7], v[8], v[9]);
    r.depth = v[10];
    r.heave_w_r = v[11];
    r.ctrl = {v[12], v[13], v[14]};
    r.label_u_r = v[15];
    r.label_v_r = v[16];
    if (v[17] != 0.0 && v[17] != 1.0) throw SchemaMismatch("label_valid must be 0 or 1");
    r.label_valid = v[17] == 1.0;
    r.truth_pos = {v[18], v[19], v[20]};
    r.current_north = v[21];
    r.current_east = v[22];
    if (!out.empty() && !(r.t > out.back().t)) {
      throw SchemaMismatch("dataset timestamps are not strictly increasing at line " +
                           std::to_string(line_no));
    }
    out.push_back(r);
  }
  return out;
}

std::string format_meta_json(const DatasetMeta& m) {
  nlohmann::ordered_json j;
  j["schema_version"] = m.schema_version;
  j["scenario"] = m.scenario;
  j["seed"] = m.seed;
  j["duration_s"] = m.duration_s;
  j["sample_rate_hz"] = m.sample_rate;
  j["sim_dt_s"] = m.sim_dt;
  j["current_preset"] = m.current_preset;
  j["current_north_m_s"] = m.current_north;
  j["current_east_m_s"] = m.current_east;
  j["noise_free"] = m.noise_free;
  j["config_hash"] = m.config_hash;
  j["rows"] = m.rows;
  j["columns"] = dataset_columns();
  return j.dump(2) + "\n";
}

DatasetMeta parse_meta_json(const std::string& text) {
  DatasetMeta m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.schema_version = j.at("schema_version").get<int>();
    m.scenario = j.at("scenario").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.duration_s = j.at("duration_s").get<double>();
    m.sample_rate = j.at("sample_rate_hz").get<double>();
    m.sim_dt = j.at("sim_dt_s").get<double>();
    m.current_preset = j.at("current_preset").get<std::string>();
    m.current_north = j.at("current_north_m_s").get<double>();
    m.current_east = j.at("current_east_m_s").get<double>();
    m.noise_free = j.at("noise_free").get<bool>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.rows = j.at("rows").get<std::size_t>();
    if (j.at("columns").get<std::vector<std::string>>() != dataset_columns()) {
      throw SchemaMismatch("metadata column list does not match this build");
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaMismatch(std::string("dataset metadata: ") + e.what());
  }
  if (m.schema_version != kDatasetSchemaVersion) {
    throw SchemaMismatch("unsupported dataset schema version " + std::to_string(m.schema_version));
  }
  return m;
}

std::string meta_path_for(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  if (p.extension() == ".csv") p.replace_extension();
  return p.string() + ".meta.json";
}

void write_dataset(const std::string& csv_path, const Dataset& ds) {
  DatasetMeta meta = ds.meta;
  meta.rows = ds.records.size();
  write_file_atomic(csv_path, format_dataset_csv(ds.records));
  write_file_atomic(meta_path_for(csv_path), format_meta_json(meta));
}

Dataset read_dataset(const std::string& csv_path) {
  Dataset ds;
  ds.records = parse_dataset_csv(read_file(csv_path));
  ds.meta = parse_meta_json(read_file(meta_path_for(csv_path)));
  if (ds.meta.rows != ds.records.size()) {
    throw SchemaMismatch("dataset '" + csv_path + "' row count disagrees with its metadata");
  }
  return ds;
}

}  // namespace glidenav
