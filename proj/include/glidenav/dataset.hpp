#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glidenav/sensor_models.hpp"

namespace glidenav {

inline constexpr int kDatasetSchemaVersion = 1;

/// CSV column names in file order.
const std::vector<std::string>& dataset_columns();

struct DatasetMeta {
  int schema_version = kDatasetSchemaVersion;
  std::string scenario;
  std::uint64_t seed = 0;
  double duration_s = 0.0;
  double sample_rate = 0.0;
  double sim_dt = 0.0;
  std::string current_preset;
  double current_north = 0.0;
  double current_east = 0.0;
  bool noise_free = false;
  std::string config_hash;
  std::size_t rows = 0;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<SensorRecord> records;
};

std::string format_dataset_csv(const std::vector<SensorRecord>& records);

/// Throws SchemaMismatch on a wrong version line, header, field count, or
/// non-increasing timestamps.
std::vector<SensorRecord> parse_dataset_csv(const std::string& text);

std::string format_meta_json(const DatasetMeta& meta);
DatasetMeta parse_meta_json(const std::string& text);

/// "run.csv" -> "run.meta.json"
std::string meta_path_for(const std::string& csv_path);

/// Writes the CSV and its metadata sidecar, each atomically.
void write_dataset(const std::string& csv_path, const Dataset& ds);
Dataset read_dataset(const std::string& csv_path);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);
double parse_double_field(const std::string& s);  // throws SchemaMismatch

}  // namespace glidenav
