#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <random>

#include "glidenav/config.hpp"
#include "glidenav/dataset.hpp"
#include "glidenav/errors.hpp"
#include "glidenav/io.hpp"
#include "glidenav/nav_pipeline.hpp"

using namespace glidenav;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("glidenav_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const Dataset& short_run() {
  static const Dataset ds = simulate_dataset(Config{}, ScenarioKind::MixedTest, 600.0, "low", 5,
                                             false);
  return ds;
}

SensorRecord random_record(std::mt19937_64& rng, double t) {
  std::normal_distribution<double> n;
  SensorRecord r;
  r.t = t;
  r.euler = {0.1 * n(rng), 0.3 * n(rng), 2.0 * n(rng)};
  r.omega_meas = Vec3(n(rng), n(rng), n(rng)) * 1e-2;
  r.accel_meas = Vec3(n(rng), n(rng), -9.81 + n(rng));
  r.depth = 50 + n(rng);
  r.heave_w_r = 0.1 * n(rng);
  r.ctrl = {1e-3 * n(rng), 0.01 * n(rng), n(rng)};
  r.label_u_r = 1 + 0.1 * n(rng);
  r.label_v_r = 0.01 * n(rng);
  r.label_valid = n(rng) > 0;
  r.truth_pos = {1000 * n(rng), 1000 * n(rng), 50 + n(rng)};
  r.current_north = -0.05;
  r.current_east = -0.002;
  return r;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GLIDENAV_CLI) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RnnModel zero_model(const std::vector<std::string>& channels) {
  RnnModel m(static_cast<int>(channels.size()), 3, 4);
  m.channels = channels;
  m.norm.in_mean = VectorXd::Zero(m.n_in());
  m.norm.in_std = VectorXd::Ones(m.n_in());
  return m;
}

}  // namespace

TEST(DatasetCsv, RoundTripIsValueIdentical) {
  std::mt19937_64 rng(1);
  std::vector<SensorRecord> recs;
  for (int i = 0; i < 200; ++i) recs.push_back(random_record(rng, 0.5 * i));
  const auto back = parse_dataset_csv(format_dataset_csv(recs));
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto &a = recs[i], &b = back[i];
    ASSERT_EQ(a.t, b.t);
    ASSERT_EQ(a.euler.vec(), b.euler.vec());
    ASSERT_EQ(a.omega_meas, b.omega_meas);
    ASSERT_EQ(a.accel_meas, b.accel_meas);
    ASSERT_EQ(a.depth, b.depth);
    ASSERT_EQ(a.heave_w_r, b.heave_w_r);
    ASSERT_EQ(a.ctrl, b.ctrl);
    ASSERT_EQ(a.label_u_r, b.label_u_r);
    ASSERT_EQ(a.label_v_r, b.label_v_r);
    ASSERT_EQ(a.label_valid, b.label_valid);
    ASSERT_EQ(a.truth_pos, b.truth_pos);
    ASSERT_EQ(a.current_north, b.current_north);
  }
  EXPECT_EQ(format_dataset_csv(back), format_dataset_csv(recs));
}

TEST(DatasetCsv, HeaderMatchesInputChannelNames) {
  const auto& cols = dataset_columns();
  ASSERT_EQ(cols.size(), 23u);
  for (const auto& ch : all_input_channels()) {
    if (ch == "sin_yaw" || ch == "cos_yaw") continue;
    EXPECT_NE(std::find(cols.begin(), cols.end(), ch), cols.end()) << ch;
  }
}

TEST(DatasetCsv, SchemaViolationsRejected) {
  std::mt19937_64 rng(2);
  std::vector<SensorRecord> recs{random_record(rng, 0.0), random_record(rng, 0.5)};
  const std::string good = format_dataset_csv(recs);
  EXPECT_THROW(parse_dataset_csv("time_s\n"), SchemaMismatch);
  std::string wrong_version = good;
  wrong_version.replace(good.find("schema 1"), 8, "schema 9");
  EXPECT_THROW(parse_dataset_csv(wrong_version), SchemaMismatch);
  std::string bad_header = good;
  bad_header.replace(bad_header.find("roll_rad"), 8, "rollrad_");
  EXPECT_THROW(parse_dataset_csv(bad_header), SchemaMismatch);
  EXPECT_THROW(parse_dataset_csv(good + "1,2,3\n"), SchemaMismatch);
  recs[1].t = 0.0;
  EXPECT_THROW(parse_dataset_csv(format_dataset_csv(recs)), SchemaMismatch);
  EXPECT_THROW(parse_double_field("1.5x"), SchemaMismatch);
}

TEST(DatasetMeta, RoundTripAndSidecarPath) {
  DatasetMeta m;
  m.scenario = "mixed_test";
  m.seed = 18446744073709551615ull;
  m.duration_s = 9720;
  m.sample_rate = 2;
  m.sim_dt = 0.1;
  m.current_preset = "low";
  m.current_north = -0.05;
  m.current_east = -0.002;
  m.noise_free = true;
  m.config_hash = "ff00";
  m.rows = 19440;
  const DatasetMeta r = parse_meta_json(format_meta_json(m));
  EXPECT_EQ(r.seed, m.seed);
  EXPECT_EQ(r.current_north, m.current_north);
  EXPECT_EQ(r.noise_free, true);
  EXPECT_EQ(r.rows, 19440u);
  EXPECT_EQ(format_meta_json(r), format_meta_json(m));
  EXPECT_EQ(meta_path_for("out/run.csv"), "out/run.meta.json");
  EXPECT_THROW(parse_meta_json("{}"), SchemaMismatch);
}

TEST(Config, DefaultsRoundTripAndFingerprint) {
  const Config d;
  const Config r = parse_config(canonical_config(d));
  EXPECT_EQ(canonical_config(r), canonical_config(d));
  EXPECT_EQ(config_fingerprint(r), config_fingerprint(d));
  EXPECT_EQ(config_fingerprint(d).size(), 64u);
  const Config c = parse_config("[train]\nmax_epochs = 12\n\n[currents]\nlow = -0.05, -0.002\n");
  EXPECT_EQ(c.train.max_epochs, 12);
  EXPECT_NE(config_fingerprint(c), config_fingerprint(d));
  EXPECT_EQ(parse_config(canonical_config(c)).train.max_epochs, 12);
}

TEST(Config, RejectsUnknownAndMalformed) {
  EXPECT_THROW(parse_config("[train]\nmax_epoch = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[nonsense]\na = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[train]\nmax_epochs = many\n"), ConfigError);
  EXPECT_THROW(parse_config("[train]\ntrain_ratio = 0.9\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/glidenav.ini"), Error);
}

TEST(Config, CurrentPresets) {
  const Config cfg;
  const CurrentPreset low = resolve_current(cfg, "low");
  EXPECT_EQ(low.north, -0.05);
  EXPECT_EQ(low.east, -0.002);
  EXPECT_NEAR(std::hypot(resolve_current(cfg, "medium").north, resolve_current(cfg, "medium").east),
              0.15, 1e-12);
  EXPECT_NEAR(std::hypot(resolve_current(cfg, "strong").north, resolve_current(cfg, "strong").east),
              0.30, 1e-12);
  const CurrentPreset custom = resolve_current(cfg, "0.1,-0.2");
  EXPECT_EQ(custom.north, 0.1);
  EXPECT_EQ(custom.east, -0.2);
  EXPECT_THROW(resolve_current(cfg, "gale"), ConfigError);
}

TEST(Simulate, RowCountMetadataAndDeterminism) {
  const Dataset& ds = short_run();
  EXPECT_EQ(ds.records.size(), 1200u);
  EXPECT_EQ(ds.meta.current_north, -0.05);
  EXPECT_EQ(ds.meta.current_east, -0.002);
  EXPECT_EQ(ds.meta.current_preset, "low");
  EXPECT_EQ(ds.meta.config_hash, config_fingerprint(Config{}));
  const Dataset again = simulate_dataset(Config{}, ScenarioKind::MixedTest, 600.0, "low", 5, false);
  EXPECT_EQ(format_dataset_csv(again.records), format_dataset_csv(ds.records));
  const Dataset other = simulate_dataset(Config{}, ScenarioKind::MixedTest, 600.0, "low", 6, false);
  EXPECT_NE(format_dataset_csv(other.records), format_dataset_csv(ds.records));
}

TEST(Simulate, TimestampsAndDepthWithinScenarioBounds) {
  const Dataset& ds = short_run();
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    EXPECT_DOUBLE_EQ(ds.records[i].t, 0.5 * double(i));
    EXPECT_GE(ds.records[i].truth_pos.down, 0.0);
  }
  EXPECT_THROW(parse_scenario("loop"), ConfigError);
}

TEST(Simulate, NoiseFreeLabelsMatchTruth) {
  RunLog log;
  const Dataset ds =
      simulate_dataset(Config{}, ScenarioKind::WingsLevelSawtooth, 120.0, "0,0", 3, true, &log);
  ASSERT_EQ(log.truth.size(), ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    EXPECT_EQ(r.euler.vec(), log.truth[i].state.attitude().vec());
    EXPECT_NEAR(r.depth, log.truth[i].state.eta(2), 1e-9);
  }
}

TEST(Labels, ConditionedPerValidRun) {
  std::vector<SensorRecord> recs(300);
  for (int i = 0; i < 300; ++i) {
    recs[i].t = 0.5 * i;
    recs[i].label_u_r = 1.0;
    recs[i].label_v_r = -0.2;
    recs[i].label_valid = !(i >= 100 && i < 120);
  }
  recs[50].label_u_r = 50.0;
  const LabelSeries l = prepare_labels(recs, Axis::Surge, PreprocessConfig{}, 2.0);
  EXPECT_EQ(l.outliers, 1u);
  for (int i = 0; i < 300; ++i) {
    EXPECT_EQ(l.valid[i], recs[i].label_valid);
    if (l.valid[i]) {
      EXPECT_NEAR(l.value[i], 1.0, 1e-12) << i;
    }
  }
  const LabelSeries s = prepare_labels(recs, Axis::Sway, PreprocessConfig{}, 2.0);
  EXPECT_NEAR(s.value[10], -0.2, 1e-12);
}

TEST(Windows, DuplicateDatasetDoublesEpisodes) {
  const Dataset& ds = short_run();
  const auto one = make_windows({ds}, Axis::Surge, all_input_channels(), 500, PreprocessConfig{});
  const auto two =
      make_windows({ds, ds}, Axis::Surge, all_input_channels(), 500, PreprocessConfig{});
  EXPECT_EQ(one.size(), 3u);  // 500 + 500 + 200
  EXPECT_EQ(one.back().x.cols(), 200);
  EXPECT_EQ(two.size(), 2 * one.size());
  EXPECT_EQ(two[3].x, one[0].x);
}

TEST(Windows, WarmupPrefixIsUnscoredAndLabelsCountOnce) {
  const Dataset& ds = short_run();
  const auto cold = make_windows({ds}, Axis::Surge, all_input_channels(), 500, PreprocessConfig{});
  const auto warm =
      make_windows({ds}, Axis::Surge, all_input_channels(), 500, PreprocessConfig{}, 40);
  ASSERT_EQ(warm.size(), cold.size());
  EXPECT_EQ(warm[0].x, cold[0].x);
  double cold_scored = 0.0, warm_scored = 0.0;
  for (std::size_t i = 0; i < cold.size(); ++i) {
    cold_scored += cold[i].mask.sum();
    warm_scored += warm[i].mask.sum();
    if (i == 0) continue;
    ASSERT_EQ(warm[i].x.cols(), cold[i].x.cols() + 40);
    EXPECT_TRUE(warm[i].mask.head(40).isZero(0.0));
    EXPECT_EQ(warm[i].x.leftCols(40), cold[i - 1].x.rightCols(40));
    EXPECT_EQ(warm[i].x.rightCols(cold[i].x.cols()), cold[i].x);
    EXPECT_EQ(warm[i].mask.tail(cold[i].x.cols()), cold[i].mask);
  }
  EXPECT_EQ(warm_scored, cold_scored);
  EXPECT_THROW(make_windows({ds}, Axis::Surge, all_input_channels(), 500, PreprocessConfig{}, -1),
               ConfigError);
}

TEST(Replay, ZeroModelAtConstantDepthStaysPut) {
  std::mt19937_64 rng(4);
  Dataset ds;
  ds.meta.sample_rate = 2.0;
  for (int i = 0; i < 100; ++i) {
    SensorRecord r = random_record(rng, 0.5 * i);
    r.depth = 30.0;
    ds.records.push_back(r);
  }
  const RnnModel z = zero_model(all_input_channels());
  const Trajectory tr = replay(ds, z, z, 0.5, ReplayConfig{});
  for (const auto& p : tr.est) EXPECT_EQ(p, ds.records.front().truth_pos);
}

TEST(Replay, DeterministicAndMatchesIntegrator) {
  const Dataset& ds = short_run();
  RnnModel m = RnnModel::random(15, 3, 4, 1);
  m.channels = all_input_channels();
  m.norm.in_mean = VectorXd::Zero(15);
  m.norm.in_std = VectorXd::Constant(15, 10.0);
  m.norm.out_mean = 0.8;
  m.norm.out_std = 0.1;
  const Trajectory a = replay(ds, m, m, 0.5, ReplayConfig{});
  const Trajectory b = replay(ds, m, m, 0.5, ReplayConfig{});
  EXPECT_EQ(format_trajectory_csv(a), format_trajectory_csv(b));
  NedPosition p = ds.records.front().truth_pos;
  for (std::size_t k = 1; k < ds.records.size(); ++k) {
    p = dr_step(p, ds.records[k].euler, {a.velocity[k](0), a.velocity[k](1), a.velocity[k](2)},
                0.5);
  }
  EXPECT_LT((p.vec() - a.est.back().vec()).norm(), 1e-9);
  const Trajectory parsed = parse_trajectory_csv(format_trajectory_csv(a));
  EXPECT_EQ(format_trajectory_csv(parsed), format_trajectory_csv(a));
}

TEST(Replay, TruthVelocityTracksShortRun) {
  RunLog log;
  simulate_dataset(Config{}, ScenarioKind::Spiral, 900.0, "0,0", 2, true, &log);
  const Trajectory tr = replay_truth_velocity(log, 0.5);
  const EvalReport r = evaluate(tr, "truth");
  EXPECT_LT(r.final_horizontal, 0.05);
  EXPECT_GT(r.distance_traveled, 300.0);
}

TEST(Evaluate, IdentityAndShape) {
  std::mt19937_64 rng(6);
  Trajectory tr;
  for (int i = 0; i < 50; ++i) {
    tr.t.push_back(0.5 * i);
    const NedPosition p{double(i), 2.0 * i, 10.0};
    tr.est.push_back(p);
    tr.truth.push_back(p);
    tr.velocity.push_back(Vec3(1, 0, 0));
    tr.label_u.push_back(1.0);
    tr.label_v.push_back(0.0);
    tr.label_valid.push_back(true);
  }
  const EvalReport r = evaluate(tr, "same");
  EXPECT_EQ(r.errors.size(), tr.t.size());
  for (const auto& e : r.errors) {
    EXPECT_EQ(e.north, 0.0);
    EXPECT_EQ(e.east, 0.0);
  }
  EXPECT_NEAR(r.distance_traveled, 49 * std::sqrt(5.0), 1e-9);
  EXPECT_EQ(r.velocity_mse_u, 0.0);
  tr.est.back().north += 3.0;
  tr.est.back().east -= 4.0;
  const EvalReport s = evaluate(tr, "shifted");
  EXPECT_EQ(s.final_north, 3.0);
  EXPECT_EQ(s.final_east, 4.0);
  EXPECT_EQ(s.final_horizontal, 5.0);
  const EvalReport back = parse_report_csv(format_report_csv(s));
  EXPECT_EQ(back.label, "shifted");
  EXPECT_EQ(back.errors.size(), s.errors.size());
  EXPECT_EQ(back.errors.back().east, 4.0);
  tr.truth.pop_back();
  EXPECT_THROW(evaluate(tr, "bad"), LengthMismatch);
}

TEST(Plot, DeterministicLabeledSeries) {
  std::vector<EvalReport> reports;
  for (const char* name : {"low", "medium", "strong"}) {
    EvalReport r;
    r.label = name;
    for (int i = 0; i < 5000; ++i) r.errors.push_back({0.01 * i, 0.02 * i * (1 + reports.size())});
    reports.push_back(r);
  }
  const std::string a = plot_errors_svg(reports), b = plot_errors_svg(reports);
  EXPECT_EQ(a, b);
  for (const char* name : {"low", "medium", "strong"}) {
    EXPECT_NE(a.find("data-label=\"" + std::string(name) + "\""), std::string::npos);
  }
  std::size_t count = 0;
  for (auto p = a.find("<polyline"); p != std::string::npos; p = a.find("<polyline", p + 1)) {
    ++count;
  }
  EXPECT_EQ(count, 6u);  // three series in each of the two panels
  EXPECT_NE(a.find("(m)"), std::string::npos);
  reports[1].errors.clear();
  EXPECT_THROW(plot_errors_svg(reports), ConfigError);
  EXPECT_THROW(plot_errors_svg({}), ConfigError);
}

TEST(Io, AtomicWriteAndHash) {
  const fs::path dir = scratch_dir("io");
  const std::string path = (dir / "a" / "b.txt").string();
  write_file_atomic(path, "hello");
  EXPECT_EQ(read_file(path), "hello");
  write_file_atomic(path, "bye");
  EXPECT_EQ(read_file(path), "bye");
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_THROW(read_file((dir / "missing").string()), IoError);
}

TEST(Cli, ExitCodesAndByteIdenticalOutput) {
  const fs::path dir = scratch_dir("cli");
  const std::string a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
  const std::string sim = " simulate --scenario spiral --duration-s 60 --current low --seed 3 --out ";
  EXPECT_EQ(run_cli(sim + a), 0);
  EXPECT_EQ(run_cli(sim + b), 0);
  EXPECT_EQ(read_file(a), read_file(b));
  EXPECT_EQ(read_dataset(a).records.size(), 120u);

  write_file_atomic((dir / "bad.ini").string(), "[train]\nbogus = 1\n");
  EXPECT_EQ(run_cli("simulate --config " + (dir / "bad.ini").string() + " --out " + a), 2);
  EXPECT_EQ(run_cli("simulate --scenario loop --out " + a), 2);
  write_file_atomic((dir / "junk.csv").string(), "not,a,trajectory\n");
  EXPECT_EQ(run_cli("evaluate --trajectory " + (dir / "junk.csv").string() + " --out " +
                    (dir / "r.csv").string()),
            3);
  EXPECT_NE(run_cli("evaluate --out x"), 0);
}
