// glidenav command-line front end: simulate, train, replay, evaluate, plot.
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "glidenav/errors.hpp"
#include "glidenav/io.hpp"
#include "glidenav/nav_pipeline.hpp"

using namespace glidenav;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--config", c.config, "Configuration file (defaults built in)");
  cmd->add_option("--seed", c.seed, "Random seed");
  auto* o = cmd->add_option("--out", c.out, "Output path");
  if (out_required) o->required();
}

// "out/surge.model" + ".history.csv" -> "out/surge.history.csv"
std::string sibling(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  p.replace_extension();
  return p.string() + suffix;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("glidenav");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  if (const char* level = std::getenv("GLIDENAV_LOG")) spdlog::cfg::helpers::load_levels(level);

  CLI::App app{"Underwater glider simulation, velocity networks and dead-reckoning replay"};
  app.require_subcommand(1);

  Common sim_c;
  std::string scenario = "mixed_test", current = "low";
  double duration_s = 9720.0;
  bool noise_free = false;
  auto* sim = app.add_subcommand("simulate", "Simulate a scenario and write a dataset CSV");
  add_common(sim, sim_c);
  sim->add_option("--scenario", scenario,
                  "wings_level_sawtooth | spiral | mixed_test | mixed_train");
  sim->add_option("--duration-s", duration_s, "Duration in seconds");
  sim->add_option("--current", current, "Current preset name or north,east in m/s");
  sim->add_flag("--noise-free", noise_free, "Disable every sensor error source");

  Common train_c;
  std::string axis_name;
  std::vector<std::string> train_sets;
  auto* train = app.add_subcommand("train", "Train a surge or sway velocity network");
  add_common(train, train_c);
  train->add_option("--axis", axis_name, "surge | sway")->required();
  train->add_option("--dataset", train_sets, "Dataset CSV (repeatable)")->required();

  Common replay_c;
  std::string replay_set, surge_path, sway_path;
  std::optional<double> replay_dt;
  auto* rep = app.add_subcommand("replay", "Dead-reckon a dataset with trained networks");
  add_common(rep, replay_c);
  rep->add_option("--dataset", replay_set, "Dataset CSV")->required();
  rep->add_option("--surge-model", surge_path, "Surge model file")->required();
  rep->add_option("--sway-model", sway_path, "Sway model file")->required();
  rep->add_option("--dt", replay_dt, "Integration step in s (default: sample interval)");

  Common eval_c;
  std::string traj_path, label;
  auto* ev = app.add_subcommand("evaluate", "Positioning error report for a replayed trajectory");
  add_common(ev, eval_c);
  ev->add_option("--trajectory", traj_path, "Trajectory CSV from replay")->required();
  ev->add_option("--label", label, "Series label (default: file stem)");

  Common plot_c;
  std::vector<std::string> plot_reports, plot_trajs;
  auto* pl = app.add_subcommand("plot", "Render SVG figures into a directory");
  add_common(pl, plot_c);
  pl->add_option("--report", plot_reports, "Report CSV (repeatable)");
  pl->add_option("--trajectory", plot_trajs, "Trajectory CSV (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const Config cfg = load_config(sim_c.config);
      const std::uint64_t seed = sim_c.seed.value_or(1);
      const Dataset ds = simulate_dataset(cfg, parse_scenario(scenario), duration_s, current,
                                          seed, noise_free);
      write_dataset(sim_c.out, ds);
      spdlog::info("wrote {} rows to {}", ds.records.size(), sim_c.out);
    } else if (train->parsed()) {
      const Config cfg = load_config(train_c.config);
      const Axis axis = parse_axis(axis_name);
      std::vector<Dataset> sets;
      for (const auto& p : train_sets) sets.push_back(read_dataset(p));
      const std::uint64_t seed = train_c.seed.value_or(cfg.train.seed);
      const auto progress = [](const ScgRecord& r) {
        if (r.iteration % 10 == 0) {
          spdlog::info("iter {:4d}  train mse {:.4e}  val mse {:.4e}", r.iteration,
                       r.train_error, r.val_error);
        }
      };
      const TrainOutput out = train_axis(cfg, sets, axis, seed, progress);
      save_model(train_c.out, out.result.model);
      write_file_atomic(sibling(train_c.out, ".history.csv"), out.history_csv);
      write_file_atomic(sibling(train_c.out, ".summary.json"), out.summary_json);
      spdlog::info("{} model: test mse {:.4e} (normalized), stop: {}", axis_name,
                   out.result.test_mse, out.result.scg.stop_reason);
    } else if (rep->parsed()) {
      const Config cfg = load_config(replay_c.config);
      const Dataset ds = read_dataset(replay_set);
      const RnnModel surge = load_model(surge_path);
      const RnnModel sway = load_model(sway_path);
      const double dt = replay_dt.value_or(1.0 / ds.meta.sample_rate);
      const Trajectory tr = replay(ds, surge, sway, dt, cfg.replay);
      write_file_atomic(replay_c.out, format_trajectory_csv(tr));
      spdlog::info("replayed {} samples into {}", tr.t.size(), replay_c.out);
    } else if (ev->parsed()) {
      const Trajectory tr = parse_trajectory_csv(read_file(traj_path));
      if (label.empty()) label = std::filesystem::path(traj_path).stem().string();
      const EvalReport r = evaluate(tr, label);
      write_file_atomic(eval_c.out, format_report_csv(r));
      write_file_atomic(sibling(eval_c.out, ".summary.json"), format_report_json(r));
      spdlog::info("{}: final error north {:.1f} m, east {:.1f} m over {:.0f} m traveled",
                   label, r.final_north, r.final_east, r.distance_traveled);
    } else if (pl->parsed()) {
      if (plot_reports.empty() && plot_trajs.empty()) {
        throw ConfigError("plot needs at least one --report or --trajectory");
      }
      const std::filesystem::path dir(plot_c.out);
      if (!plot_reports.empty()) {
        std::vector<EvalReport> reports;
        for (const auto& p : plot_reports) reports.push_back(parse_report_csv(read_file(p)));
        write_file_atomic((dir / "errors.svg").string(), plot_errors_svg(reports));
      }
      if (!plot_trajs.empty()) {
        std::vector<std::pair<std::string, Trajectory>> tracks;
        for (const auto& p : plot_trajs) {
          tracks.emplace_back(std::filesystem::path(p).stem().string(),
                              parse_trajectory_csv(read_file(p)));
        }
        write_file_atomic((dir / "track.svg").string(), plot_track_svg(tracks));
        write_file_atomic((dir / "track3d.svg").string(), plot_track3d_svg(tracks));
      }
    }
  } catch (const glidenav::Error& e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
