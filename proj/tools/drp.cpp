// Command-line front end: render, benign, optimize, evaluate, report.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "drp/attack.hpp"
#include "drp/config.hpp"
#include "drp/io.hpp"
#include "drp/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitGoalNotMet = 4;

struct Options {
  std::string config;
  std::string out = ".";
  std::string patch;
  std::string dump_frames;
  std::string dir;
  double duration = 10.0;
  bool require_success = false;
  bool deterministic = false;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json make_report(const drp::config::ScenarioConfig& cfg, const drp::sim::SimResult& result,
                 const std::optional<std::string>& patch_file, bool deterministic) {
  json report = {
      {"scenario", cfg.name},
      {"speed_kmh", cfg.speed_kmh},
      {"goal_m", result.goal},
      {"attack_time_s", result.attack_time ? json(*result.attack_time) : json(nullptr)},
      {"max_dev_m", result.max_lateral_deviation},
      {"patch_file", patch_file ? json(*patch_file) : json(nullptr)},
      {"config_hash", drp::config::config_hash(cfg)},
      {"patch_width_m", cfg.patch.placement.width},
      {"patch_length_m", cfg.patch.placement.length},
      {"attack_clock", "first frame whose model input contains a patch pixel"},
      {"duration_s", static_cast<double>(result.trajectory.size() - 1) * result.dt},
      {"frames_evaluated", result.frames_evaluated},
      {"truncated", result.truncated},
  };
  if (result.truncated) report["truncation_reason"] = result.truncation_reason;
  if (!deterministic) report["created_at"] = utc_timestamp();
  return report;
}

void write_trajectory(const fs::path& path, const drp::sim::SimResult& result) {
  std::ostringstream os;
  drp::sim::write_trajectory_csv(os, result);
  drp::io::write_text(path, os.str());
}

void write_history(const fs::path& path, const std::vector<drp::attack::HistoryEntry>& history) {
  std::string text = "iter,total,path_term,reg_term,step,max_dev\n";
  char line[256];
  for (const auto& h : history) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", h.iter, h.objective.total,
                  h.objective.path_term, h.objective.reg_term, h.step, h.max_dev);
    text += line;
  }
  drp::io::write_text(path, text);
}

void write_json(const fs::path& path, const json& j) { drp::io::write_text(path, j.dump(2) + "\n"); }

drp::sim::SimResult run_sim(const drp::config::Workbench& bench,
                            const drp::scene::PatchState* patch, double duration,
                            const std::string& dump_frames = "") {
  const auto& cfg = bench.config();
  std::function<void(const drp::camera::Frame&)> on_frame;
  if (!dump_frames.empty()) {
    fs::create_directories(dump_frames);
    on_frame = [&](const drp::camera::Frame& frame) {
      char name[64];
      std::snprintf(name, sizeof name, "frame_%05d.pgm", frame.index);
      drp::io::write_pgm(fs::path(dump_frames) / name, frame.pixels);
    };
  }
  return drp::sim::run_closed_loop(bench.context(), patch, cfg.initial, duration, cfg.goal,
                                   on_frame);
}

int cmd_render(const Options& opt) {
  const drp::config::Workbench bench(drp::config::load_config(opt.config));
  fs::create_directories(opt.out);
  const fs::path out(opt.out);
  drp::io::write_pgm(out / "scene.pgm", bench.scene().pixels);
  drp::io::write_mask_pgm(out / "lane_mask.pgm", bench.lane_mask());
  const auto& cfg = bench.config();
  if (!opt.patch.empty()) {
    const auto patch = drp::io::read_patch(opt.patch, cfg.initial_patch());
    const auto composite =
        drp::scene::composite_patch(bench.scene(), patch, bench.lane_mask(), cfg.road);
    drp::io::write_pgm(out / "scene_patched.pgm", composite.pixels);
  }
  const auto& sc = bench.scene();
  write_json(out / "scene.json", {{"meters_per_pixel", sc.meters_per_pixel},
                                  {"origin", {sc.origin.x, sc.origin.y}},
                                  {"rows", sc.rows()},
                                  {"cols", sc.cols()},
                                  {"row_axis", "x forward"},
                                  {"col_axis", "y left"},
                                  {"config_hash", drp::config::config_hash(cfg)}});
  return kExitOk;
}

int cmd_benign(const Options& opt) {
  const drp::config::Workbench bench(drp::config::load_config(opt.config));
  const auto result = run_sim(bench, nullptr, opt.duration);
  fs::create_directories(opt.out);
  write_trajectory(fs::path(opt.out) / "trajectory.csv", result);
  const json report = make_report(bench.config(), result, std::nullopt, opt.deterministic);
  write_json(fs::path(opt.out) / "report.json", report);
  std::cout << report.dump() << '\n';
  return kExitOk;
}

int cmd_optimize(const Options& opt) {
  const drp::config::Workbench bench(drp::config::load_config(opt.config));
  const auto& cfg = bench.config();
  const auto result =
      drp::attack::optimize_patch(bench.context(), cfg.initial, cfg.attack, cfg.initial_patch());
  const fs::path out(opt.out);
  fs::create_directories(out);
  const fs::path patch_path = out / "patch.pgm";
  drp::io::write_patch(patch_path, result.patch, drp::config::config_hash(cfg));
  write_history(out / "history.csv", result.history);

  // Evaluate what was written, so the report matches a later `evaluate`.
  const auto stored = drp::io::read_patch(patch_path, cfg.initial_patch());
  const auto sim = run_sim(bench, &stored, cfg.duration_s);
  write_trajectory(out / "trajectory.csv", sim);
  json report = make_report(cfg, sim, patch_path.filename().string(), opt.deterministic);
  report["iterations_run"] = static_cast<int>(result.history.size()) - 1;
  write_json(out / "report.json", report);
  std::cout << report.dump() << '\n';
  return kExitOk;
}

int cmd_evaluate(const Options& opt) {
  const drp::config::Workbench bench(drp::config::load_config(opt.config));
  const auto& cfg = bench.config();
  const auto patch = drp::io::read_patch(opt.patch, cfg.initial_patch());
  const auto sim = run_sim(bench, &patch, cfg.duration_s, opt.dump_frames);
  fs::create_directories(opt.out);
  write_trajectory(fs::path(opt.out) / "trajectory.csv", sim);
  const json report =
      make_report(cfg, sim, fs::path(opt.patch).filename().string(), opt.deterministic);
  write_json(fs::path(opt.out) / "report.json", report);
  std::cout << report.dump() << '\n';
  if (opt.require_success && !sim.attack_time) return kExitGoalNotMet;
  return kExitOk;
}

int cmd_report(const Options& opt) {
  if (!fs::is_directory(opt.dir)) {
    throw drp::Error(drp::ErrorKind::kIo, "not a directory: " + opt.dir);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(opt.dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "report.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  json rows = json::array();
  for (const auto& f : files) {
    json r;
    try {
      r = json::parse(drp::io::read_text(f));
    } catch (const json::exception& e) {
      throw drp::Error(drp::ErrorKind::kIo, "bad report " + f.string() + ": " + e.what());
    }
    rows.push_back({{"scenario", r.value("scenario", "")},
                    {"speed_kmh", r.value("speed_kmh", 0.0)},
                    {"attack_time_s", r.value("attack_time_s", json(nullptr))},
                    {"max_dev_m", r.value("max_dev_m", 0.0)},
                    {"patch_width_m", r.value("patch_width_m", 0.0)},
                    {"patch_length_m", r.value("patch_length_m", 0.0)},
                    {"source", fs::relative(f, opt.dir).string()}});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const json& a, const json& b) {
    return a["speed_kmh"].get<double>() > b["speed_kmh"].get<double>();
  });
  const json summary = {{"rows", rows}};
  write_json(fs::path(opt.dir) / "summary.json", summary);

  std::printf("%-16s %10s %16s %12s %14s\n", "scenario", "speed_kmh", "attack_time_s",
              "max_dev_m", "patch_WxL_m");
  for (const auto& r : rows) {
    const std::string at = r["attack_time_s"].is_null()
                               ? std::string("-")
                               : std::to_string(r["attack_time_s"].get<double>());
    char size[32];
    std::snprintf(size, sizeof size, "%.1fx%.1f", r["patch_width_m"].get<double>(),
                  r["patch_length_m"].get<double>());
    std::printf("%-16s %10.1f %16s %12.3f %14s\n", r["scenario"].get<std::string>().c_str(),
                r["speed_kmh"].get<double>(), at.c_str(), r["max_dev_m"].get<double>(), size);
  }
  return kExitOk;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop dirty road patch workbench"};
  app.require_subcommand(1);
  Options opt;

  auto* render = app.add_subcommand("render", "Render the scene and lane mask as PGM");
  render->add_option("--config", opt.config, "Scenario config (JSON)")->required();
  render->add_option("--out", opt.out, "Output directory");
  render->add_option("--patch", opt.patch, "Also write the scene with this patch composited");

  auto* benign = app.add_subcommand("benign", "Closed loop without a patch");
  benign->add_option("--config", opt.config, "Scenario config (JSON)")->required();
  benign->add_option("--duration", opt.duration, "Seconds to simulate")->required();
  benign->add_option("--out", opt.out, "Output directory");

  auto* optimize = app.add_subcommand("optimize", "Optimize a patch for the scenario");
  optimize->add_option("--config", opt.config, "Scenario config (JSON)")->required();
  optimize->add_option("--out", opt.out, "Output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Closed loop with a stored patch");
  evaluate->add_option("--config", opt.config, "Scenario config (JSON)")->required();
  evaluate->add_option("--patch", opt.patch, "Patch PGM written by optimize")->required();
  evaluate->add_option("--out", opt.out, "Output directory");
  evaluate->add_option("--dump-frames", opt.dump_frames, "Write every camera frame here");
  evaluate->add_flag("--require-success", opt.require_success,
                     "Exit with status 4 if the deviation goal is not reached");

  auto* report = app.add_subcommand("report", "Summarize report.json files under a directory");
  report->add_option("--dir", opt.dir, "Directory to scan")->required();

  for (auto* sub : {render, benign, optimize, evaluate}) {
    sub->add_flag("--deterministic", opt.deterministic, "Omit timestamps from reports");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return kExitConfig;
  }

  try {
    if (*render) return cmd_render(opt);
    if (*benign) return cmd_benign(opt);
    if (*optimize) return cmd_optimize(opt);
    if (*evaluate) return cmd_evaluate(opt);
    if (*report) return cmd_report(opt);
  } catch (const drp::Error& e) {
    print_error(std::string(drp::to_string(e.kind())), e.what());
    return e.kind() == drp::ErrorKind::kConfig ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    print_error("runtime-error", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
