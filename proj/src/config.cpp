#include "drp/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstdio>
#include <set>

#include "drp/io.hpp"
#include "json.hpp"

namespace drp::config {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::kConfig, path.empty() ? msg : path + ": " + msg);
}

// Reads optional keys from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) config_error(path_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    try {
      out = node_.at(key).get<T>();
    } catch (const json::exception&) {
      config_error(child(key), "wrong type");
    }
  }

  bool has(const char* key) const { return node_.contains(key); }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(node_.contains(key) ? node_.at(key) : empty, child(key));
  }

  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : node_.items()) {
      if (!seen_.count(item.key())) config_error(child(item.key().c_str()), "unknown field");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
void with_prefix(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    const std::string msg = e.what();
    // Messages that already carry a field path are passed through.
    if (msg.rfind(path, 0) == 0) throw Error(ErrorKind::kConfig, msg);
    throw Error(ErrorKind::kConfig, path + ": " + msg);
  }
}

std::string direction_name(attack::Direction d) {
  return d == attack::Direction::kRight ? "right" : "left";
}

std::string weight_mode_name(attack::WeightMode m) {
  return m == attack::WeightMode::kCoverage ? "coverage" : "uniform";
}

json to_json(const ScenarioConfig& c) {
  const auto& r = c.road;
  const auto& cam = c.camera;
  const auto& d = c.detector;
  const auto& a = c.attack;
  const auto& pl = c.patch.placement;
  return json{
      {"name", c.name},
      {"speed_kmh", c.speed_kmh},
      {"seed", c.seed},
      {"goal_m", c.goal},
      {"duration_s", c.duration_s},
      {"road",
       {{"lane_width", r.lane_width},
        {"lane_line_width", r.lane_line_width},
        {"line_intensity", r.line_intensity},
        {"asphalt_intensity", r.asphalt_intensity},
        {"texture_noise_amp", r.texture_noise_amp}}},
      {"scene",
       {{"meters_per_pixel", c.grid.meters_per_pixel},
        {"x_min", c.grid.x_min},
        {"length", c.grid.length},
        {"lateral_half_extent", c.grid.lateral_half_extent}}},
      {"camera",
       {{"focal", cam.focal},
        {"principal_point", {cam.principal_point.x, cam.principal_point.y}},
        {"height", cam.height},
        {"pitch", cam.pitch},
        {"image_width", cam.image_width},
        {"image_height", cam.image_height},
        {"model_input_rect",
         {cam.model_input_rect.x, cam.model_input_rect.y, cam.model_input_rect.width,
          cam.model_input_rect.height}},
        {"max_lateral_offset", cam.max_lateral_offset},
        {"max_heading_error", cam.max_heading_error}}},
      {"vehicle",
       {{"wheelbase", c.vehicle.wheelbase},
        {"dt", c.vehicle.dt},
        {"max_steer", c.vehicle.max_steer},
        {"initial", {{"x", c.initial.x}, {"y", c.initial.y}, {"heading", c.initial.heading}}}}},
      {"detector",
       {{"band_near", d.band_near},
        {"band_far", d.band_far},
        {"bands", d.bands},
        {"lateral_half_width", d.lateral_half_width},
        {"columns", d.columns},
        {"tau", d.tau},
        {"poly_degree", d.poly_degree},
        {"response_bias", d.response_bias},
        {"response_softness", d.response_softness},
        {"split_column", d.split_column},
        {"min_confidence", d.min_confidence}}},
      {"controller",
       {{"decision_points", c.controller.decision_points},
        {"lookahead", c.controller.lookahead},
        {"steer_gain", c.controller.steer_gain},
        {"max_steer", c.controller.max_steer}}},
      {"attack",
       {{"horizon_frames", a.horizon_frames},
        {"lambda_reg", a.lambda_reg},
        {"direction", direction_name(a.direction)},
        {"step_size", a.step_size},
        {"iterations", a.iterations},
        {"weight_mode", weight_mode_name(a.weight_mode)},
        {"gray_bounds", {a.v_min, a.v_max}},
        {"max_halvings", a.max_halvings},
        {"uniform_patch", a.uniform_patch}}},
      {"patch",
       {{"placement",
         {{"start_x", pl.start_x},
          {"center_y", pl.center_y},
          {"width", pl.width},
          {"length", pl.length},
          {"margin", pl.margin}}},
        {"meters_per_pixel", c.patch.meters_per_pixel},
        {"base_value", c.patch.base_value}}},
  };
}

template <typename T>
void get_pair(Section& s, const char* key, T& first, T& second) {
  std::vector<T> v;
  if (!s.has(key)) {
    s.get(key, v);
    return;
  }
  s.get(key, v);
  if (v.size() != 2) config_error(s.child(key), "expected two numbers");
  first = v[0];
  second = v[1];
}

ScenarioConfig from_json(const json& root) {
  ScenarioConfig c;
  Section top(root, "");
  top.get("name", c.name);
  top.get("speed_kmh", c.speed_kmh);
  top.get("seed", c.seed);
  top.get("goal_m", c.goal);
  top.get("duration_s", c.duration_s);

  Section road = top.sub("road");
  road.get("lane_width", c.road.lane_width);
  road.get("lane_line_width", c.road.lane_line_width);
  road.get("line_intensity", c.road.line_intensity);
  road.get("asphalt_intensity", c.road.asphalt_intensity);
  road.get("texture_noise_amp", c.road.texture_noise_amp);
  road.finish();

  Section grid = top.sub("scene");
  grid.get("meters_per_pixel", c.grid.meters_per_pixel);
  grid.get("x_min", c.grid.x_min);
  grid.get("length", c.grid.length);
  grid.get("lateral_half_extent", c.grid.lateral_half_extent);
  grid.finish();

  Section cam = top.sub("camera");
  cam.get("focal", c.camera.focal);
  get_pair(cam, "principal_point", c.camera.principal_point.x, c.camera.principal_point.y);
  cam.get("height", c.camera.height);
  cam.get("pitch", c.camera.pitch);
  cam.get("image_width", c.camera.image_width);
  cam.get("image_height", c.camera.image_height);
  if (cam.has("model_input_rect")) {
    std::vector<int> rect;
    cam.get("model_input_rect", rect);
    if (rect.size() != 4) config_error(cam.child("model_input_rect"), "expected [x, y, w, h]");
    c.camera.model_input_rect = {rect[0], rect[1], rect[2], rect[3]};
  } else {
    std::vector<int> unused;
    cam.get("model_input_rect", unused);
  }
  cam.get("max_lateral_offset", c.camera.max_lateral_offset);
  cam.get("max_heading_error", c.camera.max_heading_error);
  cam.finish();

  Section veh = top.sub("vehicle");
  veh.get("wheelbase", c.vehicle.wheelbase);
  veh.get("dt", c.vehicle.dt);
  veh.get("max_steer", c.vehicle.max_steer);
  Section init = veh.sub("initial");
  init.get("x", c.initial.x);
  init.get("y", c.initial.y);
  init.get("heading", c.initial.heading);
  init.finish();
  veh.finish();

  Section det = top.sub("detector");
  det.get("band_near", c.detector.band_near);
  det.get("band_far", c.detector.band_far);
  det.get("bands", c.detector.bands);
  det.get("lateral_half_width", c.detector.lateral_half_width);
  det.get("columns", c.detector.columns);
  det.get("tau", c.detector.tau);
  det.get("poly_degree", c.detector.poly_degree);
  det.get("response_bias", c.detector.response_bias);
  det.get("response_softness", c.detector.response_softness);
  c.detector.split_column = c.detector.columns / 2;
  det.get("split_column", c.detector.split_column);
  det.get("min_confidence", c.detector.min_confidence);
  det.finish();

  Section ctl = top.sub("controller");
  ctl.get("decision_points", c.controller.decision_points);
  ctl.get("lookahead", c.controller.lookahead);
  ctl.get("steer_gain", c.controller.steer_gain);
  ctl.get("max_steer", c.controller.max_steer);
  ctl.finish();

  Section atk = top.sub("attack");
  atk.get("horizon_frames", c.attack.horizon_frames);
  atk.get("lambda_reg", c.attack.lambda_reg);
  std::string direction = direction_name(c.attack.direction);
  atk.get("direction", direction);
  if (direction == "right") {
    c.attack.direction = attack::Direction::kRight;
  } else if (direction == "left") {
    c.attack.direction = attack::Direction::kLeft;
  } else {
    config_error("attack.direction", "expected \"left\" or \"right\"");
  }
  atk.get("step_size", c.attack.step_size);
  atk.get("iterations", c.attack.iterations);
  std::string mode = weight_mode_name(c.attack.weight_mode);
  atk.get("weight_mode", mode);
  if (mode == "coverage") {
    c.attack.weight_mode = attack::WeightMode::kCoverage;
  } else if (mode == "uniform") {
    c.attack.weight_mode = attack::WeightMode::kUniform;
  } else {
    config_error("attack.weight_mode", "expected \"coverage\" or \"uniform\"");
  }
  get_pair(atk, "gray_bounds", c.attack.v_min, c.attack.v_max);
  atk.get("max_halvings", c.attack.max_halvings);
  atk.get("uniform_patch", c.attack.uniform_patch);
  atk.finish();

  Section patch = top.sub("patch");
  Section place = patch.sub("placement");
  place.get("start_x", c.patch.placement.start_x);
  place.get("center_y", c.patch.placement.center_y);
  place.get("width", c.patch.placement.width);
  place.get("length", c.patch.placement.length);
  place.get("margin", c.patch.placement.margin);
  place.finish();
  patch.get("meters_per_pixel", c.patch.meters_per_pixel);
  patch.get("base_value", c.patch.base_value);
  patch.finish();

  top.finish();
  return c;
}

void resolve(ScenarioConfig& c) {
  if (const char* env = std::getenv("DRP_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long seed = std::strtoull(env, &end, 10);
    if (end == nullptr || *end != '\0') config_error("DRP_SEED", "not an unsigned integer");
    c.seed = seed;
  }
  c.road.texture_seed = c.seed;
  c.attack.seed = c.seed;
  c.initial.speed = motion::kmh_to_mps(c.speed_kmh);
  if (c.grid.length == 0.0) {
    c.grid.length = std::ceil(c.initial.speed * std::max(c.duration_s, 10.0) + 80.0);
  }
  c.road.road_length = c.grid.x_min + c.grid.length;
}

}  // namespace

scene::Extent ScenarioConfig::extent() const {
  return {grid.x_min, grid.x_min + grid.length, -grid.lateral_half_extent,
          grid.lateral_half_extent};
}

scene::PatchState ScenarioConfig::initial_patch() const {
  return scene::make_uniform_patch(patch.placement, patch.meters_per_pixel, patch.base_value,
                                   attack.v_min, attack.v_max, patch.base_value);
}

void validate(const ScenarioConfig& c) {
  if (!(c.speed_kmh > 0.0)) config_error("speed_kmh", "must be positive");
  if (!(c.goal >= 0.0)) config_error("goal_m", "must be non-negative");
  if (!(c.duration_s > 0.0)) config_error("duration_s", "must be positive");
  if (!(c.grid.meters_per_pixel > 0.0)) config_error("scene.meters_per_pixel", "must be positive");
  if (!(c.grid.length > 0.0)) config_error("scene.length", "must be positive");
  if (!(c.grid.lateral_half_extent > 0.0)) {
    config_error("scene.lateral_half_extent", "must be positive");
  }
  with_prefix("road", [&] { c.road.validate(); });
  with_prefix("camera", [&] { c.camera.validate(); });
  with_prefix("vehicle", [&] { c.vehicle.validate(); });
  with_prefix("detector", [&] { c.detector.validate(); });
  with_prefix("controller", [&] { c.controller.validate_against(c.detector); });
  with_prefix("attack", [&] { c.attack.validate(); });
  with_prefix("patch.placement", [&] { scene::validate_placement(c.patch.placement, c.road); });
  with_prefix("patch", [&] { c.initial_patch().validate(c.road); });
  const scene::PatchPlacement& pl = c.patch.placement;
  if (pl.start_x <= c.initial.x || pl.x_max() > c.grid.x_min + c.grid.length) {
    config_error("patch.placement", "patch must lie ahead of the start and inside the scene");
  }
}

ScenarioConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error("", std::string("parse error: ") + e.what());
  }
  ScenarioConfig cfg = from_json(root);
  resolve(cfg);
  validate(cfg);
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  return parse_config(text);
}

std::string canonical_json(const ScenarioConfig& cfg, int indent) {
  return to_json(cfg).dump(indent);
}

std::string config_hash(const ScenarioConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical_json(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Workbench::Workbench(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  const scene::Extent ext = cfg_.extent();
  scene_ = scene::render_road_bev(cfg_.road, ext, cfg_.grid.meters_per_pixel);
  mask_ = scene::lane_line_mask(cfg_.road, ext, cfg_.grid.meters_per_pixel);
  detector_ = std::make_unique<detector::LaneDetector>(cfg_.detector, cfg_.camera);
}

attack::LoopContext Workbench::context() const {
  return {cfg_.road, scene_, mask_, cfg_.camera, *detector_, cfg_.controller, cfg_.vehicle};
}

}  // namespace drp::config
