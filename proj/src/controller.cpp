#include "drp/controller.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace drp::controller {

void ControllerConfig::validate() const {
  if (decision_points.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "controller.decision_points must be nonempty");
  }
  if (!std::is_sorted(decision_points.begin(), decision_points.end()) ||
      std::adjacent_find(decision_points.begin(), decision_points.end()) !=
          decision_points.end()) {
    throw Error(ErrorKind::kInvalidArgument, "controller.decision_points must be ascending");
  }
  if (!(lookahead > 0.0)) throw Error(ErrorKind::kInvalidArgument, "lookahead must be positive");
  if (!(steer_gain > 0.0)) throw Error(ErrorKind::kInvalidArgument, "steer_gain must be positive");
  if (!(max_steer > 0.0)) throw Error(ErrorKind::kInvalidArgument, "max_steer must be positive");
}

void ControllerConfig::validate_against(const detector::DetectorConfig& detector) const {
  validate();
  const auto outside = [&](double d) { return d < detector.band_near || d > detector.band_far; };
  if (outside(decision_points.front()) || outside(decision_points.back()) || outside(lookahead)) {
    throw Error(ErrorKind::kOutOfRange,
                "controller.decision_points / lookahead must lie within the detector bands");
  }
}

std::vector<double> path_derivatives(const detector::DesiredPath& path,
                                     const std::vector<double>& decision_points) {
  std::vector<double> out;
  out.reserve(decision_points.size());
  for (double d : decision_points) {
    if (d < path.d_min || d > path.d_max) {
      std::ostringstream msg;
      msg << "decision point " << d << " m outside path range [" << path.d_min << ", "
          << path.d_max << "]";
      throw Error(ErrorKind::kOutOfRange, msg.str());
    }
    out.push_back(path.slope(d));
  }
  return out;
}

double steer_from_path(const detector::DesiredPath& path, const ControllerConfig& cfg,
                       const motion::VehicleParams& params) {
  if (cfg.lookahead < path.d_min || cfg.lookahead > path.d_max) {
    throw Error(ErrorKind::kOutOfRange, "lookahead outside path range");
  }
  const double target = path.at(cfg.lookahead);
  const double steer = std::atan(cfg.steer_gain * 2.0 * params.wheelbase * target /
                                 (cfg.lookahead * cfg.lookahead));
  const double limit = std::min(cfg.max_steer, params.max_steer);
  return std::clamp(steer, -limit, limit);
}

}  // namespace drp::controller
