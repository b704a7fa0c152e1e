#pragma once

#include <vector>

#include "drp/detector.hpp"
#include "drp/motion.hpp"

namespace drp::controller {

struct ControllerConfig {
  std::vector<double> decision_points{5.0, 10.0, 15.0, 20.0, 25.0};
  double lookahead = 15.0;
  double steer_gain = 1.0;
  double max_steer = 0.5;

  void validate() const;
  // Additionally checks decision points and lookahead against the path range.
  void validate_against(const detector::DetectorConfig& detector) const;
};

// Analytic slope p'(d) at every decision point. Throws kOutOfRange for a
// point outside the path's valid range.
std::vector<double> path_derivatives(const detector::DesiredPath& path,
                                     const std::vector<double>& decision_points);

// Pure pursuit toward (lookahead, p(lookahead)), clamped to +-max_steer.
double steer_from_path(const detector::DesiredPath& path, const ControllerConfig& cfg,
                       const motion::VehicleParams& params);

}  // namespace drp::controller
