#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "drp/camera.hpp"
#include "drp/common.hpp"

namespace drp::detector {

using camera::Frame;

// Surrogate lane detector settings. The detector samples the camera frame on a
// vehicle-frame ground grid: `bands` longitudinal rows between band_near and
// band_far, `columns` lateral samples across +-lateral_half_width. Columns
// below split_column search for the right line (y < 0), the rest for the left.
struct DetectorConfig {
  double band_near = 5.0;
  double band_far = 50.0;
  int bands = 32;
  double lateral_half_width = 3.0;
  int columns = 96;
  double tau = 0.05;
  int poly_degree = 3;
  double response_bias = 0.4;
  // Width of the softplus knee used in place of a hard clamp at the bias.
  double response_softness = 0.05;
  int split_column = 48;
  double min_confidence = 0.1;

  void validate() const;
  double band_distance(int band) const;
  double column_offset(int column) const;
  double column_spacing() const;
};

struct SoftArgmax {
  double index = 0.0;
  std::vector<double> weights;
  bool confident = false;
};

// Softmax-weighted mean index. `confident` is false for an all-zero row.
SoftArgmax soft_argmax(std::span<const double> response, double tau);

// d(index)/d(response_i) = w_i * (i - index) / tau, scaled by `upstream` and
// added into `grad`.
void soft_argmax_backward(const SoftArgmax& sa, double tau, double upstream,
                          std::span<double> grad);

struct WlsFit {
  std::vector<double> coeffs;  // ascending powers
  // d(coeffs)/d(u): (degree + 1) x n. Zero columns for zero-weight points.
  Eigen::MatrixXd sensitivity;
  double condition = 0.0;
};

// Weighted least squares polynomial fit u(d). Internally fits in d / max|d| so
// the normal equations stay well conditioned; coefficients are returned in
// the original units.
WlsFit fit_polynomial_wls(std::span<const double> d, std::span<const double> u,
                          std::span<const double> w, int degree);

double poly_eval(std::span<const double> coeffs, double x);
double poly_derivative(std::span<const double> coeffs, double x);

struct LaneDetection {
  std::vector<double> left_coeffs;
  std::vector<double> right_coeffs;
  std::vector<double> band_distances;
  std::vector<double> left_positions;
  std::vector<double> right_positions;
  std::vector<double> left_weights;
  std::vector<double> right_weights;
};

struct DesiredPath {
  std::vector<double> coeffs;
  double d_min = 0.0;
  double d_max = 0.0;

  double at(double d) const { return poly_eval(coeffs, d); }
  double slope(double d) const { return poly_derivative(coeffs, d); }
};

// Forward record kept by detect() so that gradient() can run the chain rule
// without re-deriving anything from the frame.
struct DetectionTape {
  int frame_index = -1;
  motion::VehicleState pose;
  GrayImage samples;  // bands x columns
  std::vector<SoftArgmax> left;
  std::vector<SoftArgmax> right;
  std::vector<double> left_weights;
  std::vector<double> right_weights;
  Eigen::MatrixXd left_sensitivity;
  Eigen::MatrixXd right_sensitivity;
};

class LaneDetector {
 public:
  LaneDetector(const DetectorConfig& cfg, const camera::CameraConfig& camera);

  const DetectorConfig& config() const { return cfg_; }
  const camera::CameraConfig& camera() const { return camera_; }

  LaneDetection detect(const Frame& frame, DetectionTape* tape = nullptr) const;

  // Adds dJ/d(frame pixels) into `out` for upstream = dJ/d(path coeffs).
  void backward(const DetectionTape& tape, std::span<const double> path_upstream,
                GrayImage& out) const;

  // Whether any grid sample reads pixel (v, u).
  const Mask& support() const { return support_; }

 private:
  struct SamplePoint {
    int u = 0;
    int v = 0;
    double fu = 0.0;
    double fv = 0.0;
  };

  double sample(const GrayImage& pixels, const SamplePoint& p) const;

  DetectorConfig cfg_;
  camera::CameraConfig camera_;
  std::vector<SamplePoint> points_;  // bands x columns, row-major
  Mask support_;
};

LaneDetection detect_lanes(const Frame& frame, const LaneDetector& detector,
                           DetectionTape* tape = nullptr);

DesiredPath desired_path(const LaneDetection& det, const DetectorConfig& cfg);

// Gradient image over the frame for upstream = dJ/d(path coeffs). Throws
// kStaleForwardState when `tape` was not recorded on this frame.
GrayImage detector_gradient(const Frame& frame, const LaneDetector& detector,
                            const DetectionTape& tape, std::span<const double> path_upstream);

}  // namespace drp::detector
