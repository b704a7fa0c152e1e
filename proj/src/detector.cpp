#include "drp/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace drp::detector {
namespace {

constexpr double kMaxCondition = 1e12;

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double response_of(double sample, const DetectorConfig& cfg) {
  return cfg.response_softness * softplus((sample - cfg.response_bias) / cfg.response_softness);
}

double response_slope(double sample, const DetectorConfig& cfg) {
  return sigmoid((sample - cfg.response_bias) / cfg.response_softness);
}

}  // namespace

void DetectorConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kInvalidArgument, msg); };
  if (!(tau > 0.0)) fail("detector.tau must be positive");
  if (poly_degree < 1) fail("detector.poly_degree must be >= 1");
  if (bands < poly_degree + 1) fail("detector.bands must be >= poly_degree + 1");
  if (!(band_near > 0.0) || !(band_far > band_near)) fail("detector bands need 0 < near < far");
  if (!(lateral_half_width > 0.0) || columns < 4) fail("detector needs >= 4 lateral columns");
  if (split_column < 2 || split_column > columns - 2) fail("detector.split_column out of range");
  if (!(response_softness > 0.0)) fail("detector.response_softness must be positive");
  if (!(min_confidence >= 0.0)) fail("detector.min_confidence must be non-negative");
}

double DetectorConfig::band_distance(int band) const {
  return band_near + band * (band_far - band_near) / (bands - 1);
}

double DetectorConfig::column_offset(int column) const {
  return -lateral_half_width + column * column_spacing();
}

double DetectorConfig::column_spacing() const { return 2.0 * lateral_half_width / (columns - 1); }

SoftArgmax soft_argmax(std::span<const double> response, double tau) {
  if (response.empty()) throw Error(ErrorKind::kInvalidArgument, "empty response row");
  if (!(tau > 0.0)) throw Error(ErrorKind::kInvalidArgument, "tau must be positive");
  SoftArgmax out;
  out.weights.resize(response.size());
  const double peak = *std::max_element(response.begin(), response.end());
  out.confident = peak > 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < response.size(); ++i) {
    out.weights[i] = std::exp((response[i] - peak) / tau);
    total += out.weights[i];
  }
  double index = 0.0;
  for (std::size_t i = 0; i < response.size(); ++i) {
    out.weights[i] /= total;
    index += static_cast<double>(i) * out.weights[i];
  }
  out.index = index;
  return out;
}

void soft_argmax_backward(const SoftArgmax& sa, double tau, double upstream,
                          std::span<double> grad) {
  if (upstream == 0.0) return;
  for (std::size_t i = 0; i < sa.weights.size(); ++i) {
    grad[i] += upstream * sa.weights[i] * (static_cast<double>(i) - sa.index) / tau;
  }
}

WlsFit fit_polynomial_wls(std::span<const double> d, std::span<const double> u,
                          std::span<const double> w, int degree) {
  const auto n = static_cast<Eigen::Index>(d.size());
  if (degree < 0 || u.size() != d.size() || w.size() != d.size()) {
    throw Error(ErrorKind::kInvalidArgument, "fit inputs must have matching lengths");
  }
  std::vector<double> support;
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w[i] < 0.0 || !std::isfinite(w[i])) {
      throw Error(ErrorKind::kInvalidArgument, "fit weights must be finite and non-negative");
    }
    if (w[i] > 0.0) {
      support.push_back(d[i]);
      scale = std::max(scale, std::abs(d[i]));
    }
  }
  std::sort(support.begin(), support.end());
  const auto distinct = std::unique(support.begin(), support.end()) - support.begin();
  if (distinct < degree + 1 || !(scale > 0.0)) {
    std::ostringstream msg;
    msg << "need " << degree + 1 << " distinct weighted points, have " << distinct;
    throw Error(ErrorKind::kIllConditionedFit, msg.str());
  }

  const Eigen::Index m = degree + 1;
  Eigen::MatrixXd vander(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = d[i] / scale;
    double p = 1.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      vander(i, k) = p;
      p *= s;
    }
  }
  const Eigen::Map<const Eigen::VectorXd> weights(w.data(), n);
  const Eigen::MatrixXd vtw = vander.transpose() * weights.asDiagonal();
  const Eigen::MatrixXd normal = vtw * vander;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(condition < kMaxCondition)) {
    std::ostringstream msg;
    msg << "normal equations ill-conditioned (condition estimate " << condition << ")";
    throw Error(ErrorKind::kIllConditionedFit, msg.str());
  }

  WlsFit fit;
  fit.condition = condition;
  fit.sensitivity = normal.ldlt().solve(vtw);
  // Undo the abscissa normalisation: c_k = c'_k / scale^k.
  double inv = 1.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    fit.sensitivity.row(k) *= inv;
    inv /= scale;
  }
  const Eigen::Map<const Eigen::VectorXd> values(u.data(), n);
  const Eigen::VectorXd coeffs = fit.sensitivity * values;
  fit.coeffs.assign(coeffs.data(), coeffs.data() + m);
  return fit;
}

double poly_eval(std::span<const double> coeffs, double x) {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double poly_derivative(std::span<const double> coeffs, double x) {
  double acc = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 1;) acc = acc * x + static_cast<double>(k) * coeffs[k];
  return acc;
}

LaneDetector::LaneDetector(const DetectorConfig& cfg, const camera::CameraConfig& camera)
    : cfg_(cfg), camera_(camera) {
  cfg_.validate();
  camera_.validate();
  support_ = Mask(camera_.image_height, camera_.image_width, 0);
  const camera::PixelRect& rect = camera_.model_input_rect;
  points_.reserve(static_cast<std::size_t>(cfg_.bands) * cfg_.columns);
  for (int b = 0; b < cfg_.bands; ++b) {
    for (int c = 0; c < cfg_.columns; ++c) {
      const Vec2 px =
          camera::vehicle_ground_to_image(camera_, {cfg_.band_distance(b), cfg_.column_offset(c)});
      SamplePoint p;
      p.u = static_cast<int>(std::floor(px.x));
      p.v = static_cast<int>(std::floor(px.y));
      p.fu = px.x - p.u;
      p.fv = px.y - p.v;
      if (!rect.contains(p.u, p.v) || !rect.contains(p.u + 1, p.v + 1)) {
        std::ostringstream msg;
        msg << "detector grid point (" << cfg_.band_distance(b) << " m, " << cfg_.column_offset(c)
            << " m) falls outside the model input rectangle";
        throw Error(ErrorKind::kInvalidArgument, msg.str());
      }
      support_(p.v, p.u) = support_(p.v, p.u + 1) = 1;
      support_(p.v + 1, p.u) = support_(p.v + 1, p.u + 1) = 1;
      points_.push_back(p);
    }
  }
}

double LaneDetector::sample(const GrayImage& pixels, const SamplePoint& p) const {
  return bilerp(pixels(p.v, p.u), pixels(p.v, p.u + 1), pixels(p.v + 1, p.u),
                pixels(p.v + 1, p.u + 1), p.fv, p.fu);
}

LaneDetection LaneDetector::detect(const Frame& frame, DetectionTape* tape) const {
  if (frame.pixels.rows() != camera_.image_height || frame.pixels.cols() != camera_.image_width) {
    throw Error(ErrorKind::kInvalidArgument, "frame size does not match the camera");
  }
  const camera::PixelRect& rect = camera_.model_input_rect;
  for (int v = rect.y; v < rect.y + rect.height; ++v) {
    for (int u = rect.x; u < rect.x + rect.width; ++u) {
      if (frame.valid(v, u) == 0) {
        throw Error(ErrorKind::kIncompleteModelInput, "model input rectangle not fully valid");
      }
    }
  }

  const int bands = cfg_.bands;
  const int cols = cfg_.columns;
  const int split = cfg_.split_column;
  GrayImage samples(bands, cols);
  std::vector<double> responses(static_cast<std::size_t>(cols));

  LaneDetection det;
  det.band_distances.resize(bands);
  det.left_positions.resize(bands);
  det.right_positions.resize(bands);
  det.left_weights.resize(bands);
  det.right_weights.resize(bands);
  std::vector<SoftArgmax> left(bands);
  std::vector<SoftArgmax> right(bands);

  const double spacing = cfg_.column_spacing();
  for (int b = 0; b < bands; ++b) {
    det.band_distances[b] = cfg_.band_distance(b);
    for (int c = 0; c < cols; ++c) {
      samples(b, c) = sample(frame.pixels, points_[static_cast<std::size_t>(b) * cols + c]);
      responses[c] = response_of(samples(b, c), cfg_);
    }
    const std::span<const double> row(responses);
    right[b] = soft_argmax(row.first(split), cfg_.tau);
    left[b] = soft_argmax(row.subspan(split), cfg_.tau);
    det.right_positions[b] = cfg_.column_offset(0) + right[b].index * spacing;
    det.left_positions[b] = cfg_.column_offset(split) + left[b].index * spacing;

    const double right_peak = *std::max_element(row.begin(), row.begin() + split);
    const double left_peak = *std::max_element(row.begin() + split, row.end());
    det.right_weights[b] = right[b].confident && right_peak >= cfg_.min_confidence ? 1.0 : 0.0;
    det.left_weights[b] = left[b].confident && left_peak >= cfg_.min_confidence ? 1.0 : 0.0;
  }

  const auto low = [](const std::vector<double>& w) {
    return std::count(w.begin(), w.end(), 0.0);
  };
  if (2 * low(det.left_weights) > bands || 2 * low(det.right_weights) > bands) {
    std::ostringstream msg;
    msg << "low confidence on " << low(det.left_weights) << " left / " << low(det.right_weights)
        << " right bands of " << bands;
    throw Error(ErrorKind::kDetectionFailed, msg.str());
  }

  WlsFit left_fit = fit_polynomial_wls(det.band_distances, det.left_positions, det.left_weights,
                                       cfg_.poly_degree);
  WlsFit right_fit = fit_polynomial_wls(det.band_distances, det.right_positions,
                                        det.right_weights, cfg_.poly_degree);
  det.left_coeffs = left_fit.coeffs;
  det.right_coeffs = right_fit.coeffs;

  if (tape != nullptr) {
    tape->frame_index = frame.index;
    tape->pose = frame.pose;
    tape->samples = std::move(samples);
    tape->left = std::move(left);
    tape->right = std::move(right);
    tape->left_weights = det.left_weights;
    tape->right_weights = det.right_weights;
    tape->left_sensitivity = std::move(left_fit.sensitivity);
    tape->right_sensitivity = std::move(right_fit.sensitivity);
  }
  return det;
}

void LaneDetector::backward(const DetectionTape& tape, std::span<const double> path_upstream,
                            GrayImage& out) const {
  const auto m = static_cast<Eigen::Index>(cfg_.poly_degree + 1);
  if (static_cast<Eigen::Index>(path_upstream.size()) != m) {
    throw Error(ErrorKind::kInvalidArgument, "upstream gradient has wrong length");
  }
  if (out.rows() != camera_.image_height || out.cols() != camera_.image_width) {
    throw Error(ErrorKind::kInvalidArgument, "gradient image does not match the camera");
  }
  // The path is the coefficient-wise mean of both lines.
  const Eigen::VectorXd line_upstream =
      0.5 * Eigen::Map<const Eigen::VectorXd>(path_upstream.data(), m);
  const Eigen::VectorXd d_left = tape.left_sensitivity.transpose() * line_upstream;
  const Eigen::VectorXd d_right = tape.right_sensitivity.transpose() * line_upstream;

  const int cols = cfg_.columns;
  const int split = cfg_.split_column;
  const double spacing = cfg_.column_spacing();
  std::vector<double> d_response(static_cast<std::size_t>(cols));
  for (int b = 0; b < cfg_.bands; ++b) {
    if (d_left[b] == 0.0 && d_right[b] == 0.0) continue;
    std::fill(d_response.begin(), d_response.end(), 0.0);
    const std::span<double> grad(d_response);
    soft_argmax_backward(tape.right[b], cfg_.tau, d_right[b] * spacing, grad.first(split));
    soft_argmax_backward(tape.left[b], cfg_.tau, d_left[b] * spacing, grad.subspan(split));
    for (int c = 0; c < cols; ++c) {
      const double g = d_response[c] * response_slope(tape.samples(b, c), cfg_);
      if (g == 0.0) continue;
      const SamplePoint& p = points_[static_cast<std::size_t>(b) * cols + c];
      out(p.v, p.u) += g * (1.0 - p.fv) * (1.0 - p.fu);
      out(p.v, p.u + 1) += g * (1.0 - p.fv) * p.fu;
      out(p.v + 1, p.u) += g * p.fv * (1.0 - p.fu);
      out(p.v + 1, p.u + 1) += g * p.fv * p.fu;
    }
  }
}

LaneDetection detect_lanes(const Frame& frame, const LaneDetector& detector, DetectionTape* tape) {
  return detector.detect(frame, tape);
}

DesiredPath desired_path(const LaneDetection& det, const DetectorConfig& cfg) {
  if (det.left_coeffs.empty() || det.left_coeffs.size() != det.right_coeffs.size()) {
    throw Error(ErrorKind::kDetectionFailed, "both lane polynomials are required");
  }
  DesiredPath path;
  path.coeffs.resize(det.left_coeffs.size());
  for (std::size_t k = 0; k < path.coeffs.size(); ++k) {
    path.coeffs[k] = 0.5 * (det.left_coeffs[k] + det.right_coeffs[k]);
  }
  path.d_min = cfg.band_near;
  path.d_max = cfg.band_far;
  return path;
}

GrayImage detector_gradient(const Frame& frame, const LaneDetector& detector,
                            const DetectionTape& tape, std::span<const double> path_upstream) {
  if (tape.frame_index != frame.index || !(tape.pose == frame.pose)) {
    throw Error(ErrorKind::kStaleForwardState, "tape was recorded on a different frame");
  }
  // Re-detect into a scratch tape and compare the grid samples bit for bit.
  DetectionTape check;
  detector.detect(frame, &check);
  if (!(check.samples == tape.samples)) {
    throw Error(ErrorKind::kStaleForwardState, "frame pixels changed since the forward pass");
  }
  GrayImage out(frame.pixels.rows(), frame.pixels.cols(), 0.0);
  detector.backward(tape, path_upstream, out);
  return out;
}

}  // namespace drp::detector
