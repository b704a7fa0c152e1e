#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace drp {

enum class ErrorKind {
  kInvalidArgument,
  kConstraintViolation,
  kOutOfExtent,
  kDegenerateGeometry,
  kNoGroundIntersection,
  kIncompleteModelInput,
  kAdjointMismatch,
  kIllConditionedFit,
  kDetectionFailed,
  kStaleForwardState,
  kOutOfRange,
  kNoVisibility,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// All recoverable failures in the library surface as drp::Error; kind() is
// what callers branch on, what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Dense row-major raster. Row index first everywhere in this code base.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) {
      throw Error(ErrorKind::kInvalidArgument, "grid dimensions must be non-negative");
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int r, int c) const { return r >= 0 && r < rows_ && c >= 0 && c < cols_; }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  std::span<T> row(int r) {
    return std::span<T>(data_).subspan(static_cast<std::size_t>(r) * cols_, cols_);
  }
  std::span<const T> row(int r) const {
    return std::span<const T>(data_).subspan(static_cast<std::size_t>(r) * cols_, cols_);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Grid& other) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using GrayImage = Grid<double>;
using Mask = Grid<std::uint8_t>;

// Lerp-form bilinear blend: exact (bit-identical) on constant neighbourhoods.
inline double bilerp(double p00, double p01, double p10, double p11, double fr, double fc) {
  const double top = p00 + fc * (p01 - p00);
  const double bottom = p10 + fc * (p11 - p10);
  return top + fr * (bottom - top);
}

// Splits a continuous coordinate into a base index and fraction such that
// base and base + 1 are both inside [0, n). Requires n >= 2 and 0 <= x <= n - 1.
inline void split_coordinate(double x, int n, int& base, double& frac) {
  base = static_cast<int>(x);
  if (base >= n - 1) base = n - 2;
  if (base < 0) base = 0;
  frac = x - base;
}

}  // namespace drp
