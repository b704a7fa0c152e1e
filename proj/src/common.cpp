#include "drp/common.hpp"

namespace drp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kConstraintViolation: return "constraint-violation";
    case ErrorKind::kOutOfExtent: return "out-of-extent";
    case ErrorKind::kDegenerateGeometry: return "degenerate-geometry";
    case ErrorKind::kNoGroundIntersection: return "no-ground-intersection";
    case ErrorKind::kIncompleteModelInput: return "incomplete-model-input";
    case ErrorKind::kAdjointMismatch: return "adjoint-mismatch";
    case ErrorKind::kIllConditionedFit: return "ill-conditioned-fit";
    case ErrorKind::kDetectionFailed: return "detection-failed";
    case ErrorKind::kStaleForwardState: return "stale-forward-state";
    case ErrorKind::kOutOfRange: return "out-of-range";
    case ErrorKind::kNoVisibility: return "no-visibility";
    case ErrorKind::kConfig: return "config-error";
    case ErrorKind::kIo: return "io-error";
  }
  return "unknown";
}

}  // namespace drp
