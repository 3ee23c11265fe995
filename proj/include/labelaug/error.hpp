#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace labelaug {

enum class ErrorCode {
  InvalidArgument,
  TooFewPoints,
  DegenerateFit,
  PointInsideEllipse,
  PointOnEllipse,
  EllipsesOverlap,
  NoConvergence,
  CoincidentAnchors,
  NoSolutionInSegment,
  ImageTooSmall,
  NoRimFound,
  BehindCamera,
  DegenerateView,
  CameraInsideCylinder,
  EmptyTexture,
  NoIntersection,
  RegionTooNarrow,
  EmptyTarget,
  DimensionMismatch,
  EmptyGallery,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace labelaug
