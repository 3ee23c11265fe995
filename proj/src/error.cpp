#include "labelaug/error.hpp"

namespace labelaug {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::TooFewPoints: return "too few points";
    case ErrorCode::DegenerateFit: return "degenerate fit";
    case ErrorCode::PointInsideEllipse: return "point inside ellipse";
    case ErrorCode::PointOnEllipse: return "point on ellipse";
    case ErrorCode::EllipsesOverlap: return "ellipses overlap";
    case ErrorCode::NoConvergence: return "no convergence";
    case ErrorCode::CoincidentAnchors: return "coincident anchors";
    case ErrorCode::NoSolutionInSegment: return "no solution in segment";
    case ErrorCode::ImageTooSmall: return "image too small";
    case ErrorCode::NoRimFound: return "no rim found";
    case ErrorCode::BehindCamera: return "behind camera";
    case ErrorCode::DegenerateView: return "degenerate view";
    case ErrorCode::CameraInsideCylinder: return "camera inside cylinder";
    case ErrorCode::EmptyTexture: return "empty texture";
    case ErrorCode::NoIntersection: return "no intersection";
    case ErrorCode::RegionTooNarrow: return "region too narrow";
    case ErrorCode::EmptyTarget: return "empty target";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::EmptyGallery: return "empty gallery";
    case ErrorCode::ParseError: return "parse error";
    case ErrorCode::IoError: return "I/O error";
  }
  return "unknown error";
}

}  // namespace labelaug
