#pragma once

#include "labelaug/conic.hpp"
#include "labelaug/image.hpp"

#include <optional>
#include <vector>

namespace labelaug {

/// Visible arc of a projected rim: the part of the ellipse between the two
/// silhouette tangency points that contains `apex`.
struct RimArc {
  Ellipse ellipse;
  Vec2 left = Vec2::Zero();
  Vec2 right = Vec2::Zero();
  Vec2 apex = Vec2::Zero();

  double chord() const { return (right - left).norm(); }
  /// True when p is on the same side of the chord as the visible arc.
  bool on_visible_side(const Vec2& p) const;
};

enum class Rim { Upper, Lower };

/// 2D description of a label wrapped on a cylinder: two rim arcs, the two
/// silhouette lines and their intersection (the vanishing point of the axis).
struct LabelRegion {
  RimArc upper;
  RimArc lower;
  HLine left;
  HLine right;
  HPoint vp;
  Rim wider = Rim::Upper;
  /// Mean geometric residual of the rim fits (zero for analytic regions).
  double upper_residual = 0.0;
  double lower_residual = 0.0;

  const RimArc& wider_rim() const { return wider == Rim::Upper ? upper : lower; }
  const RimArc& narrower_rim() const { return wider == Rim::Upper ? lower : upper; }
};

/// A region computed analytically from a pose; the endpoints of each visible
/// arc are exact silhouette tangency points.
using TargetRegion = LabelRegion;

/// Rim with the longer tangency chord.
Rim wider_of(const RimArc& upper, const RimArc& lower);

/// Arc-length parameterisation u in [0, 1] of a visible arc, from its left
/// endpoint to its right endpoint.
class ArcParam {
 public:
  explicit ArcParam(const RimArc& arc, int resolution = 4096);

  double length() const { return cumulative_.back(); }
  Vec2 at(double u) const;
  /// Normalised arc-length position of a point on (or near) the ellipse;
  /// values outside [0, 1] mean the point is off the visible arc.
  double fraction_of(const Vec2& p) const;

 private:
  double t_at(double u) const;

  Ellipse ellipse_;
  double t_start_ = 0.0;
  double span_ = 0.0;       ///< unsigned parameter span of the arc
  double direction_ = 1.0;  ///< +1 or -1 in parameter angle
  std::vector<double> cumulative_;
};

/// Direction of the longitudinal line through p (towards the vanishing point,
/// or along it when the vanishing point is at infinity), oriented from the
/// wider rim towards the narrower rim.
Vec2 longitudinal_direction(const LabelRegion& region, const Vec2& p);

/// Intersection of the line p + s*dir with the visible part of `arc`.
std::optional<Vec2> hit_visible_arc(const RimArc& arc, const Vec2& p, const Vec2& dir);

struct RegionCoordinates {
  double u = 0.0;  ///< transverse, 0 at the left silhouette, 1 at the right
  double v = 0.0;  ///< longitudinal, 0 on the wider rim, 1 on the narrower rim
};

/// Label coordinates of an image point, or nullopt when its longitudinal line
/// misses either rim arc.
std::optional<RegionCoordinates> region_coordinates(const LabelRegion& region, const ArcParam& wider,
                                                    const Vec2& p);

/// Pixels whose centre has region coordinates inside [0, 1] x [0, 1].
Mask region_mask(const LabelRegion& region, int width, int height);

}  // namespace labelaug
