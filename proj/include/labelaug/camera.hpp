#pragma once

// Virtual pinhole camera and posed cylinder. Camera frame: origin at the
// camera centre, +z forward, +x right, +y down (image rows). At the identity
// pose the bottle axis points along -y and the label mid-height point sits
// at (0, 0, 150) mm.

#include "labelaug/conic.hpp"
#include "labelaug/image.hpp"
#include "labelaug/region.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace labelaug {

struct CameraIntrinsics {
  double focal_mm = 6.8;
  double pixel_pitch_mm = 0.0075;
  int width = 640;
  int height = 480;
  /// Principal point; NaN means the image centre (width/2, height/2).
  double cx = std::numeric_limits<double>::quiet_NaN();
  double cy = std::numeric_limits<double>::quiet_NaN();

  double fx() const { return focal_mm / pixel_pitch_mm; }
  double fy() const { return fx(); }
  double principal_x() const { return std::isnan(cx) ? width / 2.0 : cx; }
  double principal_y() const { return std::isnan(cy) ? height / 2.0 : cy; }
  Mat3 matrix() const;
  void validate() const;
};

struct CylinderModel {
  double radius_mm = 38.0;
  /// Label band along the axis, relative to the label mid-height point.
  double label_top_mm = 25.0;
  double label_bottom_mm = -25.0;

  void validate() const;
};

/// Rigid placement of the bottle: rotation about the camera x axis, then
/// about the camera z axis (both through the label mid-height point), then
/// translation of that point to t. No spin about the bottle's own axis.
/// Positive rot_x tips the label top away from the camera; positive rot_z
/// turns the image of the axis clockwise on screen.
struct Pose {
  double rot_x_deg = 0.0;
  double rot_z_deg = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double tz = 150.0;

  static Pose identity() { return {}; }
  Mat3 rotation() const;
  Vec3 translation() const { return {tx, ty, tz}; }
  /// Unit axis direction (label top side).
  Vec3 axis() const;
};

Vec2 project_point(const Vec3& p, const CameraIntrinsics& cam);

/// Image of the circle of the cylinder at signed height `height_mm` along
/// the axis (relative to the label mid-height point).
Ellipse project_rim_circle(const Pose& pose, double height_mm, const CylinderModel& cyl,
                           const CameraIntrinsics& cam);

struct Silhouette {
  HLine left;
  HLine right;
  HPoint vp;
  /// Unit normals of the two tangent planes through the camera centre.
  Vec3 left_plane;
  Vec3 right_plane;
};

Silhouette silhouette_lines(const Pose& pose, const CylinderModel& cyl, const CameraIntrinsics& cam);

TargetRegion target_region(const Pose& pose, const CylinderModel& cyl, const CameraIntrinsics& cam);

struct Rendering {
  Image image;
  Mask mask;
};

struct RenderOptions {
  /// Supersampling factor per axis; colour is the coverage-weighted mean.
  int supersample = 3;
};

/// Ray-cast reference renderer: every pixel ray is intersected with the
/// cylinder and the flat texture is looked up at (azimuth * radius, height).
/// The texture wraps the full circumference; its top row is the label top.
/// Mask marks pixels whose centre ray lands on the label.
Rendering render_reference(const Pose& pose, const CylinderModel& cyl, const CameraIntrinsics& cam,
                           const Image& texture, const RenderOptions& options = {});

/// Surface coordinates of the label hit by the ray through pixel (x, y):
/// azimuth (radians, 0 facing the camera at identity) and axial height.
struct SurfaceHit {
  double azimuth = 0.0;
  double height = 0.0;
};
std::optional<SurfaceHit> cast_ray(const Pose& pose, const CylinderModel& cyl, const CameraIntrinsics& cam,
                                   double x, double y);

}  // namespace labelaug
