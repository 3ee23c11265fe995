#include "labelaug/camera.hpp"

#include "labelaug/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <thread>

namespace labelaug {

namespace {

constexpr double kDeg = kPi / 180.0;

struct BottleFrame {
  Vec3 axis;     // label-top direction
  Vec3 radial1;  // bottle right at identity
  Vec3 radial2;  // away from the camera at identity
  Vec3 origin;   // label mid-height point
};

BottleFrame frame_of(const Pose& pose) {
  const Mat3 r = pose.rotation();
  return {r * Vec3(0.0, -1.0, 0.0), r * Vec3(1.0, 0.0, 0.0), r * Vec3(0.0, 0.0, 1.0), pose.translation()};
}

}  // namespace

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx(), 0.0, principal_x(),  //
      0.0, fy(), principal_y(),    //
      0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(focal_mm > 0.0) || !(pixel_pitch_mm > 0.0)) {
    fail(ErrorCode::InvalidArgument, "focal length and pixel pitch must be positive");
  }
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "camera image size must be positive");
}

void CylinderModel::validate() const {
  if (!(radius_mm > 0.0)) fail(ErrorCode::InvalidArgument, "cylinder radius must be positive");
  if (!(label_top_mm > label_bottom_mm)) fail(ErrorCode::InvalidArgument, "label top must be above label bottom");
}

Mat3 Pose::rotation() const {
  // Positive rot_x tips the label top away from the camera.
  const double ax = -rot_x_deg * kDeg, az = rot_z_deg * kDeg;
  Mat3 rx, rz;
  rx << 1.0, 0.0, 0.0,                     //
      0.0, std::cos(ax), -std::sin(ax),    //
      0.0, std::sin(ax), std::cos(ax);
  rz << std::cos(az), -std::sin(az), 0.0,  //
      std::sin(az), std::cos(az), 0.0,     //
      0.0, 0.0, 1.0;
  return rz * rx;
}

Vec3 Pose::axis() const { return rotation() * Vec3(0.0, -1.0, 0.0); }

Vec2 project_point(const Vec3& p, const CameraIntrinsics& cam) {
  if (!(p.z() > 0.0)) fail(ErrorCode::BehindCamera, "point is not in front of the camera");
  return {cam.fx() * p.x() / p.z() + cam.principal_x(), cam.fy() * p.y() / p.z() + cam.principal_y()};
}

Ellipse project_rim_circle(const Pose& pose, double height_mm, const CylinderModel& cyl,
                           const CameraIntrinsics& cam) {
  cyl.validate();
  cam.validate();
  const BottleFrame f = frame_of(pose);
  const Vec3 center = f.origin + height_mm * f.axis;
  // Camera centre on the supporting plane: the circle images to a segment.
  if (std::abs(f.axis.dot(center)) <= 1e-9 * center.norm()) {
    fail(ErrorCode::DegenerateView, "camera centre lies in the plane of the rim circle");
  }
  const double depth_reach = cyl.radius_mm * std::hypot(f.radial1.z(), f.radial2.z());
  if (!(center.z() - depth_reach > 0.0)) {
    fail(ErrorCode::BehindCamera, "rim circle is not entirely in front of the camera");
  }
  // The circle's dual conic pushed through the plane-to-image homography.
  Mat3 plane;
  plane.col(0) = f.radial1 * cyl.radius_mm;
  plane.col(1) = f.radial2 * cyl.radius_mm;
  plane.col(2) = center;
  const Mat3 h = cam.matrix() * plane;
  return ellipse_from_dual_conic(h * Vec3(1.0, 1.0, -1.0).asDiagonal() * h.transpose());}

namespace {

struct TangentPlanes {
  Vec3 left, right;  // unit plane normals
  Vec3 towards_axis;  // unit, camera -> axis, perpendicular to the axis
};

TangentPlanes tangent_planes(const BottleFrame& f, double radius) {
  const Vec3 t_perp = f.origin - f.origin.dot(f.axis) * f.axis;
  const double rho = t_perp.norm();
  if (!(rho > radius)) fail(ErrorCode::CameraInsideCylinder, "camera centre is inside the cylinder");
  const Vec3 w1 = t_perp / rho;
  const Vec3 w2 = f.axis.cross(w1);
  const double c = radius / rho;
  const double s = std::sqrt(1.0 - c * c);
  const Vec3 m_plus = c * w1 + s * w2;
  const Vec3 m_minus = c * w1 - s * w2;
  // The plane touches the cylinder along axis - radius * m; the left one
  // touches on the -radial1 side.
  TangentPlanes out;
  if (m_plus.dot(f.radial1) > m_minus.dot(f.radial1)) {
    out.left = m_plus;
    out.right = m_minus;
  } else {
    out.left = m_minus;
    out.right = m_plus;
  }
  out.towards_axis = w1;
  return out;
}

}  // namespace

Silhouette silhouette_lines(const Pose& pose, const CylinderModel& cyl, const CameraIntrinsics& cam) {
  cyl.validate();
  cam.validate();
  const BottleFrame f = frame_of(pose);
  const TangentPlanes planes = tangent_planes(f, cyl.radius_mm);
  const Mat3 k_inv_t = cam.matrix().inverse().transpose();
  Silhouette s;
  s.left = HLine::from_coefficients(k_inv_t * planes.left);
  s.right = HLine::from_coefficients(k_inv_t * planes.right);
  s.vp = HPoint{cam.matrix() * f.axis}.normalized();
  s.left_plane = planes.left;
  s.right_plane = planes.right;
  return s;
}

TargetRegion target_region(const Pose& pose, const CylinderModel& cyl, const CameraIntrinsics& cam) {
  const Silhouette sil = silhouette_lines(pose, cyl, cam);
  const BottleFrame f = frame_of(pose);
  const TangentPlanes planes = tangent_planes(f, cyl.radius_mm);
  const auto rim = [&](double height) {
    const Vec3 center = f.origin + height * f.axis;
    RimArc arc;
    arc.ellipse = project_rim_circle(pose, height, cyl, cam);
    arc.left = project_point(center - cyl.radius_mm * planes.left, cam);
    arc.right = project_point(center - cyl.radius_mm * planes.right, cam);
    arc.apex = project_point(center - cyl.radius_mm * planes.towards_axis, cam);
    return arc;
  };
  TargetRegion region;
  region.upper = rim(cyl.label_top_mm);
  region.lower = rim(cyl.label_bottom_mm);
  region.left = sil.left;
  region.right = sil.right;
  region.vp = sil.vp;
  region.wider = wider_of(region.upper, region.lower);
  return region;
}

std::optional<SurfaceHit> cast_ray(const Pose& pose, const CylinderModel& cyl, const CameraIntrinsics& cam,
                                   double x, double y) {
  const BottleFrame f = frame_of(pose);
  const Vec3 d((x - cam.principal_x()) / cam.fx(), (y - cam.principal_y()) / cam.fy(), 1.0);
  const Vec3 d_perp = d - d.dot(f.axis) * f.axis;
  const Vec3 t_perp = f.origin - f.origin.dot(f.axis) * f.axis;
  const double qa = d_perp.squaredNorm();
  const double qb = -2.0 * d_perp.dot(t_perp);
  const double qc = t_perp.squaredNorm() - cyl.radius_mm * cyl.radius_mm;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (!(qa > 0.0) || disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  double s = (-qb - root) / (2.0 * qa);
  if (!(s > 0.0)) s = (-qb + root) / (2.0 * qa);
  if (!(s > 0.0)) return std::nullopt;
  const Vec3 rel = s * d - f.origin;
  const double h = rel.dot(f.axis);
  if (h < cyl.label_bottom_mm || h > cyl.label_top_mm) return std::nullopt;
  const Vec3 radial = rel - h * f.axis;
  return SurfaceHit{std::atan2(radial.dot(f.radial1), -radial.dot(f.radial2)), h};
}

Rendering render_reference(const Pose& pose, const CylinderModel& cyl, const CameraIntrinsics& cam,
                           const Image& texture, const RenderOptions& options) {
  if (texture.empty()) fail(ErrorCode::EmptyTexture, "texture is empty");
  cyl.validate();
  cam.validate();
  if (options.supersample < 1) fail(ErrorCode::InvalidArgument, "supersample must be >= 1");
  if (!(pose.tz > cyl.radius_mm)) fail(ErrorCode::CameraInsideCylinder, "bottle must be in front of the camera");
  silhouette_lines(pose, cyl, cam);  // validates camera placement

  const Image tex = to_rgb(texture);
  const double band = cyl.label_top_mm - cyl.label_bottom_mm;
  const auto texel = [&](const SurfaceHit& hit) {
    double u = (hit.azimuth / (2.0 * kPi) + 0.5) * tex.width - 0.5;
    const double v = std::clamp((cyl.label_top_mm - hit.height) / band * tex.height - 0.5, 0.0,
                                static_cast<double>(tex.height - 1));
    u = std::fmod(u, static_cast<double>(tex.width));
    if (u < 0.0) u += tex.width;
    const int x0 = static_cast<int>(u) % tex.width;
    const int x1 = (x0 + 1) % tex.width;
    const int y0 = std::min(static_cast<int>(v), tex.height - 1);
    const int y1 = std::min(y0 + 1, tex.height - 1);
    const double fx = u - std::floor(u), fy = v - y0;
    Rgb out{};
    for (int c = 0; c < 3; ++c) {
      const double top = (1.0 - fx) * tex.at(x0, y0, c) + fx * tex.at(x1, y0, c);
      const double bot = (1.0 - fx) * tex.at(x0, y1, c) + fx * tex.at(x1, y1, c);
      out[c] = (1.0 - fy) * top + fy * bot;
    }
    return out;
  };

  Rendering r{make_rgb(cam.width, cam.height), make_mask(cam.width, cam.height)};
  const int ss = options.supersample;
  const auto render_rows = [&](int y_begin, int y_end) {
    for (int y = y_begin; y < y_end; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        if (cast_ray(pose, cyl, cam, x, y)) r.mask.at(x, y) = 255;
        Rgb acc{};
        for (int j = 0; j < ss; ++j) {
          for (int i = 0; i < ss; ++i) {
            const double sx = x + (i + 0.5) / ss - 0.5;
            const double sy = y + (j + 0.5) / ss - 0.5;
            if (const auto hit = cast_ray(pose, cyl, cam, sx, sy)) {
              const Rgb c = texel(*hit);
              for (int k = 0; k < 3; ++k) acc[k] += c[k];
            }
          }
        }
        for (int k = 0; k < 3; ++k) r.image.at(x, y, k) = clamp_u8(acc[k] / (ss * ss));
      }
    }
  };

  const int workers = static_cast<int>(std::clamp(std::thread::hardware_concurrency(), 1u, 16u));
  if (workers == 1) {
    render_rows(0, cam.height);
  } else {
    std::vector<std::jthread> pool;
    const int chunk = (cam.height + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int y0 = w * chunk, y1 = std::min(cam.height, y0 + chunk);
      if (y0 < y1) pool.emplace_back(render_rows, y0, y1);
    }
  }
  return r;
}

}  // namespace labelaug
