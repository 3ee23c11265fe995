#pragma once

// Projective primitives in the image plane: homogeneous points and lines,
// parametric ellipses with their point/dual conic forms, tangents, common
// external tangents and the 1D cross-ratio.
//
// Image coordinates are pixels with pixel centres at integer positions,
// x to the right and y down.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <limits>
#include <span>
#include <vector>

namespace labelaug {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }
inline Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

/// Homogeneous image point. w == 0 encodes a point at infinity.
struct HPoint {
  Vec3 h{0.0, 0.0, 1.0};

  static HPoint finite(double x, double y) { return {Vec3(x, y, 1.0)}; }
  static HPoint finite(const Vec2& p) { return finite(p.x(), p.y()); }
  static HPoint at_infinity(double dx, double dy) { return HPoint{Vec3(dx, dy, 0.0)}.normalized(); }

  bool is_infinite() const { return h.z() == 0.0; }
  /// Euclidean position; only meaningful for finite points.
  Vec2 point() const { return {h.x() / h.z(), h.y() / h.z()}; }
  /// Unit direction of a point at infinity.
  Vec2 direction() const { return Vec2(h.x(), h.y()).normalized(); }

  /// Finite points get w = 1. Points whose w is negligible relative to
  /// (x, y) are snapped to w = 0 with a unit (x, y) whose largest component
  /// is positive.
  HPoint normalized() const;
};

/// Homogeneous line l1*x + l2*y + l3 = 0 with l1^2 + l2^2 = 1.
struct HLine {
  Vec3 h{1.0, 0.0, 0.0};

  static HLine from_coefficients(const Vec3& l);
  static HLine through(const Vec2& p, const Vec2& q);
  static HLine through(const HPoint& p, const HPoint& q);

  Vec2 normal() const { return {h.x(), h.y()}; }
  Vec2 direction() const { return {-h.y(), h.x()}; }
  double signed_distance(const Vec2& p) const { return h.x() * p.x() + h.y() * p.y() + h.z(); }
  /// Direction angle folded into [0, pi).
  double angle() const;
};

HPoint intersect(const HLine& l, const HLine& m);

/// Smallest angle between two undirected lines, in [0, pi/2].
double angle_between(const HLine& l, const HLine& m);

struct ClosestPoint {
  Vec2 point;
  double t = 0.0;         ///< parametric angle of the foot point
  double distance = 0.0;  ///< signed: negative inside
};

/// Ellipse (x, y) = c + R(theta) * (a cos t, b sin t).
struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double a = 1.0;
  double b = 1.0;
  double theta = 0.0;

  /// Validates and canonicalises (a >= b > 0, theta in [0, pi), theta = 0
  /// for circles).
  static Ellipse make(double cx, double cy, double a, double b, double theta);

  Vec2 center() const { return {cx, cy}; }
  Vec2 major_axis() const;
  Vec2 minor_axis() const;
  Vec2 point_at(double t) const;
  /// Outward unit normal at parameter t.
  Vec2 normal_at(double t) const;
  double parameter_of(const Vec2& p) const;

  /// Affine map taking the unit circle onto this ellipse.
  Mat3 from_unit_circle() const;
  Mat3 to_unit_circle() const;
  /// Point conic, negative inside. Scaled so that it equals |local|^2 - 1
  /// where local are the unit-circle coordinates.
  Mat3 conic() const;
  /// Dual (line) conic normalised so that entry (2,2) is -1.
  Mat3 dual_conic() const;
  /// |local|^2 - 1: zero on the ellipse, negative inside.
  double implicit(const Vec2& p) const;

  ClosestPoint closest_point(const Vec2& q) const;
  /// max over the ellipse of n . (x - c) for unit n.
  double support(const Vec2& n) const;
  Eigen::AlignedBox2d bounding_box() const;
};

/// Converts a symmetric point-conic matrix (any scale and sign) to an ellipse.
/// Throws DegenerateFit when the conic is not a real non-degenerate ellipse.
Ellipse ellipse_from_conic(const Mat3& conic);

/// Converts a dual (line) conic of any scale to an ellipse. Well conditioned
/// for very flat ellipses, where the point-conic route loses the centre.
Ellipse ellipse_from_dual_conic(const Mat3& dual);

/// l . C* . l with l normalised and C* = Ellipse::dual_conic(); zero for a
/// tangent line, units of px^2.
double tangency_residual(const Ellipse& e, const HLine& l);

/// Discriminant of the quadratic obtained by substituting the line into the
/// ellipse, expressed in unit-circle coordinates. Zero for tangent lines,
/// positive when the line cuts the ellipse twice.
double intersection_discriminant(const Ellipse& e, const HLine& l);

/// Parameters s (ascending) where p + s * d meets the ellipse. Empty when
/// the line misses.
std::vector<double> intersect_line(const Ellipse& e, const Vec2& p, const Vec2& d);

struct EllipseFit {
  Ellipse ellipse;
  double sampson_rms = 0.0;
  double geometric_rms = 0.0;
  double geometric_mean = 0.0;
};

/// Direct least-squares ellipse fit followed by a geometric-distance
/// Gauss-Newton (Levenberg-Marquardt damped) refinement.
EllipseFit fit_ellipse(std::span<const Vec2> points);

struct TangentPair {
  HLine first;
  HLine second;
  Vec2 touch_first;
  Vec2 touch_second;
};

/// The two tangents from q to e. q may be at infinity, in which case the
/// tangents are parallel to its direction.
TangentPair tangents_from_point(const Ellipse& e, const HPoint& q);

struct CommonTangents {
  /// With n pointing from e1 towards e2, `left` lies on the -v side where
  /// v = (n_y, -n_x). For e1 above e2 in image coordinates this is the
  /// image-left tangent.
  HLine left;
  HLine right;
  HPoint vp;
  Vec2 left_touch1, left_touch2;    ///< on e1, e2
  Vec2 right_touch1, right_touch2;  ///< on e1, e2
  int iterations = 0;
};

/// Bisection search for the common external tangents. The search runs along
/// the mid-gap line of a separating strip between the ellipses: each external
/// tangent crosses it exactly once, and for a point Q on it the mismatch
/// between the corresponding tangents from Q to e1 and e2 is monotone.
class ExternalTangentSearch {
 public:
  ExternalTangentSearch(const Ellipse& e1, const Ellipse& e2);

  enum class Side { Left, Right };

  Vec2 origin() const { return origin_; }
  Vec2 axis() const { return axis_; }        ///< v, direction of the search line
  Vec2 separation() const { return normal_; }  ///< n, from e1 towards e2
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  Vec2 point_at(double s) const { return origin_ + s * axis_; }

  /// Signed angle between the e1 tangent and the e2 tangent seen from Q(s).
  double mismatch(Side side, double s) const;

  struct Hit {
    HLine line;
    Vec2 touch1, touch2;
    double s = 0.0;
    int iterations = 0;
  };
  Hit solve(Side side) const;

 private:
  struct Touches {
    Vec2 t1, t2;
  };
  Touches touches(Side side, double s) const;

  Ellipse e1_, e2_;
  Vec2 origin_, axis_, normal_;
  double lower_ = 0.0, upper_ = 0.0;
};

inline constexpr int kTangentSearchMaxIterations = 200;
inline constexpr double kTangentSlopeTolerance = 1e-10;
inline constexpr double kTangencyTolerance = 1e-6;

CommonTangents common_external_tangents(const Ellipse& e1, const Ellipse& e2);

inline constexpr double kAtInfinity = std::numeric_limits<double>::infinity();

/// (AC * BD) / (AD * BC) for signed positions along a line. d may be
/// +/-infinity, giving AC / BC. Returns infinity when b == c.
double cross_ratio(double a, double b, double c, double d);

/// Position b with cross_ratio(a, b, c, d) == kappa.
double solve_fourth_point(double a, double c, double d, double kappa);

}  // namespace labelaug
