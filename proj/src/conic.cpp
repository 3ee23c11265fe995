#include "labelaug/conic.hpp"

#include "labelaug/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace labelaug {

// ---------------------------------------------------------------------------
// Homogeneous points and lines
// ---------------------------------------------------------------------------

HPoint HPoint::normalized() const {
  const double xy = std::hypot(h.x(), h.y());
  if (xy == 0.0 && h.z() == 0.0) fail(ErrorCode::InvalidArgument, "homogeneous point (0,0,0)");
  // |w| / |(x,y)| is the inverse distance from the origin in pixels.
  if (h.z() == 0.0 || std::abs(h.z()) < 1e-14 * xy) {
    Vec3 d(h.x() / xy, h.y() / xy, 0.0);
    const double lead = std::abs(d.x()) >= std::abs(d.y()) ? d.x() : d.y();
    if (lead < 0.0) d = -d;
    return {d};
  }
  return {Vec3(h.x() / h.z(), h.y() / h.z(), 1.0)};
}

HLine HLine::from_coefficients(const Vec3& l) {
  const double n = std::hypot(l.x(), l.y());
  if (!(n > 0.0)) fail(ErrorCode::InvalidArgument, "line at infinity has no finite representation");
  Vec3 out = l / n;
  if (out.x() < 0.0 || (out.x() == 0.0 && out.y() < 0.0)) out = -out;
  return {out};
}

HLine HLine::through(const Vec2& p, const Vec2& q) {
  return from_coefficients(Vec3(p.x(), p.y(), 1.0).cross(Vec3(q.x(), q.y(), 1.0)));
}

HLine HLine::through(const HPoint& p, const HPoint& q) { return from_coefficients(p.h.cross(q.h)); }

double HLine::angle() const {
  double ang = std::atan2(direction().y(), direction().x());
  if (ang < 0.0) ang += kPi;
  if (ang >= kPi) ang -= kPi;
  return ang;
}

HPoint intersect(const HLine& l, const HLine& m) { return HPoint{l.h.cross(m.h)}.normalized(); }

double angle_between(const HLine& l, const HLine& m) {
  const double c = std::abs(l.normal().dot(m.normal()));
  const double s = std::abs(cross2(l.normal(), m.normal()));
  return std::atan2(s, c);
}

// ---------------------------------------------------------------------------
// Ellipse
// ---------------------------------------------------------------------------

namespace {

double wrap_pi(double theta) {
  theta = std::fmod(theta, kPi);
  if (theta < 0.0) theta += kPi;
  if (theta >= kPi) theta -= kPi;
  return theta;
}

}  // namespace

Ellipse Ellipse::make(double cx, double cy, double a, double b, double theta) {
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(a) || !std::isfinite(b) ||
      !std::isfinite(theta) || !(a > 0.0) || !(b > 0.0)) {
    std::ostringstream os;
    os << "invalid ellipse (" << cx << ", " << cy << ", " << a << ", " << b << ", " << theta << ")";
    fail(ErrorCode::InvalidArgument, os.str());
  }
  if (b > a) {
    std::swap(a, b);
    theta += kPi / 2.0;
  }
  theta = wrap_pi(theta);
  if (a - b <= 1e-9 * a) theta = 0.0;
  return Ellipse{cx, cy, a, b, theta};
}

Vec2 Ellipse::major_axis() const { return {std::cos(theta), std::sin(theta)}; }
Vec2 Ellipse::minor_axis() const { return {-std::sin(theta), std::cos(theta)}; }

Vec2 Ellipse::point_at(double t) const {
  return center() + a * std::cos(t) * major_axis() + b * std::sin(t) * minor_axis();
}

Vec2 Ellipse::normal_at(double t) const {
  const Vec2 n = b * std::cos(t) * major_axis() + a * std::sin(t) * minor_axis();
  return n.normalized();
}

double Ellipse::parameter_of(const Vec2& p) const {
  const Vec2 d = p - center();
  return std::atan2(d.dot(minor_axis()) / b, d.dot(major_axis()) / a);
}

Mat3 Ellipse::from_unit_circle() const {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat3 h;
  h << a * c, -b * s, cx,  //
      a * s, b * c, cy,    //
      0.0, 0.0, 1.0;
  return h;
}

Mat3 Ellipse::to_unit_circle() const {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat3 h;
  h << c / a, s / a, -(c * cx + s * cy) / a,  //
      -s / b, c / b, (s * cx - c * cy) / b,    //
      0.0, 0.0, 1.0;
  return h;
}

Mat3 Ellipse::conic() const {
  const Mat3 g = to_unit_circle();
  return g.transpose() * Vec3(1.0, 1.0, -1.0).asDiagonal() * g;
}

Mat3 Ellipse::dual_conic() const {
  const Mat3 h = from_unit_circle();
  return h * Vec3(1.0, 1.0, -1.0).asDiagonal() * h.transpose();
}

double Ellipse::implicit(const Vec2& p) const {
  const Vec2 d = p - center();
  const double u = d.dot(major_axis()) / a;
  const double v = d.dot(minor_axis()) / b;
  return u * u + v * v - 1.0;
}

double Ellipse::support(const Vec2& n) const {
  const double u = a * n.dot(major_axis());
  const double v = b * n.dot(minor_axis());
  return std::hypot(u, v);
}

Eigen::AlignedBox2d Ellipse::bounding_box() const {
  const double hx = support(Vec2(1.0, 0.0));
  const double hy = support(Vec2(0.0, 1.0));
  return Eigen::AlignedBox2d(Vec2(cx - hx, cy - hy), Vec2(cx + hx, cy + hy));
}

namespace {

// Root of F(s) = (r0*z0/(s+r0))^2 + (z1/(s+1))^2 - 1 by bisection; see
// Eberly, "Distance from a point to an ellipse".
double ellipse_root(double r0, double z0, double z1, double g) {
  const double n0 = r0 * z0;
  double s0 = z1 - 1.0;
  double s1 = g < 0.0 ? 0.0 : std::hypot(n0, z1) - 1.0;
  double s = 0.0;
  for (int i = 0; i < 1100; ++i) {
    s = 0.5 * (s0 + s1);
    if (s == s0 || s == s1) break;
    const double ratio0 = n0 / (s + r0);
    const double ratio1 = z1 / (s + 1.0);
    const double gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
    if (gs > 0.0) {
      s0 = s;
    } else if (gs < 0.0) {
      s1 = s;
    } else {
      break;
    }
  }
  return s;
}

// Closest point on an axis-aligned ellipse (e0 >= e1) to a first-quadrant
// query (y0, y1 >= 0).
Vec2 closest_first_quadrant(double e0, double e1, double y0, double y1) {
  if (y1 > 0.0) {
    if (y0 > 0.0) {
      const double z0 = y0 / e0, z1 = y1 / e1;
      const double g = z0 * z0 + z1 * z1 - 1.0;
      if (g == 0.0) return {y0, y1};
      const double r0 = (e0 / e1) * (e0 / e1);
      const double sbar = ellipse_root(r0, z0, z1, g);
      return {r0 * y0 / (sbar + r0), y1 / (sbar + 1.0)};
    }
    return {0.0, e1};
  }
  const double numer0 = e0 * y0, denom0 = e0 * e0 - e1 * e1;
  if (numer0 < denom0) {
    const double xde0 = numer0 / denom0;
    return {e0 * xde0, e1 * std::sqrt(std::max(0.0, 1.0 - xde0 * xde0))};
  }
  return {e0, 0.0};
}

}  // namespace

ClosestPoint Ellipse::closest_point(const Vec2& q) const {
  const Vec2 d = q - center();
  const double u = d.dot(major_axis());
  const double v = d.dot(minor_axis());
  Vec2 foot = closest_first_quadrant(a, b, std::abs(u), std::abs(v));
  foot.x() = std::copysign(foot.x(), u);
  foot.y() = std::copysign(foot.y(), v);
  ClosestPoint out;
  out.t = std::atan2(foot.y() / b, foot.x() / a);
  out.point = center() + foot.x() * major_axis() + foot.y() * minor_axis();
  const double dist = std::hypot(u - foot.x(), v - foot.y());
  out.distance = implicit(q) < 0.0 ? -dist : dist;
  return out;
}

Ellipse ellipse_from_dual_conic(const Mat3& dual) {
  Mat3 d = 0.5 * (dual + dual.transpose());
  if (!(std::abs(d(2, 2)) > 0.0) || !d.allFinite()) fail(ErrorCode::DegenerateFit, "dual conic has no finite centre");
  d /= -d(2, 2);
  const Vec2 c(-d(0, 2), -d(1, 2));
  // d = [[R diag(a^2, b^2) R^T - c c^T, -c], [-c^T, -1]]
  const Eigen::Matrix2d m = d.block<2, 2>(0, 0) + c * c.transpose();
  const double mean = 0.5 * (m(0, 0) + m(1, 1));
  const double rad = std::hypot(0.5 * (m(0, 0) - m(1, 1)), m(0, 1));
  const double a2 = mean + rad;
  const double b2 = mean - rad;
  if (!(b2 > 1e-14 * a2)) fail(ErrorCode::DegenerateFit, "dual conic is not an ellipse");
  const double theta = 0.5 * std::atan2(2.0 * m(0, 1), m(0, 0) - m(1, 1));
  return Ellipse::make(c.x(), c.y(), std::sqrt(a2), std::sqrt(b2), theta);
}

Ellipse ellipse_from_conic(const Mat3& conic) {
  Mat3 m = 0.5 * (conic + conic.transpose());
  if (m(0, 0) + m(1, 1) < 0.0) m = -m;
  const double scale = m.block<2, 2>(0, 0).cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) fail(ErrorCode::DegenerateFit, "conic is not an ellipse");
  m /= scale;

  const double mean = 0.5 * (m(0, 0) + m(1, 1));
  const double half_diff = 0.5 * (m(0, 0) - m(1, 1));
  const double rad = std::hypot(half_diff, m(0, 1));
  const double lambda_large = mean + rad;
  // Product form avoids cancellation for very flat ellipses.
  const double det2 = m(0, 0) * m(1, 1) - m(0, 1) * m(0, 1);
  const double lambda_small = det2 / lambda_large;
  if (!(lambda_small > 1e-14 * lambda_large)) fail(ErrorCode::DegenerateFit, "conic is not an ellipse");

  const double cx = (-m(0, 2) * m(1, 1) + m(1, 2) * m(0, 1)) / det2;
  const double cy = (-m(1, 2) * m(0, 0) + m(0, 2) * m(0, 1)) / det2;
  const double f0 = m(2, 2) + m(0, 2) * cx + m(1, 2) * cy;
  if (!(f0 < 0.0)) fail(ErrorCode::DegenerateFit, "conic has no real points");

  const double a = std::sqrt(-f0 / lambda_small);
  const double b = std::sqrt(-f0 / lambda_large);
  // Eigenvector of the larger eigenvalue sits at half the angle of
  // (m00 - m11, 2 m01); the major axis is perpendicular to it.
  const double theta = 0.5 * std::atan2(2.0 * m(0, 1), m(0, 0) - m(1, 1)) + kPi / 2.0;
  return Ellipse::make(cx, cy, a, b, theta);
}

double tangency_residual(const Ellipse& e, const HLine& l) {
  const Vec3 n = HLine::from_coefficients(l.h).h;
  return n.dot(e.dual_conic() * n);
}

double intersection_discriminant(const Ellipse& e, const HLine& l) {
  // Foot of the perpendicular from the centre, then walk along the line.
  const Vec2 p = e.center() - l.signed_distance(e.center()) * l.normal();
  const Mat3 g = e.to_unit_circle();
  const Vec2 pl = (g * Vec3(p.x(), p.y(), 1.0)).head<2>();
  const Vec2 dl = g.block<2, 2>(0, 0) * l.direction();
  const double alpha = dl.squaredNorm();
  const double beta = pl.dot(dl);
  const double gamma = pl.squaredNorm() - 1.0;
  return (beta * beta - alpha * gamma) / alpha;
}

std::vector<double> intersect_line(const Ellipse& e, const Vec2& p, const Vec2& d) {
  const Mat3 g = e.to_unit_circle();
  const Vec2 pl = (g * Vec3(p.x(), p.y(), 1.0)).head<2>();
  const Vec2 dl = g.block<2, 2>(0, 0) * d;
  const double alpha = dl.squaredNorm();
  const double beta = pl.dot(dl);
  const double gamma = pl.squaredNorm() - 1.0;
  const double disc = beta * beta - alpha * gamma;
  if (disc < 0.0) return {};
  const double root = std::sqrt(disc);
  // Numerically stable pair.
  const double q = -(beta + std::copysign(root, beta));
  double s1 = q / alpha;
  double s2 = q != 0.0 ? gamma / q : -beta / alpha;
  if (s1 > s2) std::swap(s1, s2);
  return {s1, s2};
}

// ---------------------------------------------------------------------------
// Ellipse fitting
// ---------------------------------------------------------------------------

namespace {

// Constrained algebraic fit (4AC - B^2 = 1) in the numerically stable
// block formulation. Returns the point conic in normalised coordinates.
Mat3 direct_conic_fit(std::span<const Vec2> pts) {
  using Mat = Eigen::Matrix3d;
  Mat s1 = Mat::Zero(), s2 = Mat::Zero(), s3 = Mat::Zero();
  for (const Vec2& p : pts) {
    const Vec3 quad(p.x() * p.x(), p.x() * p.y(), p.y() * p.y());
    const Vec3 lin(p.x(), p.y(), 1.0);
    s1 += quad * quad.transpose();
    s2 += quad * lin.transpose();
    s3 += lin * lin.transpose();
  }
  Eigen::FullPivLU<Mat> s3_lu(s3);
  s3_lu.setThreshold(1e-12);
  if (s3_lu.rank() < 3) fail(ErrorCode::DegenerateFit, "points are collinear");
  const Mat t = -s3_lu.solve(s2.transpose());
  const Mat m = s1 + s2 * t;
  Mat reduced;
  reduced.row(0) = m.row(2) / 2.0;
  reduced.row(1) = -m.row(1);
  reduced.row(2) = m.row(0) / 2.0;

  Eigen::EigenSolver<Mat> solver(reduced);
  const auto vecs = solver.eigenvectors();
  int best = -1;
  double best_cond = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Vec3 v = vecs.col(i).real();
    const double cond = 4.0 * v(0) * v(2) - v(1) * v(1);
    if (cond > best_cond) {
      best_cond = cond;
      best = i;
    }
  }
  if (best < 0) fail(ErrorCode::DegenerateFit, "no elliptical solution");
  const Vec3 quad = vecs.col(best).real();
  const Vec3 lin = t * quad;
  Mat3 c;
  c << quad(0), quad(1) / 2.0, lin(0) / 2.0,  //
      quad(1) / 2.0, quad(2), lin(1) / 2.0,    //
      lin(0) / 2.0, lin(1) / 2.0, lin(2);
  return c;
}

struct GeometricCost {
  double sum_sq = 0.0;
  double sum_abs = 0.0;
};

GeometricCost geometric_cost(const Ellipse& e, std::span<const Vec2> pts) {
  GeometricCost c;
  for (const Vec2& p : pts) {
    const double d = e.closest_point(p).distance;
    c.sum_sq += d * d;
    c.sum_abs += std::abs(d);
  }
  return c;
}

Ellipse refine_geometric(Ellipse e, std::span<const Vec2> pts) {
  using Vec5 = Eigen::Matrix<double, 5, 1>;
  using Mat5 = Eigen::Matrix<double, 5, 5>;
  double cost = geometric_cost(e, pts).sum_sq;
  double lambda = 1e-3;
  for (int iter = 0; iter < 30 && cost > 0.0; ++iter) {
    Mat5 jtj = Mat5::Zero();
    Vec5 jtr = Vec5::Zero();
    const double c = std::cos(e.theta), s = std::sin(e.theta);
    for (const Vec2& p : pts) {
      const ClosestPoint cp = e.closest_point(p);
      const Vec2 n = e.normal_at(cp.t);
      const double r = n.dot(p - cp.point);
      const double ct = std::cos(cp.t), st = std::sin(cp.t);
      const Vec2 dx_dtheta(-(e.a * ct * s + e.b * st * c), e.a * ct * c - e.b * st * s);
      Vec5 j;
      j << -n.x(), -n.y(), -n.dot(Vec2(c, s)) * ct, -n.dot(Vec2(-s, c)) * st, -n.dot(dx_dtheta);
      jtj += j * j.transpose();
      jtr += j * r;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 10; ++attempt) {
      Mat5 lhs = jtj;
      for (int k = 0; k < 5; ++k) lhs(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      const Vec5 step = lhs.ldlt().solve(-jtr);
      if (!step.allFinite()) break;
      Ellipse trial;
      try {
        trial = Ellipse::make(e.cx + step(0), e.cy + step(1), e.a + step(2), e.b + step(3),
                              e.theta + step(4));
      } catch (const Error&) {
        lambda *= 10.0;
        continue;
      }
      const double trial_cost = geometric_cost(trial, pts).sum_sq;
      if (trial_cost < cost) {
        const double rel = (cost - trial_cost) / cost;
        e = trial;
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = rel > 1e-14;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return e;
}

}  // namespace

EllipseFit fit_ellipse(std::span<const Vec2> points) {
  if (points.size() < 6) fail(ErrorCode::TooFewPoints, "ellipse fit needs at least 6 points");

  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  double rms = 0.0;
  for (const Vec2& p : points) rms += (p - mean).squaredNorm();
  rms = std::sqrt(rms / static_cast<double>(points.size()));
  if (!(rms > 0.0)) fail(ErrorCode::DegenerateFit, "all points coincide");
  const double scale = std::sqrt(2.0) / rms;

  std::vector<Vec2> normalized;
  normalized.reserve(points.size());
  for (const Vec2& p : points) normalized.push_back((p - mean) * scale);

  const Mat3 cn = direct_conic_fit(normalized);
  Mat3 denorm;
  denorm << scale, 0.0, -scale * mean.x(),  //
      0.0, scale, -scale * mean.y(),         //
      0.0, 0.0, 1.0;
  const Mat3 conic = denorm.transpose() * cn * denorm;

  EllipseFit fit;
  fit.ellipse = refine_geometric(ellipse_from_conic(conic), points);

  const Mat3 q = fit.ellipse.conic();
  double sampson = 0.0;
  for (const Vec2& p : points) {
    const Vec3 x(p.x(), p.y(), 1.0);
    const Vec3 qx = q * x;
    const double grad = 2.0 * std::hypot(qx(0), qx(1));
    const double d = grad > 0.0 ? x.dot(qx) / grad : 0.0;
    sampson += d * d;
  }
  const auto n = static_cast<double>(points.size());
  const GeometricCost cost = geometric_cost(fit.ellipse, points);
  fit.sampson_rms = std::sqrt(sampson / n);
  fit.geometric_rms = std::sqrt(cost.sum_sq / n);
  fit.geometric_mean = cost.sum_abs / n;
  return fit;
}

// ---------------------------------------------------------------------------
// Tangents
// ---------------------------------------------------------------------------

TangentPair tangents_from_point(const Ellipse& e, const HPoint& q) {
  const Mat3 g = e.to_unit_circle();
  const Mat3 h = e.from_unit_circle();
  Vec2 t_plus, t_minus;
  const HPoint qn = q.normalized();
  if (qn.is_infinite()) {
    const Vec2 dl = (g.block<2, 2>(0, 0) * qn.direction()).normalized();
    t_plus = perp(dl);
    t_minus = -t_plus;
  } else {
    const Vec2 p = (g * qn.h).head<2>();
    const double p2 = p.squaredNorm();
    const double excess = p2 - 1.0;
    if (std::abs(excess) <= 1e-10) fail(ErrorCode::PointOnEllipse, "point lies on the ellipse");
    if (excess < 0.0) fail(ErrorCode::PointInsideEllipse, "point lies inside the ellipse");
    const double k = std::sqrt(excess);
    t_plus = (p + k * perp(p)) / p2;
    t_minus = (p - k * perp(p)) / p2;
  }
  const Mat3 g_t = g.transpose();
  TangentPair out;
  out.first = HLine::from_coefficients(g_t * Vec3(t_plus.x(), t_plus.y(), -1.0));
  out.second = HLine::from_coefficients(g_t * Vec3(t_minus.x(), t_minus.y(), -1.0));
  out.touch_first = (h * Vec3(t_plus.x(), t_plus.y(), 1.0)).head<2>();
  out.touch_second = (h * Vec3(t_minus.x(), t_minus.y(), 1.0)).head<2>();
  return out;
}

namespace {

// Gap between the slabs of e1 and e2 along unit direction n; positive when
// the line family perpendicular to n separates them.
double separation_gap(const Ellipse& e1, const Ellipse& e2, const Vec2& n) {
  return (n.dot(e2.center()) - e2.support(n)) - (n.dot(e1.center()) + e1.support(n));
}

}  // namespace

ExternalTangentSearch::ExternalTangentSearch(const Ellipse& e1, const Ellipse& e2)
    : e1_(e1), e2_(e2) {
  // Widest separating direction: coarse sweep, then golden-section refine.
  constexpr int kSweep = 720;
  const double step = 2.0 * kPi / kSweep;
  double best_phi = 0.0;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kSweep; ++i) {
    const double phi = i * step;
    const double gap = separation_gap(e1, e2, Vec2(std::cos(phi), std::sin(phi)));
    if (gap > best_gap) {
      best_gap = gap;
      best_phi = phi;
    }
  }
  auto gap_at = [&](double phi) {
    return separation_gap(e1, e2, Vec2(std::cos(phi), std::sin(phi)));
  };
  double lo = best_phi - step, hi = best_phi + step;
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - golden * (hi - lo), x2 = lo + golden * (hi - lo);
  double f1 = gap_at(x1), f2 = gap_at(x2);
  for (int i = 0; i < 80; ++i) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - golden * (hi - lo);
      f1 = gap_at(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + golden * (hi - lo);
      f2 = gap_at(x2);
    }
  }
  const double phi = 0.5 * (lo + hi);
  best_gap = std::max(best_gap, gap_at(phi));
  if (!(best_gap > 0.0)) fail(ErrorCode::EllipsesOverlap, "ellipses overlap or one contains the other");

  normal_ = Vec2(std::cos(phi), std::sin(phi));
  axis_ = Vec2(normal_.y(), -normal_.x());
  const double mid = 0.5 * ((normal_.dot(e1.center()) + e1.support(normal_)) +
                            (normal_.dot(e2.center()) - e2.support(normal_)));
  const Vec2 base = 0.5 * (e1.center() + e2.center());
  origin_ = base + (mid - normal_.dot(base)) * normal_;

  // Each tangent crosses the search line between its two touch points, so
  // within the union of the ellipses' extents along the axis.
  const double lo1 = axis_.dot(e1.center() - origin_) - e1.support(axis_);
  const double hi1 = axis_.dot(e1.center() - origin_) + e1.support(axis_);
  const double lo2 = axis_.dot(e2.center() - origin_) - e2.support(axis_);
  const double hi2 = axis_.dot(e2.center() - origin_) + e2.support(axis_);
  const double pad = 1e-6 * (1.0 + std::max({std::abs(lo1), std::abs(hi1), std::abs(lo2), std::abs(hi2)}));
  lower_ = std::min(lo1, lo2) - pad;
  upper_ = std::max(hi1, hi2) + pad;
}

ExternalTangentSearch::Touches ExternalTangentSearch::touches(Side side, double s) const {
  const Vec2 q = point_at(s);
  const HPoint hq = HPoint::finite(q);
  const TangentPair p1 = tangents_from_point(e1_, hq);
  const TangentPair p2 = tangents_from_point(e2_, hq);
  // Left tangent: e1 lies to the +v side of Q->T1 (positive cross product),
  // e2 to the +v side of Q->T2 (negative cross product).
  const double want = side == Side::Left ? 1.0 : -1.0;
  const auto pick = [&](const TangentPair& p, const Ellipse& e, double sign) {
    const double c = cross2(p.touch_first - q, e.center() - q);
    return (c * sign > 0.0) ? p.touch_first : p.touch_second;
  };
  return {pick(p1, e1_, want), pick(p2, e2_, -want)};
}

double ExternalTangentSearch::mismatch(Side side, double s) const {
  const Vec2 q = point_at(s);
  const Touches t = touches(side, s);
  const Vec2 to1 = (t.t1 - q).normalized();
  const Vec2 from2 = (q - t.t2).normalized();
  return std::atan2(cross2(to1, from2), to1.dot(from2));
}

ExternalTangentSearch::Hit ExternalTangentSearch::solve(Side side) const {
  double lo = lower_, hi = upper_;
  double g_lo = mismatch(side, lo);
  const double g_hi = mismatch(side, hi);
  if (g_lo != 0.0 && g_hi != 0.0 && (g_lo > 0.0) == (g_hi > 0.0)) {
    fail(ErrorCode::NoConvergence, "tangent mismatch does not change sign over the search range");
  }
  Hit hit;
  double best_s = std::abs(g_lo) < std::abs(g_hi) ? lo : hi;
  double best_g = std::min(std::abs(g_lo), std::abs(g_hi));
  int iter = 0;
  for (; iter < kTangentSearchMaxIterations && best_g != 0.0; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double g_mid = mismatch(side, mid);
    if (std::abs(g_mid) < best_g) {
      best_g = std::abs(g_mid);
      best_s = mid;
    }
    if ((g_mid > 0.0) == (g_lo > 0.0)) {
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
    }
  }
  if (!(best_g < kTangentSlopeTolerance)) {
    fail(ErrorCode::NoConvergence, "tangent search did not converge");
  }
  const Touches t = touches(side, best_s);
  hit.touch1 = t.t1;
  hit.touch2 = t.t2;
  hit.line = HLine::through(t.t1, t.t2);
  hit.s = best_s;
  hit.iterations = iter;
  if (std::abs(tangency_residual(e1_, hit.line)) > kTangencyTolerance ||
      std::abs(tangency_residual(e2_, hit.line)) > kTangencyTolerance) {
    fail(ErrorCode::NoConvergence, "converged line is not tangent to both ellipses");
  }
  return hit;
}

CommonTangents common_external_tangents(const Ellipse& e1, const Ellipse& e2) {
  const ExternalTangentSearch search(e1, e2);
  const auto left = search.solve(ExternalTangentSearch::Side::Left);
  const auto right = search.solve(ExternalTangentSearch::Side::Right);
  CommonTangents out;
  out.left = left.line;
  out.right = right.line;
  out.left_touch1 = left.touch1;
  out.left_touch2 = left.touch2;
  out.right_touch1 = right.touch1;
  out.right_touch2 = right.touch2;
  out.iterations = left.iterations + right.iterations;
  out.vp = intersect(out.left, out.right);
  return out;
}

// ---------------------------------------------------------------------------
// Cross-ratio
// ---------------------------------------------------------------------------

double cross_ratio(double a, double b, double c, double d) {
  if (a == c || (!std::isinf(d) && (a == d || c == d))) {
    fail(ErrorCode::CoincidentAnchors, "cross-ratio anchors a, c, d must be distinct");
  }
  if (b == c) return std::numeric_limits<double>::infinity();
  if (std::isinf(d)) return (c - a) / (c - b);
  return ((c - a) * (d - b)) / ((d - a) * (c - b));
}

double solve_fourth_point(double a, double c, double d, double kappa) {
  if (a == c || (!std::isinf(d) && (a == d || c == d))) {
    fail(ErrorCode::CoincidentAnchors, "cross-ratio anchors a, c, d must be distinct");
  }
  if (std::isinf(kappa)) return c;
  if (!std::isfinite(kappa)) fail(ErrorCode::NoSolutionInSegment, "cross-ratio is not a number");
  if (std::isinf(d)) {
    if (kappa == 0.0) fail(ErrorCode::NoSolutionInSegment, "zero cross-ratio with an infinite anchor");
    return c - (c - a) / kappa;
  }
  // kappa (d - a)(c - b) = (c - a)(d - b), linear in b.
  const double k = kappa * (d - a);
  const double denom = k - (c - a);
  if (std::abs(denom) <= 1e-15 * (std::abs(k) + std::abs(c - a))) {
    fail(ErrorCode::NoSolutionInSegment, "cross-ratio equation is degenerate");
  }
  return (k * c - (c - a) * d) / denom;
}

}  // namespace labelaug
