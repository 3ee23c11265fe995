#include "labelaug/region.hpp"

#include "labelaug/error.hpp"

#include <algorithm>
#include <cmath>

namespace labelaug {

namespace {

double wrap_2pi(double t) {
  t = std::fmod(t, 2.0 * kPi);
  if (t < 0.0) t += 2.0 * kPi;
  return t;
}

}  // namespace

bool RimArc::on_visible_side(const Vec2& p) const {
  const Vec2 chord_dir = right - left;
  return cross2(chord_dir, p - left) * cross2(chord_dir, apex - left) > 0.0;
}

Rim wider_of(const RimArc& upper, const RimArc& lower) {
  return upper.chord() >= lower.chord() ? Rim::Upper : Rim::Lower;
}

ArcParam::ArcParam(const RimArc& arc, int resolution) : ellipse_(arc.ellipse) {
  t_start_ = ellipse_.parameter_of(arc.left);
  const double t_end = ellipse_.parameter_of(arc.right);
  const double t_apex = ellipse_.parameter_of(arc.apex);
  const double forward = wrap_2pi(t_end - t_start_);
  if (wrap_2pi(t_apex - t_start_) <= forward) {
    direction_ = 1.0;
    span_ = forward;
  } else {
    direction_ = -1.0;
    span_ = 2.0 * kPi - forward;
  }
  const auto speed = [&](double t) {
    return std::hypot(ellipse_.a * std::sin(t), ellipse_.b * std::cos(t));
  };
  cumulative_.assign(static_cast<size_t>(resolution) + 1, 0.0);
  const double h = span_ / resolution;
  for (int i = 1; i <= resolution; ++i) {
    const double t0 = t_start_ + direction_ * (i - 1) * h;
    const double t1 = t_start_ + direction_ * i * h;
    const double tm = 0.5 * (t0 + t1);
    cumulative_[i] = cumulative_[i - 1] + h * (speed(t0) + 4.0 * speed(tm) + speed(t1)) / 6.0;
  }
}

double ArcParam::t_at(double u) const {
  const double target = std::clamp(u, 0.0, 1.0) * length();
  const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), target);
  size_t i = static_cast<size_t>(std::distance(cumulative_.begin(), it));
  if (i == 0) return t_start_;
  if (i >= cumulative_.size()) i = cumulative_.size() - 1;
  const double c0 = cumulative_[i - 1], c1 = cumulative_[i];
  const double frac = c1 > c0 ? (target - c0) / (c1 - c0) : 0.0;
  const double n = static_cast<double>(cumulative_.size() - 1);
  return t_start_ + direction_ * span_ * ((static_cast<double>(i) - 1.0 + frac) / n);
}

Vec2 ArcParam::at(double u) const { return ellipse_.point_at(t_at(u)); }

double ArcParam::fraction_of(const Vec2& p) const {
  const double offset = wrap_2pi(direction_ * (ellipse_.parameter_of(p) - t_start_));
  const double n = static_cast<double>(cumulative_.size() - 1);
  if (offset <= span_) {
    const double pos = offset / span_ * n;
    const auto i = std::min(static_cast<size_t>(pos), cumulative_.size() - 2);
    const double frac = pos - static_cast<double>(i);
    return (cumulative_[i] + frac * (cumulative_[i + 1] - cumulative_[i])) / length();
  }
  // Off the arc: report a signed overshoot in parameter units, which only
  // needs to be outside [0, 1].
  const double rest = 2.0 * kPi - span_;
  if (offset - span_ < 0.5 * rest) return 1.0 + (offset - span_) / span_;
  return -(2.0 * kPi - offset) / span_;
}

Vec2 longitudinal_direction(const LabelRegion& region, const Vec2& p) {
  Vec2 dir;
  if (region.vp.is_infinite()) {
    dir = region.vp.direction();
  } else {
    dir = region.vp.point() - p;
    const double n = dir.norm();
    if (!(n > 0.0)) fail(ErrorCode::NoIntersection, "point coincides with the vanishing point");
    dir /= n;
  }
  const Vec2 towards = region.narrower_rim().ellipse.center() - region.wider_rim().ellipse.center();
  if (dir.dot(towards) < 0.0) dir = -dir;
  return dir;
}

std::optional<Vec2> hit_visible_arc(const RimArc& arc, const Vec2& p, const Vec2& dir) {
  const Ellipse& e = arc.ellipse;
  const Mat3 g = e.to_unit_circle();
  const Vec2 pl = (g * Vec3(p.x(), p.y(), 1.0)).head<2>();
  const Vec2 dl = g.block<2, 2>(0, 0) * dir;
  const double alpha = dl.squaredNorm();
  const double beta = pl.dot(dl);
  const double gamma = pl.squaredNorm() - 1.0;
  double disc = beta * beta - alpha * gamma;
  // Lines through the silhouette tangency points graze the rim; allow a
  // rounding-level miss there.
  if (disc < 0.0) {
    if (disc < -1e-9 * (beta * beta + std::abs(alpha * gamma))) return std::nullopt;
    disc = 0.0;
  }
  const double root = std::sqrt(disc);
  const Vec2 q1 = p + ((-beta - root) / alpha) * dir;
  const Vec2 q2 = p + ((-beta + root) / alpha) * dir;
  // The polar of the vanishing point is the tangency chord, so exactly one
  // intersection lies on the visible side. Pick the one further onto it.
  const Vec2 chord_dir = arc.right - arc.left;
  const double sign = cross2(chord_dir, arc.apex - arc.left) > 0.0 ? 1.0 : -1.0;
  const double s1 = sign * cross2(chord_dir, q1 - arc.left);
  const double s2 = sign * cross2(chord_dir, q2 - arc.left);
  return s1 >= s2 ? q1 : q2;
}

std::optional<RegionCoordinates> region_coordinates(const LabelRegion& region, const ArcParam& wider,
                                                    const Vec2& p) {
  if (!region.vp.is_infinite() && (region.vp.point() - p).norm() < 1e-9) return std::nullopt;
  const Vec2 dir = longitudinal_direction(region, p);
  const auto a = hit_visible_arc(region.wider_rim(), p, dir);
  if (!a) return std::nullopt;
  const auto c = hit_visible_arc(region.narrower_rim(), p, dir);
  if (!c) return std::nullopt;
  const double len = (*c - *a).dot(dir);
  if (!(len > 0.0)) return std::nullopt;
  RegionCoordinates rc;
  rc.u = wider.fraction_of(*a);
  rc.v = (p - *a).dot(dir) / len;
  return rc;
}

Mask region_mask(const LabelRegion& region, int width, int height) {
  Mask m = make_mask(width, height);
  const ArcParam wider(region.wider_rim());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto rc = region_coordinates(region, wider, Vec2(x, y));
      if (rc && rc->u >= 0.0 && rc->u <= 1.0 && rc->v >= 0.0 && rc->v <= 1.0) m.at(x, y) = 255;
    }
  }
  return m;
}

}  // namespace labelaug
