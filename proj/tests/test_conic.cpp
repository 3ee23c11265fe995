#include "labelaug/conic.hpp"
#include "labelaug/error.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace labelaug;
using labelaug::testing::bisect_fourth_point;
using labelaug::testing::orthogonal_fit;
using labelaug::testing::swept_external_tangents;

namespace {

std::vector<Vec2> sample_ellipse(const Ellipse& e, int n, double t0 = 0.0, double span = 2.0 * kPi) {
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) pts.push_back(e.point_at(t0 + span * i / n));
  return pts;
}

double angle_diff_pi(double a, double b) {
  double d = std::fmod(std::abs(a - b), kPi);
  return std::min(d, kPi - d);
}

Ellipse random_ellipse(std::mt19937_64& rng, Vec2 center) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return Ellipse::make(center.x(), center.y(), 1.0 + 9.0 * u(rng), 0.5 + 4.0 * u(rng), kPi * u(rng));
}

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("ellipse conic forms agree with the parametric form") {
  const Ellipse e = Ellipse::make(3.0, -2.0, 5.0, 2.0, 0.7);
  for (double t = 0.0; t < 6.0; t += 0.37) {
    const Vec2 p = e.point_at(t);
    CHECK(e.implicit(p) == doctest::Approx(0.0).epsilon(1e-12));
    const Vec3 h(p.x(), p.y(), 1.0);
    CHECK(h.dot(e.conic() * h) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
  CHECK(e.implicit(e.center()) == doctest::Approx(-1.0));
  const Ellipse back = ellipse_from_conic(e.conic() * -7.5);
  CHECK(back.cx == doctest::Approx(e.cx).epsilon(1e-12));
  CHECK(back.cy == doctest::Approx(e.cy).epsilon(1e-12));
  CHECK(back.a == doctest::Approx(e.a).epsilon(1e-12));
  CHECK(back.b == doctest::Approx(e.b).epsilon(1e-12));
  CHECK(angle_diff_pi(back.theta, e.theta) < 1e-12);
  CHECK(error_of([] { ellipse_from_conic(Vec3(1.0, -1.0, -1.0).asDiagonal().toDenseMatrix()); }) ==
        ErrorCode::DegenerateFit);
}

TEST_CASE("closest point matches a dense search") {
  const Ellipse e = Ellipse::make(1.0, 2.0, 6.0, 1.5, 0.3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 50; ++i) {
    const Vec2 q(u(rng), u(rng));
    double best = 1e9;
    for (int k = 0; k < 200000; ++k) best = std::min(best, (e.point_at(2.0 * kPi * k / 200000) - q).norm());
    CHECK(std::abs(e.closest_point(q).distance) == doctest::Approx(best).epsilon(1e-6));
  }
}

TEST_CASE("fit_ellipse recovers an exact ellipse") {
  const Ellipse truth = Ellipse::make(0.0, 0.0, 2.0, 1.0, 0.0);
  const auto pts = sample_ellipse(truth, 12);
  const EllipseFit fit = fit_ellipse(pts);
  CHECK(std::abs(fit.ellipse.cx) < 1e-9);
  CHECK(std::abs(fit.ellipse.cy) < 1e-9);
  CHECK(std::abs(fit.ellipse.a - 2.0) < 1e-9);
  CHECK(std::abs(fit.ellipse.b - 1.0) < 1e-9);
  CHECK(angle_diff_pi(fit.ellipse.theta, 0.0) < 1e-9);
  CHECK(fit.sampson_rms < 1e-9);
}

TEST_CASE("fit_ellipse on a circle reports theta 0") {
  const auto pts = sample_ellipse(Ellipse::make(0.0, 0.0, 1.0, 1.0, 0.0), 12);
  const EllipseFit fit = fit_ellipse(pts);
  CHECK(fit.ellipse.a == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fit.ellipse.b == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(fit.ellipse.cx) < 1e-9);
  CHECK(std::abs(fit.ellipse.cy) < 1e-9);
  CHECK(fit.ellipse.theta == 0.0);
}

TEST_CASE("fit_ellipse on noisy samples agrees with an orthogonal-distance oracle") {
  const Ellipse truth = Ellipse::make(320.0, 150.0, 180.0, 12.0, 0.05);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    auto pts = sample_ellipse(truth, 200);
    for (Vec2& p : pts) p += Vec2(noise(rng), noise(rng));
    const Ellipse fit = fit_ellipse(pts).ellipse;
    CHECK((fit.center() - truth.center()).norm() < 1.0);
    CHECK(std::abs(fit.a - truth.a) < 0.02 * truth.a);
    CHECK(std::abs(fit.b - truth.b) < 0.02 * truth.b);
    CHECK(angle_diff_pi(fit.theta, truth.theta) < 0.01);

    const Ellipse oracle = orthogonal_fit(pts, truth);
    CHECK((fit.center() - oracle.center()).norm() < 1e-4);
    CHECK(std::abs(fit.a - oracle.a) < 1e-4);
    CHECK(std::abs(fit.b - oracle.b) < 1e-4);
    CHECK(angle_diff_pi(fit.theta, oracle.theta) < 1e-6);
  }
}

TEST_CASE("fit_ellipse error paths") {
  std::vector<Vec2> five(5, Vec2(1.0, 2.0));
  CHECK(error_of([&] { fit_ellipse(five); }) == ErrorCode::TooFewPoints);
  std::vector<Vec2> line;
  for (int i = 0; i < 10; ++i) line.emplace_back(i, 2.0 * i + 1.0);
  CHECK(error_of([&] { fit_ellipse(line); }) == ErrorCode::DegenerateFit);
}

TEST_CASE("tangents from a point to the unit circle") {
  const Ellipse circle = Ellipse::make(0.0, 0.0, 1.0, 1.0, 0.0);
  const TangentPair t = tangents_from_point(circle, HPoint::finite(2.0, 0.0));
  const double y = std::sqrt(3.0) / 2.0;
  const bool first_up = t.touch_first.y() > 0.0;
  const Vec2 up = first_up ? t.touch_first : t.touch_second;
  const Vec2 down = first_up ? t.touch_second : t.touch_first;
  CHECK((up - Vec2(0.5, y)).norm() < 1e-12);
  CHECK((down - Vec2(0.5, -y)).norm() < 1e-12);
  for (const HLine& l : {t.first, t.second}) {
    CHECK(std::abs(tangency_residual(circle, l)) < 1e-9);
    CHECK(std::abs(l.signed_distance(Vec2(2.0, 0.0))) < 1e-12);
  }
}

TEST_CASE("tangent slopes from (0,5) to x^2/9 + y^2 = 1") {
  // y = kx + 5 substituted gives (1/9 + k^2) x^2 + 10k x + 24 = 0; a zero
  // discriminant needs 4k^2 = 96/9.
  const double k_expected = std::sqrt(96.0 / 9.0 / 4.0);
  CHECK(k_expected == doctest::Approx(2.0 * std::sqrt(6.0) / 3.0));
  const Ellipse e = Ellipse::make(0.0, 0.0, 3.0, 1.0, 0.0);
  const TangentPair t = tangents_from_point(e, HPoint::finite(0.0, 5.0));
  std::vector<double> slopes;
  for (const HLine& l : {t.first, t.second}) {
    slopes.push_back(-l.h.x() / l.h.y());
    CHECK(std::abs(tangency_residual(e, l)) < 1e-9);
    CHECK(std::abs(intersection_discriminant(e, l)) < 1e-6);
    CHECK(std::abs(l.signed_distance(Vec2(0.0, 5.0))) < 1e-12);
  }
  std::sort(slopes.begin(), slopes.end());
  CHECK(slopes[0] == doctest::Approx(-k_expected).epsilon(1e-12));
  CHECK(slopes[1] == doctest::Approx(k_expected).epsilon(1e-12));
}

TEST_CASE("tangents_from_point rejects points on or inside the ellipse") {
  const Ellipse e = Ellipse::make(0.0, 0.0, 3.0, 1.0, 0.0);
  CHECK(error_of([&] { tangents_from_point(e, HPoint::finite(3.0, 0.0)); }) == ErrorCode::PointOnEllipse);
  CHECK(error_of([&] { tangents_from_point(e, HPoint::finite(1.0, 0.2)); }) == ErrorCode::PointInsideEllipse);
}

TEST_CASE("tangents_from_point property: lines touch once and pass through q") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  int checked = 0;
  while (checked < 500) {
    const Ellipse e = random_ellipse(rng, Vec2(u(rng) / 3.0, u(rng) / 3.0));
    const Vec2 q(u(rng), u(rng));
    if (e.implicit(q) <= 1e-6) continue;
    const TangentPair t = tangents_from_point(e, HPoint::finite(q));
    for (const HLine& l : {t.first, t.second}) {
      CHECK(std::abs(intersection_discriminant(e, l)) <= 1e-6);
      CHECK(std::abs(tangency_residual(e, l)) <= 1e-6);
      CHECK(std::abs(l.signed_distance(q)) < 1e-9);
    }
    ++checked;
  }
}

TEST_CASE("common tangents of equal circles are parallel") {
  const Ellipse c1 = Ellipse::make(0.0, 0.0, 1.0, 1.0, 0.0);
  const Ellipse c2 = Ellipse::make(4.0, 0.0, 1.0, 1.0, 0.0);
  const CommonTangents ct = common_external_tangents(c1, c2);
  std::vector<double> offsets;
  for (const HLine& l : {ct.left, ct.right}) {
    CHECK(std::abs(l.h.x()) < 1e-12);
    offsets.push_back(-l.h.z() / l.h.y());
  }
  std::sort(offsets.begin(), offsets.end());
  CHECK(offsets[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(offsets[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ct.vp.is_infinite());
  CHECK((ct.vp.h - Vec3(1.0, 0.0, 0.0)).norm() < 1e-12);
}

TEST_CASE("common tangents of unequal circles meet at the external homothety centre") {
  // External division of the centres in ratio r1:r2 = 1:2 gives (-6, 0).
  const Ellipse c1 = Ellipse::make(0.0, 0.0, 1.0, 1.0, 0.0);
  const Ellipse c2 = Ellipse::make(6.0, 0.0, 2.0, 2.0, 0.0);
  const CommonTangents ct = common_external_tangents(c1, c2);
  REQUIRE_FALSE(ct.vp.is_infinite());
  CHECK((ct.vp.point() - Vec2(-6.0, 0.0)).norm() < 1e-9);
  const auto swept = swept_external_tangents(c1, c2);
  REQUIRE(swept.size() == 2);
  for (const auto& s : swept) {
    const double d = std::min(angle_between(s.line, ct.left), angle_between(s.line, ct.right));
    CHECK(d < 1e-4);
    CHECK(std::abs(s.line.signed_distance(Vec2(-6.0, 0.0))) < 1e-6);
  }
}

TEST_CASE("common tangents of vertically translated ellipses") {
  const Ellipse e1 = Ellipse::make(0.0, 0.0, 5.0, 1.0, 0.0);
  const Ellipse e2 = Ellipse::make(0.0, 10.0, 5.0, 1.0, 0.0);
  const CommonTangents ct = common_external_tangents(e1, e2);
  // e1 above e2 in image coordinates: left is x = -5.
  CHECK(std::abs(ct.left.h.y()) < 1e-12);
  CHECK(std::abs(ct.right.h.y()) < 1e-12);
  CHECK(-ct.left.h.z() / ct.left.h.x() == doctest::Approx(-5.0).epsilon(1e-12));
  CHECK(-ct.right.h.z() / ct.right.h.x() == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(ct.vp.is_infinite());
  CHECK((ct.vp.h - Vec3(0.0, 1.0, 0.0)).norm() < 1e-12);
  CHECK((ct.left_touch1 - Vec2(-5.0, 0.0)).norm() < 1e-9);
  CHECK((ct.right_touch2 - Vec2(5.0, 10.0)).norm() < 1e-9);
}

TEST_CASE("common_external_tangents rejects overlapping and nested ellipses") {
  const Ellipse e1 = Ellipse::make(0.0, 0.0, 5.0, 1.0, 0.0);
  CHECK(error_of([&] { common_external_tangents(e1, Ellipse::make(3.0, 0.5, 2.0, 1.0, 0.3)); }) ==
        ErrorCode::EllipsesOverlap);
  CHECK(error_of([&] { common_external_tangents(e1, Ellipse::make(0.5, 0.0, 1.0, 0.5, 0.0)); }) ==
        ErrorCode::EllipsesOverlap);
}

TEST_CASE("common tangents agree with a dense angular sweep on random pairs") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int tested = 0;
  while (tested < 60) {
    const Ellipse e1 = random_ellipse(rng, Vec2(0.0, 0.0));
    const double ang = 2.0 * kPi * u(rng);
    const double dist = 2.0 + 25.0 * u(rng);
    const Ellipse e2 = random_ellipse(rng, Vec2(dist * std::cos(ang), dist * std::sin(ang)));
    CommonTangents ct;
    try {
      ct = common_external_tangents(e1, e2);
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::EllipsesOverlap);
      continue;
    }
    for (const HLine& l : {ct.left, ct.right}) {
      CHECK(std::abs(tangency_residual(e1, l)) <= 1e-6);
      CHECK(std::abs(tangency_residual(e2, l)) <= 1e-6);
      // Both ellipses on the same side.
      CHECK(l.signed_distance(e1.center()) * l.signed_distance(e2.center()) > 0.0);
    }
    const auto swept = swept_external_tangents(e1, e2, 20000);
    REQUIRE(swept.size() == 2);
    for (const auto& s : swept) {
      CHECK(std::min(angle_between(s.line, ct.left), angle_between(s.line, ct.right)) < 1e-4);
    }
    ++tested;
  }
}

TEST_CASE("tangent mismatch is monotone along the search segment") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int tested = 0;
  while (tested < 50) {
    const Ellipse e1 = random_ellipse(rng, Vec2(0.0, 0.0));
    const double ang = 2.0 * kPi * u(rng);
    const double dist = 3.0 + 20.0 * u(rng);
    const Ellipse e2 = random_ellipse(rng, Vec2(dist * std::cos(ang), dist * std::sin(ang)));
    try {
      const ExternalTangentSearch search(e1, e2);
      for (auto side : {ExternalTangentSearch::Side::Left, ExternalTangentSearch::Side::Right}) {
        double prev = search.mismatch(side, search.lower());
        int sign_changes = 0;
        double last_delta = 0.0;
        bool monotone = true;
        for (int i = 1; i <= 400; ++i) {
          const double s = search.lower() + (search.upper() - search.lower()) * i / 400.0;
          const double g = search.mismatch(side, s);
          if ((g > 0.0) != (prev > 0.0)) ++sign_changes;
          const double delta = g - prev;
          if (last_delta != 0.0 && delta != 0.0 && (delta > 0.0) != (last_delta > 0.0)) monotone = false;
          if (delta != 0.0) last_delta = delta;
          prev = g;
        }
        CHECK(sign_changes == 1);
        CHECK(monotone);
      }
      ++tested;
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::EllipsesOverlap);
    }
  }
}

TEST_CASE("cross_ratio worked values") {
  CHECK(cross_ratio(0.0, 1.0, 2.0, 3.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(cross_ratio(0.5, 0.5, 2.0, 3.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cross_ratio(0.0, 1.0, 2.0, kAtInfinity) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(std::isinf(cross_ratio(0.0, 2.0, 2.0, 3.0)));
  CHECK(error_of([] { cross_ratio(1.0, 0.0, 1.0, 3.0); }) == ErrorCode::CoincidentAnchors);
  CHECK(error_of([] { cross_ratio(0.0, 0.5, 3.0, 3.0); }) == ErrorCode::CoincidentAnchors);
}

TEST_CASE("solve_fourth_point worked values") {
  const double b = solve_fourth_point(0.0, 4.0, 10.0, 4.0 / 3.0);
  CHECK(b == doctest::Approx(10.0 / 7.0).epsilon(1e-14));
  CHECK(bisect_fourth_point(0.0, 4.0, 10.0, 4.0 / 3.0, 0.0, 4.0) == doctest::Approx(10.0 / 7.0).epsilon(1e-12));
  CHECK(solve_fourth_point(2.0, 5.0, 9.0, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(solve_fourth_point(0.0, 2.0, kAtInfinity, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(error_of([] { solve_fourth_point(0.0, 0.0, 3.0, 1.5); }) == ErrorCode::CoincidentAnchors);
}

TEST_CASE("solve_fourth_point agrees with bisection between the anchors") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double a = 100.0 * u(rng), c = a + 1.0 + 100.0 * u(rng);
    const double d = u(rng) < 0.2 ? kAtInfinity : c + 1.0 + 1000.0 * u(rng);
    const double b_true = a + (c - a) * (0.01 + 0.98 * u(rng));
    const double kappa = cross_ratio(a, b_true, c, d);
    const double b = solve_fourth_point(a, c, d, kappa);
    CHECK(b == doctest::Approx(bisect_fourth_point(a, c, d, kappa, a, c)).epsilon(1e-10));
    CHECK(b > a);
    CHECK(b < c);
  }
}

TEST_CASE("cross_ratio is invariant under random projective maps") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  int maps = 0;
  while (maps < 1000) {
    const auto m = labelaug::testing::random_projective_1d(rng);
    double x[4];
    for (double& v : x) v = u(rng);
    bool ok = true;
    for (int i = 0; i < 4 && ok; ++i) {
      ok = std::abs(m.r * x[i] + m.s) >= 0.05;
      for (int j = 0; j < i && ok; ++j) ok = std::abs(x[i] - x[j]) >= 0.05;
    }
    if (!ok) continue;
    ++maps;
    const double k = cross_ratio(x[0], x[1], x[2], x[3]);
    const double k2 = cross_ratio(m(x[0]), m(x[1]), m(x[2]), m(x[3]));
    CHECK(std::abs(k2 - k) <= 1e-9 * std::max(1.0, std::abs(k)));
    const double b = solve_fourth_point(m(x[0]), m(x[2]), m(x[3]), k);
    CHECK(std::abs(b - m(x[1])) <= 1e-9 * std::max(1.0, std::abs(m(x[1]))));
  }
}
