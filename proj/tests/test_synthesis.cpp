#include "labelaug/camera.hpp"
#include "labelaug/error.hpp"
#include "labelaug/synthesis.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace labelaug;
using labelaug::testing::arc_rms_distance;
using labelaug::testing::central_mask;
using labelaug::testing::smooth_texture;

namespace {

const CameraIntrinsics kCam{};
const CylinderModel kCyl{};

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

// Colour depends on the texture column only, so it is constant along every
// surface generator.
Image stripe_texture() {
  Image t = make_rgb(512, 160);
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      const double s = std::sin(2.0 * kPi * x / 64.0);
      t.at(x, y, 0) = clamp_u8(140.0 + 80.0 * s);
      t.at(x, y, 1) = clamp_u8(140.0 - 60.0 * s);
      t.at(x, y, 2) = clamp_u8(120.0 + 40.0 * std::cos(2.0 * kPi * x / 64.0));
    }
  }
  return t;
}

// More detail than smooth_texture: a few periods per label width.
Image detailed_texture() {
  Image t = make_rgb(512, 160);
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      const double v = std::sin(2.0 * kPi * x / 40.0) + std::cos(2.0 * kPi * (x + 2 * y) / 55.0);
      t.at(x, y, 0) = clamp_u8(150.0 + 40.0 * v);
      t.at(x, y, 1) = clamp_u8(130.0 - 30.0 * v);
      t.at(x, y, 2) = clamp_u8(120.0 + 20.0 * std::sin(2.0 * kPi * y / 30.0));
    }
  }
  return t;
}

// Near-straight rim: a very long flat ellipse, visible arc on `side` (-1 is
// the upper half in image coordinates).
RimArc flat_rim(double y, double x0, double x1, int side) {
  const double b = 2.0;
  RimArc arc;
  arc.ellipse = Ellipse::make(0.5 * (x0 + x1), y - side * b, 5000.0, b, 0.0);
  const auto point = [&](double x) {
    const double dx = (x - arc.ellipse.cx) / arc.ellipse.a;
    return Vec2(x, arc.ellipse.cy + side * b * std::sqrt(1.0 - dx * dx));
  };
  arc.left = point(x0);
  arc.right = point(x1);
  arc.apex = point(0.5 * (x0 + x1));
  return arc;
}

LabelRegion flat_region(double top, double bottom, double x0, double x1) {
  LabelRegion r;
  r.upper = flat_rim(top, x0, x1, 1);
  r.lower = flat_rim(bottom, x0, x1, -1);
  r.left = HLine::through(Vec2(x0, top), Vec2(x0, bottom));
  r.right = HLine::through(Vec2(x1, top), Vec2(x1, bottom));
  r.vp = HPoint::at_infinity(0.0, 1.0);
  r.wider = Rim::Upper;
  return r;
}

double kappa_gap(const ReprojectionTrace& t) {
  const double k_dst = cross_ratio(t.dst[0], t.dst[1], t.dst[2], t.dst[3]);
  const double k_src = cross_ratio(t.src[0], t.src[1], t.src[2], t.src[3]);
  return std::abs(k_dst - k_src) / std::max(1.0, std::abs(k_dst));
}

// True when the region boundary passes within one pixel of (x, y).
bool near_boundary(const LabelRegion& region, const ArcParam& wider, int x, int y) {
  const auto inside = [&](const Vec2& p) {
    const auto rc = region_coordinates(region, wider, p);
    return rc && rc->u >= 0.0 && rc->u <= 1.0 && rc->v >= 0.0 && rc->v <= 1.0;
  };
  const Vec2 c(x, y);
  // The region pinches to zero width at the four tangency corners.
  for (const Vec2& corner : {region.upper.left, region.upper.right, region.lower.left, region.lower.right}) {
    if ((corner - c).norm() <= 1.0) return true;
  }
  const bool here = inside(c);
  for (double radius : {0.5, 1.0}) {
    for (int k = 0; k < 16; ++k) {
      const double t = 2.0 * kPi * k / 16.0;
      if (inside(c + radius * Vec2(std::cos(t), std::sin(t))) != here) return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("line samples of a frontal view are parallel") {
  const Image img = render_reference(Pose::identity(), kCyl, kCam, smooth_texture(1)).image;
  const SampledLabel s = extract_line_samples(img, target_region(Pose::identity(), kCyl, kCam));
  REQUIRE(s.samples.size() > 400);
  CHECK(s.u.front() == 0.0);
  CHECK(s.u.back() == 1.0);
  for (size_t i = 0; i < s.samples.size(); ++i) {
    const LineSample& ls = s.samples[i];
    CHECK(std::abs(ls.direction.x()) < 1e-12);
    CHECK(ls.direction.y() > 0.0);
    CHECK(std::isinf(ls.d));
    CHECK(ls.a < ls.c);
    CHECK(ls.colors.size() == static_cast<size_t>(std::max(2.0, std::ceil(ls.c / ls.spacing))));
    if (i > 0) CHECK(s.u[i] > s.u[i - 1]);
  }
}

TEST_CASE("line samples follow longitudinal stripes") {
  Pose p;
  p.rot_x_deg = 10.0;
  p.rot_z_deg = -5.0;
  p.tz = 180.0;
  const Image img = render_reference(p, kCyl, kCam, stripe_texture()).image;
  const TargetRegion region = target_region(p, kCyl, kCam);
  const SampledLabel s = extract_line_samples(img, region);
  double worst = 0.0;
  size_t used = 0;
  for (size_t i = 0; i < s.samples.size(); ++i) {
    // Lines hugging the anti-aliased silhouette mix in background.
    const Vec2 a = s.samples[i].start;
    if (std::abs(region.left.signed_distance(a)) < 2.0 || std::abs(region.right.signed_distance(a)) < 2.0) continue;
    ++used;
    const auto& colors = s.samples[i].colors;
    for (int ch = 0; ch < 3; ++ch) {
      double mean = 0.0, sq = 0.0;
      for (const Rgb& c : colors) mean += c[ch];
      mean /= static_cast<double>(colors.size());
      for (const Rgb& c : colors) sq += (c[ch] - mean) * (c[ch] - mean);
      worst = std::max(worst, std::sqrt(sq / static_cast<double>(colors.size())));
    }
  }
  CHECK(used + 8 > s.samples.size());
  CHECK(worst <= 3.0);
}

TEST_CASE("extract_line_samples error paths") {
  const Image img = make_rgb(640, 480, 100);
  LabelRegion r = flat_region(100.0, 400.0, 170.0, 470.0);
  r.lower = flat_rim(400.0, 1000.0, 1100.0, -1);
  r.lower.ellipse = Ellipse::make(1050.0, 402.0, 50.0, 2.0, 0.0);
  CHECK(error_of([&] { extract_line_samples(img, r); }) == ErrorCode::NoIntersection);
  const LabelRegion narrow = flat_region(100.0, 400.0, 300.0, 310.0);
  CHECK(error_of([&] { extract_line_samples(img, narrow); }) == ErrorCode::RegionTooNarrow);
  CHECK(error_of([&] { extract_line_samples(Image{}, flat_region(100.0, 400.0, 170.0, 470.0)); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("identity re-projection reproduces the source") {
  const Rendering src = render_reference(Pose::identity(), kCyl, kCam, detailed_texture());
  const Synthesis out = synthesize_view(src.image, target_region(Pose::identity(), kCyl, kCam), Pose::identity());
  const Mask inner = erode(src.mask, 2);
  CHECK(mean_abs_diff(out.image, src.image, inner) <= 2.0 / 255.0);
}

TEST_CASE("flat-label limit is a per-column affine stretch") {
  Image src = make_rgb(640, 480);
  for (int y = 0; y < 480; ++y) {
    for (int x = 0; x < 640; ++x) {
      src.at(x, y, 0) = clamp_u8(40.0 + 0.3 * x + 0.2 * y);
      src.at(x, y, 1) = clamp_u8(120.0 + 30.0 * std::sin(x / 60.0) * std::cos(y / 80.0));
      src.at(x, y, 2) = clamp_u8(200.0 - 0.25 * y);
    }
  }
  const LabelRegion source = flat_region(100.0, 400.0, 170.0, 470.0);
  const LabelRegion target = flat_region(150.0, 300.0, 200.0, 440.0);
  const Synthesis out = reproject(extract_line_samples(src, source), target, 640, 480);
  int worst = 0, checked = 0;
  for (int y = 155; y <= 295; ++y) {
    for (int x = 205; x <= 435; ++x) {
      REQUIRE(out.mask.at(x, y));
      const double sx = 170.0 + (x - 200.0) * 300.0 / 240.0;
      const double sy = 100.0 + (y - 150.0) * 300.0 / 150.0;
      const Rgb expected = sample_bilinear(src, sx, sy);
      for (int ch = 0; ch < 3; ++ch) worst = std::max(worst, std::abs(out.image.at(x, y, ch) - clamp_u8(expected[ch])));
      ++checked;
    }
  }
  CHECK(checked > 30000);
  CHECK(worst <= 1);
}

TEST_CASE("re-projection to a tilted pose matches a direct render") {
  const Image tex = smooth_texture(9);
  const Image front = render_reference(Pose::identity(), kCyl, kCam, tex).image;
  Pose p;
  p.rot_x_deg = 15.0;
  p.rot_z_deg = 10.0;
  p.tx = 40.0;
  p.ty = 20.0;
  p.tz = 230.0;
  const Synthesis out = synthesize_view(front, target_region(Pose::identity(), kCyl, kCam), p);
  const Image direct = render_reference(p, kCyl, kCam, tex).image;
  CHECK(psnr(out.image, direct, central_mask(p, kCyl, kCam, 0.2)) >= 20.0);
}

TEST_CASE("every written pixel satisfies the cross-ratio equation") {
  const Image tex = detailed_texture();
  Pose src_pose;
  src_pose.rot_x_deg = -9.0;
  src_pose.tx = 10.0;
  const Image img = render_reference(src_pose, kCyl, kCam, tex).image;
  Pose p;
  p.rot_x_deg = 12.0;
  p.rot_z_deg = 6.0;
  p.tz = 240.0;
  std::vector<ReprojectionTrace> trace;
  SynthesisOptions opt;
  opt.reproject.trace = &trace;
  const Synthesis out = synthesize_view(img, target_region(src_pose, kCyl, kCam), p, kCyl, kCam, opt);
  REQUIRE(trace.size() > 10000);
  double worst = 0.0;
  for (const auto& t : trace) {
    if (t.dst[1] == t.dst[2]) continue;
    worst = std::max(worst, kappa_gap(t));
    CHECK(out.mask.at(static_cast<int>(t.pixel.x()), static_cast<int>(t.pixel.y())));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("source position increases with destination position along a line") {
  const Image img = render_reference(Pose::identity(), kCyl, kCam, smooth_texture(3)).image;
  const SampledLabel s = extract_line_samples(img, target_region(Pose::identity(), kCyl, kCam));
  Pose p;
  p.rot_x_deg = 14.0;
  p.tz = 250.0;
  const TargetRegion t = target_region(p, kCyl, kCam);
  REQUIRE(t.wider != s.region.wider);
  const ArcParam wider(t.wider_rim());
  for (double u : {0.1, 0.5, 0.9}) {
    const Vec2 a = wider.at(u);
    const Vec2 dir = longitudinal_direction(t, a);
    const Vec2 c = *hit_visible_arc(t.narrower_rim(), a, dir);
    const double len = (c - a).dot(dir);
    const double d = (t.vp.point() - a).dot(dir);
    // Upper rim is at c in the target and at 0 in the source.
    const LineSample& ls = s.samples[static_cast<size_t>(u * (s.samples.size() - 1))];
    double prev = -1.0;
    for (int i = 1; i < 100; ++i) {
      const double b_dst = len - len * i / 100.0;  // moving from the upper rim down
      const double b = solve_fourth_point(0.0, ls.c, ls.d, cross_ratio(len, b_dst, 0.0, d));
      CHECK(b > prev);
      prev = b;
    }
  }
}

TEST_CASE("output mask matches the rasterised target region up to a 1-px band") {
  const Image img = render_reference(Pose::identity(), kCyl, kCam, smooth_texture(4)).image;
  std::mt19937_64 rng(41);
  for (int i = 0; i < 3; ++i) {
    const Pose p = testing::random_pose(rng);
    const Synthesis out = synthesize_view(img, target_region(Pose::identity(), kCyl, kCam), p);
    const TargetRegion target = target_region(p, kCyl, kCam);
    const ArcParam wider(target.wider_rim());
    const Mask expected = region_mask(target, kCam.width, kCam.height);
    int bad = 0;
    for (int y = 0; y < kCam.height; ++y) {
      for (int x = 0; x < kCam.width; ++x) {
        if (out.mask.at(x, y) != expected.at(x, y) && !near_boundary(target, wider, x, y)) ++bad;
      }
    }
    CHECK(bad == 0);
    for (size_t k = 0; k < out.mask.data.size(); ++k) {
      if (!out.mask.data[k]) CHECK(out.image.data[3 * k] == 0);
    }
  }
}

TEST_CASE("synthesis is deterministic and rejects impossible poses") {
  const Image img = render_reference(Pose::identity(), kCyl, kCam, smooth_texture(5)).image;
  const LabelRegion r = target_region(Pose::identity(), kCyl, kCam);
  Pose p;
  p.rot_z_deg = 7.0;
  p.tx = -20.0;
  const Synthesis a = synthesize_view(img, r, p);
  const Synthesis b = synthesize_view(img, r, p);
  CHECK(a.image == b.image);
  CHECK(a.mask == b.mask);
  Pose inside;
  inside.tz = 0.0;
  CHECK(error_of([&] { synthesize_view(img, r, inside); }) == ErrorCode::CameraInsideCylinder);
}

TEST_CASE("synthesised sweeps are re-detected at the requested pose") {
  const Image img = render_reference(Pose::identity(), kCyl, kCam, smooth_texture(6)).image;
  const LabelRegion src = detect_label_region(img);
  Pose base;
  base.tz = 250.0;
  std::vector<Pose> sweep;
  for (double v : {-40.0, 40.0}) {
    Pose p = base;
    p.tx = v;
    sweep.push_back(p);
  }
  for (double v : {-20.0, 20.0}) {
    Pose p = base;
    p.ty = v;
    sweep.push_back(p);
  }
  for (double v : {230.0, 270.0}) {
    Pose p = base;
    p.tz = v;
    sweep.push_back(p);
  }
  for (double v : {-30.0, 30.0}) {
    Pose p = base;
    p.rot_x_deg = v;
    sweep.push_back(p);
  }
  for (double v : {-10.0, 10.0}) {
    Pose p = base;
    p.rot_z_deg = v;
    sweep.push_back(p);
  }
  for (const Pose& p : sweep) {
    const Synthesis out = synthesize_view(img, src, p);
    const TargetRegion truth = target_region(p, kCyl, kCam);
    const LabelRegion again = detect_label_region(out.image);
    CHECK(arc_rms_distance(truth.upper, again.upper.ellipse) <= 3.0);
    CHECK(arc_rms_distance(truth.lower, again.lower.ellipse) <= 3.0);
  }
}

TEST_CASE("front_view") {
  const Image tex = smooth_texture(7);
  const Rendering identity = render_reference(Pose::identity(), kCyl, kCam, tex);
  const Synthesis fv = front_view(identity.image);
  const Mask inner = erode(identity.mask, 2);
  CHECK(mean_abs_diff(fv.image, identity.image, inner) <= 3.0 / 255.0);

  Pose p;
  p.rot_x_deg = -12.0;
  p.rot_z_deg = 8.0;
  p.tx = 25.0;
  p.ty = -10.0;
  p.tz = 250.0;
  const Image posed = render_reference(p, kCyl, kCam, tex).image;
  const Synthesis normalized = front_view(posed);
  CHECK(psnr(normalized.image, identity.image, central_mask(Pose::identity(), kCyl, kCam, 0.2)) >= 20.0);

  const Synthesis twice = front_view(fv.image);
  CHECK(mean_abs_diff(twice.image, fv.image, erode(fv.mask, 2)) <= 2.0 / 255.0);

  CHECK(error_of([] { front_view(make_rgb(640, 480)); }) == ErrorCode::NoRimFound);
}
