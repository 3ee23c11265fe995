#include "labelaug/synthesis.hpp"

#include "labelaug/error.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace labelaug {

Rgb LineSample::color_at(double s) const {
  const double len = last - first;
  const double t = len > 0.0 ? (s - first) / len : 0.0;
  const double pos = std::clamp(t, 0.0, 1.0) * static_cast<double>(colors.size() - 1);
  const size_t i = std::min(static_cast<size_t>(pos), colors.size() - 2);
  const double f = pos - static_cast<double>(i);
  Rgb out{};
  for (int k = 0; k < 3; ++k) out[k] = (1.0 - f) * colors[i][k] + f * colors[i + 1][k];
  return out;
}

namespace {

double vp_position(const LabelRegion& region, const Vec2& origin, const Vec2& dir) {
  if (region.vp.is_infinite()) return kAtInfinity;
  return (region.vp.point() - origin).dot(dir);
}

// Positions of the upper-rim and lower-rim anchors on a line whose origin
// is on the wider rim and whose narrower-rim anchor sits at c.
std::pair<double, double> rim_anchors(Rim wider, double c) {
  return wider == Rim::Upper ? std::pair{0.0, c} : std::pair{c, 0.0};
}

}  // namespace

SampledLabel extract_line_samples(const Image& img, const LabelRegion& region, double spacing) {
  if (img.empty()) fail(ErrorCode::InvalidArgument, "source image is empty");
  if (!(spacing > 0.0)) fail(ErrorCode::InvalidArgument, "sample spacing must be positive");
  const Image rgb = to_rgb(img);
  const ArcParam wider(region.wider_rim());
  if (wider.length() < kMinRimArcPixels) fail(ErrorCode::RegionTooNarrow, "wider rim arc is too short");

  SampledLabel out;
  out.region = region;
  const int n = static_cast<int>(std::ceil(wider.length())) + 1;
  out.samples.reserve(n);
  out.u.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double u = static_cast<double>(k) / (n - 1);
    LineSample s;
    s.start = wider.at(u);
    s.direction = longitudinal_direction(region, s.start);
    const auto end = hit_visible_arc(region.narrower_rim(), s.start, s.direction);
    if (!end) fail(ErrorCode::NoIntersection, "longitudinal line misses the narrower rim");
    s.end = *end;
    s.c = (s.end - s.start).dot(s.direction);
    if (!(s.c > 0.0)) fail(ErrorCode::NoIntersection, "narrower rim lies behind the wider rim");
    s.d = vp_position(region, s.start, s.direction);
    s.spacing = spacing;
    const int count = std::max(2, static_cast<int>(std::ceil(s.c / spacing)));
    const double inset = std::min(kRimInsetPixels, 0.25 * s.c);
    s.first = s.a + inset;
    s.last = s.c - inset;
    s.colors.resize(count);
    for (int i = 0; i < count; ++i) {
      const Vec2 p = s.start + (s.first + (s.last - s.first) * i / (count - 1)) * s.direction;
      s.colors[i] = sample_bilinear(rgb, p.x(), p.y());
    }
    out.samples.push_back(std::move(s));
    out.u.push_back(u);
  }
  return out;
}

namespace {

struct PixelResult {
  Rgb color{};
  ReprojectionTrace trace;
};

class Reprojector {
 public:
  Reprojector(const SampledLabel& src, const TargetRegion& target)
      : src_(src), target_(target), wider_(target.wider_rim()) {}

  std::optional<PixelResult> at(const Vec2& p) const {
    if (!target_.vp.is_infinite() && (target_.vp.point() - p).norm() < 1e-9) return std::nullopt;
    const Vec2 dir = longitudinal_direction(target_, p);
    const auto a_pt = hit_visible_arc(target_.wider_rim(), p, dir);
    if (!a_pt) return std::nullopt;
    const auto c_pt = hit_visible_arc(target_.narrower_rim(), p, dir);
    if (!c_pt) return std::nullopt;
    const double c = (*c_pt - *a_pt).dot(dir);
    if (!(c > 0.0)) return std::nullopt;
    const double b = (p - *a_pt).dot(dir);
    const double d = vp_position(target_, *a_pt, dir);
    double u = wider_.fraction_of(*a_pt);
    if (u < -0.01 || u > 1.01) return std::nullopt;
    u = std::clamp(u, 0.0, 1.0);

    const auto [up, lo] = rim_anchors(target_.wider, c);
    const double kappa = cross_ratio(up, b, lo, d);

    const size_t n = src_.samples.size();
    const double f = u * static_cast<double>(n - 1);
    const size_t k0 = std::min(static_cast<size_t>(f), n - 2);
    const double w = f - static_cast<double>(k0);

    PixelResult r;
    r.trace.pixel = p;
    r.trace.dst[0] = up;
    r.trace.dst[1] = b;
    r.trace.dst[2] = lo;
    r.trace.dst[3] = d;
    for (size_t j = 0; j < 2; ++j) {
      const size_t k = k0 + j;
      const double weight = j == 0 ? 1.0 - w : w;
      const LineSample& s = src_.samples[k];
      const auto [sup, slo] = rim_anchors(src_.region.wider, s.c);
      const double sb = solve_fourth_point(sup, slo, s.d, kappa);
      if ((j == 0) == (w <= 0.5)) {
        r.trace.source_line = k;
        r.trace.src[0] = sup;
        r.trace.src[1] = sb;
        r.trace.src[2] = slo;
        r.trace.src[3] = s.d;
      }
      if (weight == 0.0) continue;
      const Rgb col = s.color_at(sb);
      for (int ch = 0; ch < 3; ++ch) r.color[ch] += weight * col[ch];
    }
    return r;
  }

 private:
  const SampledLabel& src_;
  const TargetRegion& target_;
  ArcParam wider_;
};

// Pixels visited by a 1-px DDA from p to q.
template <typename F>
void rasterize_segment(const Vec2& p, const Vec2& q, F&& visit) {
  const Vec2 d = q - p;
  const int steps = static_cast<int>(std::ceil(std::max(std::abs(d.x()), std::abs(d.y()))));
  for (int i = 0; i <= steps; ++i) {
    const Vec2 s = steps ? Vec2(p + d * (static_cast<double>(i) / steps)) : p;
    visit(static_cast<int>(std::lround(s.x())), static_cast<int>(std::lround(s.y())));
  }
}

void fill_gaps(Synthesis& out, const Mask& inside) {
  const Image img = out.image;
  const Mask written = out.mask;
  const auto median_of = [](std::vector<std::uint8_t>& v) -> std::uint8_t {
    std::sort(v.begin(), v.end());
    const size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : static_cast<std::uint8_t>((v[m - 1] + v[m] + 1) / 2);
  };
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (written.at(x, y) || !inside.at(x, y)) continue;
      for (const auto& offsets : {std::array{Vec2(-1, 0), Vec2(1, 0)}, std::array{Vec2(0, -1), Vec2(0, 1)}}) {
        std::vector<int> xs, ys;
        for (const Vec2& o : offsets) {
          const int nx = x + static_cast<int>(o.x()), ny = y + static_cast<int>(o.y());
          if (written.contains(nx, ny) && written.at(nx, ny)) {
            xs.push_back(nx);
            ys.push_back(ny);
          }
        }
        if (xs.empty()) continue;
        for (int ch = 0; ch < 3; ++ch) {
          std::vector<std::uint8_t> vals;
          for (size_t i = 0; i < xs.size(); ++i) vals.push_back(img.at(xs[i], ys[i], ch));
          out.image.at(x, y, ch) = median_of(vals);
        }
        out.mask.at(x, y) = 255;
        break;
      }
    }
  }
}

}  // namespace

Synthesis reproject(const SampledLabel& samples, const TargetRegion& target, int width, int height,
                    const ReprojectOptions& options) {
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "output size must be positive");
  if (samples.samples.size() < 2) fail(ErrorCode::InvalidArgument, "need at least two line samples");
  if (options.trace_stride < 1) fail(ErrorCode::InvalidArgument, "trace_stride must be >= 1");
  if (options.threads < 0) fail(ErrorCode::InvalidArgument, "threads must be >= 0");
  const ArcParam wider(target.wider_rim());
  if (wider.length() < 2.0) fail(ErrorCode::EmptyTarget, "target wider rim arc is shorter than 2 pixels");

  // One target line per wider-rim pixel; the lines decide which pixels are
  // written, every pixel is then mapped through its own longitudinal line.
  Mask cover = make_mask(width, height);
  const int n_lines = static_cast<int>(std::ceil(wider.length())) + 1;
  for (int k = 0; k < n_lines; ++k) {
    const Vec2 a = wider.at(static_cast<double>(k) / (n_lines - 1));
    const Vec2 dir = longitudinal_direction(target, a);
    const auto c = hit_visible_arc(target.narrower_rim(), a, dir);
    if (!c) continue;
    rasterize_segment(a, *c, [&](int x, int y) {
      if (cover.contains(x, y)) cover.at(x, y) = 255;
    });
  }

  Synthesis out{make_rgb(width, height), make_mask(width, height)};
  std::vector<std::optional<ReprojectionTrace>> traces;
  if (options.trace) traces.resize(static_cast<size_t>(width) * height);
  const Reprojector map(samples, target);
  const auto run_rows = [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < width; ++x) {
        if (!cover.at(x, y)) continue;
        const auto r = map.at(Vec2(x, y));
        if (!r) continue;
        for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = clamp_u8(r->color[ch]);
        out.mask.at(x, y) = 255;
        if (options.trace) traces[static_cast<size_t>(y) * width + x] = r->trace;
      }
    }
  };
  const int workers = options.threads > 0
                          ? options.threads
                          : static_cast<int>(std::clamp(std::thread::hardware_concurrency(), 1u, 16u));
  if (workers == 1) {
    run_rows(0, height);
  } else {
    std::vector<std::jthread> pool;
    const int chunk = (height + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int y0 = w * chunk, y1 = std::min(height, y0 + chunk);
      if (y0 < y1) pool.emplace_back(run_rows, y0, y1);
    }
  }

  if (options.trace) {
    size_t seen = 0;
    for (const auto& t : traces) {
      if (!t) continue;
      if (seen++ % static_cast<size_t>(options.trace_stride) == 0) options.trace->push_back(*t);
    }
  }
  if (options.fill_gaps) fill_gaps(out, region_mask(target, width, height));
  return out;
}

Synthesis synthesize_view(const Image& img, const LabelRegion& region, const Pose& pose, const CylinderModel& cyl,
                          const CameraIntrinsics& cam, const SynthesisOptions& options) {
  const TargetRegion target = target_region(pose, cyl, cam);
  const SampledLabel samples = extract_line_samples(img, region, options.spacing);
  return reproject(samples, target, cam.width, cam.height, options.reproject);
}

Synthesis front_view(const Image& img, const RimDetectParams& params) {
  const LabelRegion region = detect_label_region(img, params);
  return synthesize_view(img, region, Pose::identity());
}

}  // namespace labelaug
