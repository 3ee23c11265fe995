#include "labelaug/rim_detection.hpp"

#include "labelaug/error.hpp"
#include "labelaug/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace labelaug {

void RimDetectParams::validate() const {
  if (!(min_gradient > 0.0)) fail(ErrorCode::InvalidArgument, "min_gradient must be positive");
  if (!(min_edge_fraction > 0.0 && min_edge_fraction <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "min_edge_fraction must be in (0, 1]");
  }
  if (block_size != 0 && block_size < 2) fail(ErrorCode::InvalidArgument, "block_size must be >= 2");
  if (max_chain_gap < 0) fail(ErrorCode::InvalidArgument, "max_chain_gap must be >= 0");
  if (min_chain_blocks < 1) fail(ErrorCode::InvalidArgument, "min_chain_blocks must be >= 1");
  if (!(outlier_px > 0.0)) fail(ErrorCode::InvalidArgument, "outlier_px must be positive");
}

int RimDetectParams::block_size_for(int image_width) const {
  return block_size > 0 ? block_size : std::max(4, image_width / 80);
}

EdgeMap vertical_edge_map(const Image& img, const RimDetectParams& params) {
  params.validate();
  if (img.width < 1 || img.height < 2) fail(ErrorCode::ImageTooSmall, "image must be at least 1x2 pixels");
  const int w = img.width, h = img.height;
  // Luma in integer thousandths keeps gradients exact, so a constant
  // brightness offset leaves them unchanged.
  std::vector<std::int64_t> luma(static_cast<size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::int64_t v;
      if (img.channels >= 3) {
        v = 299 * img.at(x, y, 0) + 587 * img.at(x, y, 1) + 114 * img.at(x, y, 2);
      } else {
        v = 1000 * img.at(x, y, 0);
      }
      luma[static_cast<size_t>(y) * w + x] = v;
    }
  }
  EdgeMap map{GrayImage(w, h, 1), make_mask(w, h)};
  const auto lum = [&](int x, int y) { return luma[static_cast<size_t>(y) * w + std::clamp(x, 0, w - 1)]; };
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::int64_t acc = 0;
      for (int k = -1; k <= 1; ++k) {
        const std::int64_t weight = k == 0 ? 2 : 1;
        acc += weight * (lum(x + k, y + 1) - lum(x + k, y - 1));
      }
      const double g = static_cast<double>(acc) / 4000.0;
      map.gradient.at(x, y) = static_cast<float>(g);
      if (std::abs(g) >= params.min_gradient) map.edges.at(x, y) = 255;
    }
  }
  return map;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

EdgeBlockGrid edge_blocks(const EdgeMap& map, const RimDetectParams& params) {
  params.validate();
  EdgeBlockGrid grid;
  grid.block_size = params.block_size_for(map.edges.width);
  const int bs = grid.block_size;
  grid.cols = (map.edges.width + bs - 1) / bs;
  grid.rows = (map.edges.height + bs - 1) / bs;
  grid.blocks.assign(static_cast<size_t>(grid.cols) * grid.rows, {});
  const double threshold = params.min_edge_fraction * bs;
  for (int by = 0; by < grid.rows; ++by) {
    for (int bx = 0; bx < grid.cols; ++bx) {
      int count = 0, positive = 0;
      for (int y = by * bs; y < std::min((by + 1) * bs, map.edges.height); ++y) {
        for (int x = bx * bs; x < std::min((bx + 1) * bs, map.edges.width); ++x) {
          if (!map.edges.at(x, y)) continue;
          ++count;
          if (map.gradient.at(x, y) > 0.0f) ++positive;
        }
      }
      EdgeBlock& b = grid.at(bx, by);
      b.count = count;
      if (count > 0 && count >= threshold) b.sign = 2 * positive >= count ? 1 : -1;
    }
  }

  UnionFind uf(grid.blocks.size());
  const int reach = params.max_chain_gap + 1;
  for (int by = 0; by < grid.rows; ++by) {
    for (int bx = 0; bx < grid.cols; ++bx) {
      const int sign = grid.at(bx, by).sign;
      if (!sign) continue;
      for (int dx = 0; dx <= reach && bx + dx < grid.cols; ++dx) {
        const int dy_max = std::max(1, dx);
        for (int dy = -dy_max; dy <= dy_max; ++dy) {
          if (dx == 0 && dy <= 0) continue;
          const int nx = bx + dx, ny = by + dy;
          if (ny < 0 || ny >= grid.rows || grid.at(nx, ny).sign != sign) continue;
          uf.unite(by * grid.cols + bx, ny * grid.cols + nx);
        }
      }
    }
  }
  for (size_t i = 0; i < grid.blocks.size(); ++i) {
    if (grid.blocks[i].sign) grid.blocks[i].chain = uf.find(static_cast<int>(i));
  }
  return grid;
}

namespace {

struct ChainExtent {
  int id = -1;
  int sign = 0;
  int min_bx = 0, max_bx = -1;
  int extent() const { return max_bx - min_bx + 1; }
};

RimChain trace_chain(const EdgeMap& map, const EdgeBlockGrid& grid, const ChainExtent& ce,
                     const RimDetectParams& params) {
  const int bs = grid.block_size;
  // Vertical block span of the chain in each block column.
  std::vector<std::pair<int, int>> span(grid.cols, {grid.rows, -1});
  for (int by = 0; by < grid.rows; ++by) {
    for (int bx = ce.min_bx; bx <= ce.max_bx; ++bx) {
      if (grid.at(bx, by).chain != ce.id) continue;
      span[bx].first = std::min(span[bx].first, by);
      span[bx].second = std::max(span[bx].second, by);
    }
  }
  RimChain chain;
  chain.polarity = ce.sign;
  chain.extent_blocks = ce.extent();
  chain.chain_id = ce.id;
  const int h = map.gradient.height;
  for (int bx = ce.min_bx; bx <= ce.max_bx; ++bx) {
    int lo = span[bx].first, hi = span[bx].second;
    if (hi < lo) {
      // Gap column: borrow the rows of the nearest chain columns.
      for (int k = bx - 1; k >= ce.min_bx; --k) {
        if (span[k].second >= span[k].first) {
          lo = std::min(lo, span[k].first);
          hi = std::max(hi, span[k].second);
          break;
        }
      }
      for (int k = bx + 1; k <= ce.max_bx; ++k) {
        if (span[k].second >= span[k].first) {
          lo = std::min(lo, span[k].first);
          hi = std::max(hi, span[k].second);
          break;
        }
      }
    }
    const int y_begin = std::max(1, (lo - 1) * bs);
    const int y_end = std::min(h - 1, (hi + 2) * bs);
    for (int x = bx * bs; x < std::min((bx + 1) * bs, map.gradient.width); ++x) {
      int best = -1;
      double best_mag = 0.0;
      for (int y = y_begin; y < y_end; ++y) {
        const double g = map.gradient.at(x, y) * ce.sign;
        if (g >= params.min_gradient && g > best_mag) {
          best_mag = g;
          best = y;
        }
      }
      if (best < 0) continue;
      const double gm = std::abs(map.gradient.at(x, best - 1));
      const double gp = std::abs(map.gradient.at(x, std::min(best + 1, h - 1)));
      const double denom = gm - 2.0 * best_mag + gp;
      double offset = denom < 0.0 ? 0.5 * (gm - gp) / denom : 0.0;
      offset = std::clamp(offset, -0.5, 0.5);
      chain.points.emplace_back(x, best + offset);
    }
  }
  return chain;
}

}  // namespace

RimChains extract_rim_chains(const EdgeMap& map, const EdgeBlockGrid& grid, const RimDetectParams& params) {
  if (map.edges.empty()) fail(ErrorCode::ImageTooSmall, "edge map is empty");
  std::map<int, ChainExtent> chains;
  for (int by = 0; by < grid.rows; ++by) {
    for (int bx = 0; bx < grid.cols; ++bx) {
      const EdgeBlock& b = grid.at(bx, by);
      if (b.chain < 0) continue;
      auto [it, inserted] = chains.try_emplace(b.chain);
      ChainExtent& ce = it->second;
      if (inserted) {
        ce.id = b.chain;
        ce.sign = b.sign;
        ce.min_bx = ce.max_bx = bx;
      }
      ce.min_bx = std::min(ce.min_bx, bx);
      ce.max_bx = std::max(ce.max_bx, bx);
    }
  }
  const ChainExtent* best_pos = nullptr;
  const ChainExtent* best_neg = nullptr;
  for (const auto& [id, ce] : chains) {
    const ChainExtent*& slot = ce.sign > 0 ? best_pos : best_neg;
    if (!slot || ce.extent() > slot->extent()) slot = &ce;
  }
  if (!best_pos || !best_neg || best_pos->extent() < params.min_chain_blocks ||
      best_neg->extent() < params.min_chain_blocks) {
    fail(ErrorCode::NoRimFound, "no rim found");
  }
  RimChain pos = trace_chain(map, grid, *best_pos, params);
  RimChain neg = trace_chain(map, grid, *best_neg, params);
  if (pos.points.empty() || neg.points.empty()) fail(ErrorCode::NoRimFound, "no rim found");
  const auto mean_y = [](const RimChain& c) {
    double s = 0.0;
    for (const Vec2& p : c.points) s += p.y();
    return s / static_cast<double>(c.points.size());
  };
  if (mean_y(pos) <= mean_y(neg)) return {std::move(pos), std::move(neg)};
  return {std::move(neg), std::move(pos)};
}

RimChains extract_rim_chains(const EdgeMap& map, const RimDetectParams& params) {
  return extract_rim_chains(map, edge_blocks(map, params), params);
}

namespace {

EllipseFit robust_fit(const std::vector<Vec2>& pts, double outlier_px) {
  EllipseFit fit = fit_ellipse(pts);
  std::vector<Vec2> kept;
  kept.reserve(pts.size());
  for (const Vec2& p : pts) {
    if (std::abs(fit.ellipse.closest_point(p).distance) <= outlier_px) kept.push_back(p);
  }
  if (kept.size() < pts.size() && kept.size() >= 6) fit = fit_ellipse(kept);
  return fit;
}

// Point of the ellipse furthest from its chord on the side the chain lies.
Vec2 arc_apex(const Ellipse& e, const Vec2& left, const Vec2& right, const std::vector<Vec2>& chain) {
  const Vec2 chord = right - left;
  double side = 0.0;
  for (const Vec2& p : chain) side += cross2(chord, p - left);
  // perp(chord) points to the side where cross2(chord, .) > 0.
  Vec2 n = perp(chord).normalized();
  if (side < 0.0) n = -n;
  const Mat3 h = e.from_unit_circle();
  const Eigen::Matrix2d lin = h.block<2, 2>(0, 0);
  const Vec2 u = (lin.transpose() * n).normalized();
  return e.center() + lin * u;
}

// Drawing helpers for the debug dump.
void put(Image& img, int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (!img.contains(x, y)) return;
  img.at(x, y, 0) = r;
  img.at(x, y, 1) = g;
  img.at(x, y, 2) = b;
}

void draw_dot(Image& img, const Vec2& p, int radius, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int cx = static_cast<int>(std::lround(p.x())), cy = static_cast<int>(std::lround(p.y()));
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) put(img, cx + dx, cy + dy, r, g, b);
  }
}

void draw_line(Image& img, const HLine& l, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const bool steep = std::abs(l.h.x()) > std::abs(l.h.y());
  const int n = steep ? img.height : img.width;
  for (int i = 0; i < n; ++i) {
    const double other = steep ? -(l.h.y() * i + l.h.z()) / l.h.x() : -(l.h.x() * i + l.h.z()) / l.h.y();
    const int o = static_cast<int>(std::lround(other));
    if (steep) {
      put(img, o, i, r, g, b);
    } else {
      put(img, i, o, r, g, b);
    }
  }
}

void draw_ellipse(Image& img, const Ellipse& e, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int n = static_cast<int>(std::max(64.0, 8.0 * e.a));
  for (int i = 0; i < n; ++i) {
    const Vec2 p = e.point_at(2.0 * kPi * i / n);
    put(img, static_cast<int>(std::lround(p.x())), static_cast<int>(std::lround(p.y())), r, g, b);
  }
}

class DebugDump {
 public:
  explicit DebugDump(const std::optional<std::filesystem::path>& dir) : dir_(dir) {
    if (dir_) std::filesystem::create_directories(*dir_);
  }
  bool enabled() const { return dir_.has_value(); }
  void write(const std::string& name, const Image& img) {
    if (!dir_) return;
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%02d_", ++stage_);
    write_png(*dir_ / (prefix + name + ".png"), img);
  }

 private:
  std::optional<std::filesystem::path> dir_;
  int stage_ = 0;
};

Image gray_view(const Image& img) {
  const GrayImage g = to_gray(img);
  Image out = make_rgb(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::uint8_t v = clamp_u8(g.at(x, y));
      put(out, x, y, v, v, v);
    }
  }
  return out;
}

}  // namespace

RimDetection detect_rims(const Image& img, const RimDetectParams& params,
                         const std::optional<std::filesystem::path>& debug_dir) {
  DebugDump dump(debug_dir);
  const Image gray = dump.enabled() ? gray_view(img) : Image{};
  dump.write("gray", gray);

  const EdgeMap map = vertical_edge_map(img, params);
  if (dump.enabled()) {
    Image edges = make_rgb(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        if (!map.edges.at(x, y)) continue;
        if (map.gradient.at(x, y) > 0.0f) {
          put(edges, x, y, 255, 0, 0);
        } else {
          put(edges, x, y, 0, 255, 0);
        }
      }
    }
    dump.write("edges", edges);
  }

  const EdgeBlockGrid grid = edge_blocks(map, params);
  const auto paint_blocks = [&](Image& out, const auto& keep) {
    const int bs = grid.block_size;
    for (int by = 0; by < grid.rows; ++by) {
      for (int bx = 0; bx < grid.cols; ++bx) {
        const EdgeBlock& b = grid.at(bx, by);
        if (!b.sign || !keep(b)) continue;
        for (int y = by * bs; y < (by + 1) * bs; ++y) {
          for (int x = bx * bs; x < (bx + 1) * bs; ++x) {
            if (b.sign > 0) {
              put(out, x, y, 255, 0, 0);
            } else {
              put(out, x, y, 0, 255, 0);
            }
          }
        }
      }
    }
  };
  if (dump.enabled()) {
    Image blocks = gray;
    paint_blocks(blocks, [](const EdgeBlock&) { return true; });
    dump.write("edge_blocks", blocks);
  }

  RimDetection det;
  det.chains = extract_rim_chains(map, grid, params);
  if (dump.enabled()) {
    Image chains = gray;
    paint_blocks(chains, [&](const EdgeBlock& b) {
      return b.chain == det.chains.upper.chain_id || b.chain == det.chains.lower.chain_id;
    });
    dump.write("chains", chains);
    Image points = gray;
    for (const Vec2& p : det.chains.upper.points) draw_dot(points, p, 0, 255, 255, 0);
    for (const Vec2& p : det.chains.lower.points) draw_dot(points, p, 0, 0, 255, 255);
    dump.write("rim_points", points);
  }

  det.upper_fit = robust_fit(det.chains.upper.points, params.outlier_px);
  det.lower_fit = robust_fit(det.chains.lower.points, params.outlier_px);
  if (dump.enabled()) {
    Image fits = gray;
    draw_ellipse(fits, det.upper_fit.ellipse, 255, 255, 0);
    draw_ellipse(fits, det.lower_fit.ellipse, 0, 255, 255);
    dump.write("ellipses", fits);
  }
  if (det.upper_fit.geometric_mean > params.max_mean_residual ||
      det.lower_fit.geometric_mean > params.max_mean_residual) {
    fail(ErrorCode::DegenerateFit, "rim ellipse fit residual too large");
  }

  const CommonTangents ct = common_external_tangents(det.upper_fit.ellipse, det.lower_fit.ellipse);
  LabelRegion& r = det.region;
  r.upper = {det.upper_fit.ellipse, ct.left_touch1, ct.right_touch1, Vec2::Zero()};
  r.lower = {det.lower_fit.ellipse, ct.left_touch2, ct.right_touch2, Vec2::Zero()};
  r.upper.apex = arc_apex(r.upper.ellipse, r.upper.left, r.upper.right, det.chains.upper.points);
  r.lower.apex = arc_apex(r.lower.ellipse, r.lower.left, r.lower.right, det.chains.lower.points);
  r.left = ct.left;
  r.right = ct.right;
  r.vp = ct.vp;
  r.wider = wider_of(r.upper, r.lower);
  r.upper_residual = det.upper_fit.geometric_mean;
  r.lower_residual = det.lower_fit.geometric_mean;

  if (dump.enabled()) {
    Image region = to_rgb(img);
    const Mask inside = region_mask(r, img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        if (inside.at(x, y)) region.at(x, y, 2) = static_cast<std::uint8_t>((region.at(x, y, 2) + 255) / 2);
      }
    }
    draw_ellipse(region, r.upper.ellipse, 255, 255, 0);
    draw_ellipse(region, r.lower.ellipse, 0, 255, 255);
    draw_line(region, r.left, 255, 0, 255);
    draw_line(region, r.right, 255, 0, 255);
    for (const Vec2& p : {r.upper.left, r.upper.right, r.lower.left, r.lower.right}) {
      draw_dot(region, p, 2, 255, 0, 0);
    }
    draw_dot(region, r.upper.apex, 2, 0, 0, 255);
    draw_dot(region, r.lower.apex, 2, 0, 0, 255);
    dump.write("region", region);
  }
  return det;
}

LabelRegion detect_label_region(const Image& img, const RimDetectParams& params,
                                const std::optional<std::filesystem::path>& debug_dir) {
  return detect_rims(img, params, debug_dir).region;
}

}  // namespace labelaug
