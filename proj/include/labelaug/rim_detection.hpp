#pragma once

// Rim detection on a photo of a roughly vertical bottle: vertical edges,
// edge blocks, block chains, per-column rim points, ellipse fits and the
// label region bounded by the two common external tangents.

#include "labelaug/conic.hpp"
#include "labelaug/image.hpp"
#include "labelaug/region.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace labelaug {

struct RimDetectParams {
  double min_gradient = 80.0;
  /// Block edge length in pixels; 0 means max(4, width / 80).
  int block_size = 0;
  double min_edge_fraction = 0.6;
  int max_chain_gap = 2;
  int min_chain_blocks = 8;
  /// Rim points further than this from the first fit are dropped.
  double outlier_px = 3.0;
  double max_mean_residual = 1.5;

  void validate() const;
  int block_size_for(int image_width) const;
};

/// Signed vertical gradient (I[y+1] - I[y-1] after [1 2 1]/4 horizontal
/// smoothing of BT.601 luma, zero on the first and last row) and the mask of
/// pixels with |gradient| >= min_gradient.
struct EdgeMap {
  GrayImage gradient;
  Mask edges;
};

EdgeMap vertical_edge_map(const Image& img, const RimDetectParams& params = {});

struct EdgeBlock {
  int count = 0;
  int sign = 0;    ///< +1 / -1 for edge blocks, 0 otherwise
  int chain = -1;  ///< connected-component id among same-sign blocks
};

struct EdgeBlockGrid {
  int block_size = 0;
  int cols = 0;
  int rows = 0;
  std::vector<EdgeBlock> blocks;

  EdgeBlock& at(int bx, int by) { return blocks[static_cast<size_t>(by) * cols + bx]; }
  const EdgeBlock& at(int bx, int by) const { return blocks[static_cast<size_t>(by) * cols + bx]; }
};

/// Counts edge pixels per block, labels edge blocks by majority sign and
/// links same-sign blocks into chains.
EdgeBlockGrid edge_blocks(const EdgeMap& map, const RimDetectParams& params = {});

struct RimChain {
  std::vector<Vec2> points;  ///< one subpixel rim point per column, x increasing
  int polarity = 0;
  int extent_blocks = 0;
  int chain_id = -1;
};

struct RimChains {
  RimChain upper;
  RimChain lower;
};

RimChains extract_rim_chains(const EdgeMap& map, const RimDetectParams& params = {});
RimChains extract_rim_chains(const EdgeMap& map, const EdgeBlockGrid& grid, const RimDetectParams& params);

struct RimDetection {
  LabelRegion region;
  RimChains chains;
  EllipseFit upper_fit;
  EllipseFit lower_fit;
};

/// Full detection. With `debug_dir` set, numbered PNGs of each stage are
/// written there.
RimDetection detect_rims(const Image& img, const RimDetectParams& params = {},
                         const std::optional<std::filesystem::path>& debug_dir = std::nullopt);

LabelRegion detect_label_region(const Image& img, const RimDetectParams& params = {},
                                const std::optional<std::filesystem::path>& debug_dir = std::nullopt);

}  // namespace labelaug
