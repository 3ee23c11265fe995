#pragma once

// Line samples from a detected label and their cross-ratio re-projection
// onto the label region of a new pose.

#include "labelaug/camera.hpp"
#include "labelaug/image.hpp"
#include "labelaug/region.hpp"
#include "labelaug/rim_detection.hpp"

#include <vector>

namespace labelaug {

/// Colours along one longitudinal segment A_k C_k. Positions are signed
/// distances from A_k along `direction`; A_k is on the wider rim.
struct LineSample {
  Vec2 start = Vec2::Zero();  ///< A_k
  Vec2 end = Vec2::Zero();    ///< C_k
  Vec2 direction = Vec2::UnitY();
  double a = 0.0;
  double c = 0.0;
  double d = kAtInfinity;
  double spacing = 1.0;
  /// Positions of the first and last colour; slightly inside [a, c] so that
  /// anti-aliased rim pixels are not sampled.
  double first = 0.0;
  double last = 0.0;
  std::vector<Rgb> colors;  ///< evenly spaced from `first` to `last`

  /// Linearly interpolated colour at position s, clamped to [first, last].
  Rgb color_at(double s) const;
};

struct SampledLabel {
  std::vector<LineSample> samples;
  std::vector<double> u;  ///< transverse parameter, 0 .. 1
  LabelRegion region;
};

inline constexpr int kMinRimArcPixels = 16;
inline constexpr double kRimInsetPixels = 1.5;

SampledLabel extract_line_samples(const Image& img, const LabelRegion& region, double spacing = 1.0);

/// One written destination pixel with the quadruples used for it. Positions
/// are ordered (upper rim, pixel, lower rim, vanishing point) on each line.
struct ReprojectionTrace {
  Vec2 pixel = Vec2::Zero();
  double dst[4] = {0.0, 0.0, 0.0, 0.0};
  size_t source_line = 0;
  double src[4] = {0.0, 0.0, 0.0, 0.0};
};

struct ReprojectOptions {
  bool fill_gaps = true;
  /// When set, every `trace_stride`-th written pixel is recorded.
  std::vector<ReprojectionTrace>* trace = nullptr;
  int trace_stride = 1;
  /// Worker threads over image rows; 0 picks the hardware concurrency.
  int threads = 0;
};

struct Synthesis {
  Image image;
  Mask mask;
};

Synthesis reproject(const SampledLabel& samples, const TargetRegion& target, int width, int height,
                    const ReprojectOptions& options = {});

struct SynthesisOptions {
  double spacing = 1.0;
  ReprojectOptions reproject;
};

Synthesis synthesize_view(const Image& img, const LabelRegion& region, const Pose& pose,
                          const CylinderModel& cyl = {}, const CameraIntrinsics& cam = {},
                          const SynthesisOptions& options = {});

/// Detects the label and re-synthesises it at the identity pose with the
/// default cylinder and camera.
Synthesis front_view(const Image& img, const RimDetectParams& params = {});

}  // namespace labelaug
