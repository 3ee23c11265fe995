#pragma once

// Dataset generation: pose sampling, background compositing, colour jitter,
// resizing and the replayable TSV manifest.

#include "labelaug/camera.hpp"
#include "labelaug/image.hpp"
#include "labelaug/rim_detection.hpp"
#include "labelaug/synthesis.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace labelaug {

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct PoseRanges {
  Range rot_x{-15.0, 15.0};
  Range rot_z{-10.0, 10.0};
  Range tx{-40.0, 40.0};
  Range ty{-20.0, 20.0};
  Range tz{230.0, 270.0};

  bool contains(const Pose& p) const;
};

/// Maximum jitter amplitudes. Channel shift is in [0, 1] colour units, the
/// others are relative factors.
struct JitterLimits {
  double channel_shift = 20.0 / 255.0;
  double brightness = 0.15;
  double contrast = 0.15;
  double saturation = 0.15;
};

struct JitterParams {
  std::array<double, 3> shift{0.0, 0.0, 0.0};
  double brightness = 0.0;
  double contrast = 0.0;
  double saturation = 0.0;
};

struct AugmentConfig {
  int count = 320;
  PoseRanges poses;
  JitterLimits jitter;
  int width = 224;
  int height = 224;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> backgrounds;
  CameraIntrinsics camera;
  CylinderModel cylinder;
  RimDetectParams detect;
  /// Parallel output workers; 0 picks the hardware concurrency.
  int threads = 0;

  void validate() const;
};

/// Parses a JSON configuration. Missing keys keep their defaults, unknown
/// keys are rejected. A relative background directory is resolved against
/// `base_dir`.
AugmentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
AugmentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const AugmentConfig& config);

/// Deterministic 64-bit generator for one output image.
using ImageRng = std::mt19937_64;

/// hash(master seed, input name, index) via FNV-1a and splitmix64.
std::uint64_t image_seed(std::uint64_t master, const std::string& input_name, int index);

/// Uniform double in [0, 1) from the top 53 bits.
double uniform01(ImageRng& rng);
double uniform(ImageRng& rng, const Range& r);

/// Independent uniform draw per axis.
Pose sample_pose(ImageRng& rng, const PoseRanges& ranges);
JitterParams sample_jitter(ImageRng& rng, const JitterLimits& limits);

/// Saturation, contrast, brightness, then the per-channel shift; clamped.
Image apply_jitter(const Image& img, const JitterParams& params);

/// Scales `background` to cover the frame, centre-crops it and overlays the
/// synthesis where its mask is set.
Image composite_background(const Synthesis& synth, const Image& background);
/// The synthesis on black.
Image composite_black(const Synthesis& synth);

struct ManifestRecord {
  std::string output;
  std::string source;
  Pose pose;
  std::string background = "none";
  JitterParams jitter;
  std::uint64_t seed = 0;
};

std::string manifest_header();
/// Tab-separated record; doubles are written with 17 significant digits so
/// they read back exactly.
std::string to_tsv(const ManifestRecord& record);
ManifestRecord parse_manifest_line(const std::string& line);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

/// `<stem>_<index:04d>.png`
std::string output_name(const std::filesystem::path& source, int index);

/// Sorted PNG/JPEG files directly inside `dir`.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Everything an output image depends on besides its record.
struct AugmentSource {
  std::string name;
  SampledLabel samples;
};

AugmentSource prepare_source(const std::filesystem::path& path, const AugmentConfig& config);

/// Renders the image described by a record. `background` must be the image
/// named in the record, or empty for "none".
Image render_record(const AugmentSource& source, const ManifestRecord& record, const AugmentConfig& config,
                    const Image& background = {});

struct BackgroundSet {
  std::vector<std::filesystem::path> paths;
  std::vector<Image> images;

  static BackgroundSet load(const std::filesystem::path& dir);
  bool empty() const { return paths.empty(); }
  const Image& find(const std::string& name) const;
};

struct GeneratedImage {
  ManifestRecord record;
  Image image;
};

/// Label mask of a record at the output size.
Mask record_mask(const AugmentSource& source, const ManifestRecord& record, const AugmentConfig& config);

/// Draws pose, background and jitter for output `index` and renders it.
/// Poses whose view is degenerate are redrawn from the same generator, so
/// the result stays deterministic.
GeneratedImage generate_output(const AugmentSource& source, int index, const AugmentConfig& config,
                               const BackgroundSet& backgrounds);

inline constexpr int kMaxPoseAttempts = 64;

struct AugmentReport {
  std::vector<ManifestRecord> records;
  std::vector<std::string> failures;  ///< one message per skipped input or output
  int inputs = 0;
  int failed_inputs = 0;
};

using LogFn = std::function<void(const std::string&)>;

/// Generates `config.count` images for every input into `out_dir` and writes
/// `out_dir/manifest.tsv`. Records are in input order, then index order.
AugmentReport run_augment(const std::vector<std::filesystem::path>& inputs, const AugmentConfig& config,
                          const std::filesystem::path& out_dir, const LogFn& log = {});

/// Regenerates one record from its source image.
Image replay_record(const ManifestRecord& record, const std::filesystem::path& source_dir,
                    const AugmentConfig& config);

inline constexpr const char* kManifestName = "manifest.tsv";

}  // namespace labelaug
