#include "labelaug/augment.hpp"

#include "labelaug/error.hpp"
#include "labelaug/image_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace labelaug {

using nlohmann::json;

namespace {

void check_range(const Range& r, const char* name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
    fail(ErrorCode::InvalidArgument, std::string("invalid range for ") + name);
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::ParseError, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      fail(ErrorCode::ParseError, "unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read_value(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::ParseError, std::string("bad value for '") + key + "' in " + where);
  }
}

void read_range(const json& j, const char* key, Range& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    fail(ErrorCode::ParseError, std::string("range '") + key + "' must be [low, high]");
  }
  out = {v[0].get<double>(), v[1].get<double>()};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const char* field) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  fail(ErrorCode::ParseError, std::string("bad ") + field + " '" + s + "'");
}

bool is_geometry_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateView:
    case ErrorCode::BehindCamera:
    case ErrorCode::CameraInsideCylinder:
    case ErrorCode::EmptyTarget:
    case ErrorCode::NoIntersection:
      return true;
    default:
      return false;
  }
}

Synthesis synthesize(const AugmentSource& source, const Pose& pose, const AugmentConfig& config) {
  const TargetRegion target = target_region(pose, config.cylinder, config.camera);
  ReprojectOptions opts;
  opts.threads = 1;
  return reproject(source.samples, target, config.camera.width, config.camera.height, opts);
}

Image finish(const Synthesis& synth, const ManifestRecord& record, const AugmentConfig& config,
             const Image& background) {
  const Image framed = background.empty() ? composite_black(synth) : composite_background(synth, background);
  return resize_area(apply_jitter(framed, record.jitter), config.width, config.height);
}

}  // namespace

bool PoseRanges::contains(const Pose& p) const {
  return rot_x.contains(p.rot_x_deg) && rot_z.contains(p.rot_z_deg) && tx.contains(p.tx) && ty.contains(p.ty) &&
         tz.contains(p.tz);
}

void AugmentConfig::validate() const {
  if (count < 1) fail(ErrorCode::InvalidArgument, "count must be at least 1");
  if (width < 32 || height < 32) fail(ErrorCode::InvalidArgument, "output size must be at least 32x32");
  if (threads < 0) fail(ErrorCode::InvalidArgument, "threads must be >= 0");
  check_range(poses.rot_x, "rot_x");
  check_range(poses.rot_z, "rot_z");
  check_range(poses.tx, "tx");
  check_range(poses.ty, "ty");
  check_range(poses.tz, "tz");
  for (double v : {jitter.channel_shift, jitter.brightness, jitter.contrast, jitter.saturation}) {
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::InvalidArgument, "jitter amplitudes must be in [0, 1]");
  }
  camera.validate();
  cylinder.validate();
  detect.validate();
}

AugmentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, std::string("config is not valid JSON: ") + e.what());
  }
  AugmentConfig c;
  check_keys(j, {"count", "seed", "size", "threads", "backgrounds", "poses", "jitter", "camera", "cylinder", "detect"},
             "config");
  read_value(j, "count", c.count, "config");
  read_value(j, "seed", c.seed, "config");
  read_value(j, "threads", c.threads, "config");
  if (j.contains("size")) {
    const json& s = j.at("size");
    if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() || !s[1].is_number_integer()) {
      fail(ErrorCode::ParseError, "size must be [width, height]");
    }
    c.width = s[0].get<int>();
    c.height = s[1].get<int>();
  }
  if (j.contains("backgrounds") && !j.at("backgrounds").is_null()) {
    std::string dir;
    read_value(j, "backgrounds", dir, "config");
    std::filesystem::path p(dir);
    c.backgrounds = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  if (j.contains("poses")) {
    const json& p = j.at("poses");
    check_keys(p, {"rot_x", "rot_z", "tx", "ty", "tz"}, "poses");
    read_range(p, "rot_x", c.poses.rot_x);
    read_range(p, "rot_z", c.poses.rot_z);
    read_range(p, "tx", c.poses.tx);
    read_range(p, "ty", c.poses.ty);
    read_range(p, "tz", c.poses.tz);
  }
  if (j.contains("jitter")) {
    const json& p = j.at("jitter");
    check_keys(p, {"channel_shift", "brightness", "contrast", "saturation"}, "jitter");
    read_value(p, "channel_shift", c.jitter.channel_shift, "jitter");
    read_value(p, "brightness", c.jitter.brightness, "jitter");
    read_value(p, "contrast", c.jitter.contrast, "jitter");
    read_value(p, "saturation", c.jitter.saturation, "jitter");
  }
  if (j.contains("camera")) {
    const json& p = j.at("camera");
    check_keys(p, {"focal_mm", "pixel_pitch_mm", "width", "height", "cx", "cy"}, "camera");
    read_value(p, "focal_mm", c.camera.focal_mm, "camera");
    read_value(p, "pixel_pitch_mm", c.camera.pixel_pitch_mm, "camera");
    read_value(p, "width", c.camera.width, "camera");
    read_value(p, "height", c.camera.height, "camera");
    read_value(p, "cx", c.camera.cx, "camera");
    read_value(p, "cy", c.camera.cy, "camera");
  }
  if (j.contains("cylinder")) {
    const json& p = j.at("cylinder");
    check_keys(p, {"radius_mm", "label_top_mm", "label_bottom_mm"}, "cylinder");
    read_value(p, "radius_mm", c.cylinder.radius_mm, "cylinder");
    read_value(p, "label_top_mm", c.cylinder.label_top_mm, "cylinder");
    read_value(p, "label_bottom_mm", c.cylinder.label_bottom_mm, "cylinder");
  }
  if (j.contains("detect")) {
    const json& p = j.at("detect");
    check_keys(p,
               {"min_gradient", "block_size", "min_edge_fraction", "max_chain_gap", "min_chain_blocks", "outlier_px",
                "max_mean_residual"},
               "detect");
    read_value(p, "min_gradient", c.detect.min_gradient, "detect");
    read_value(p, "block_size", c.detect.block_size, "detect");
    read_value(p, "min_edge_fraction", c.detect.min_edge_fraction, "detect");
    read_value(p, "max_chain_gap", c.detect.max_chain_gap, "detect");
    read_value(p, "min_chain_blocks", c.detect.min_chain_blocks, "detect");
    read_value(p, "outlier_px", c.detect.outlier_px, "detect");
    read_value(p, "max_mean_residual", c.detect.max_mean_residual, "detect");
  }
  c.validate();
  return c;
}

AugmentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

std::string config_to_json(const AugmentConfig& c) {
  const auto range = [](const Range& r) { return json::array({r.lo, r.hi}); };
  json j;
  j["count"] = c.count;
  j["seed"] = c.seed;
  j["size"] = json::array({c.width, c.height});
  j["threads"] = c.threads;
  j["backgrounds"] = c.backgrounds ? json(c.backgrounds->string()) : json(nullptr);
  j["poses"] = {{"rot_x", range(c.poses.rot_x)},
                {"rot_z", range(c.poses.rot_z)},
                {"tx", range(c.poses.tx)},
                {"ty", range(c.poses.ty)},
                {"tz", range(c.poses.tz)}};
  j["jitter"] = {{"channel_shift", c.jitter.channel_shift},
                 {"brightness", c.jitter.brightness},
                 {"contrast", c.jitter.contrast},
                 {"saturation", c.jitter.saturation}};
  j["camera"] = {{"focal_mm", c.camera.focal_mm},
                 {"pixel_pitch_mm", c.camera.pixel_pitch_mm},
                 {"width", c.camera.width},
                 {"height", c.camera.height}};
  if (!std::isnan(c.camera.cx)) j["camera"]["cx"] = c.camera.cx;
  if (!std::isnan(c.camera.cy)) j["camera"]["cy"] = c.camera.cy;
  j["cylinder"] = {{"radius_mm", c.cylinder.radius_mm},
                   {"label_top_mm", c.cylinder.label_top_mm},
                   {"label_bottom_mm", c.cylinder.label_bottom_mm}};
  j["detect"] = {{"min_gradient", c.detect.min_gradient},
                 {"block_size", c.detect.block_size},
                 {"min_edge_fraction", c.detect.min_edge_fraction},
                 {"max_chain_gap", c.detect.max_chain_gap},
                 {"min_chain_blocks", c.detect.min_chain_blocks},
                 {"outlier_px", c.detect.outlier_px},
                 {"max_mean_residual", c.detect.max_mean_residual}};
  return j.dump(2);
}

std::uint64_t image_seed(std::uint64_t master, const std::string& input_name, int index) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ fnv1a(input_name));
  return splitmix64(h ^ static_cast<std::uint64_t>(index));
}

double uniform01(ImageRng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(ImageRng& rng, const Range& r) {
  const double v = r.lo + (r.hi - r.lo) * uniform01(rng);
  return std::min(v, r.hi);
}

Pose sample_pose(ImageRng& rng, const PoseRanges& ranges) {
  Pose p;
  p.rot_x_deg = uniform(rng, ranges.rot_x);
  p.rot_z_deg = uniform(rng, ranges.rot_z);
  p.tx = uniform(rng, ranges.tx);
  p.ty = uniform(rng, ranges.ty);
  p.tz = uniform(rng, ranges.tz);
  return p;
}

JitterParams sample_jitter(ImageRng& rng, const JitterLimits& limits) {
  const auto sym = [&](double amp) { return uniform(rng, {-amp, amp}); };
  JitterParams j;
  for (double& s : j.shift) s = sym(limits.channel_shift);
  j.brightness = sym(limits.brightness);
  j.contrast = sym(limits.contrast);
  j.saturation = sym(limits.saturation);
  return j;
}

Image apply_jitter(const Image& img, const JitterParams& p) {
  const Image src = to_rgb(img);
  const size_t n = static_cast<size_t>(src.width) * src.height;
  std::vector<double> px(n * 3);
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double r = src.data[3 * i] / 255.0, g = src.data[3 * i + 1] / 255.0, b = src.data[3 * i + 2] / 255.0;
    const double grey = 0.299 * r + 0.587 * g + 0.114 * b;
    const double k = 1.0 + p.saturation;
    px[3 * i] = grey + k * (r - grey);
    px[3 * i + 1] = grey + k * (g - grey);
    px[3 * i + 2] = grey + k * (b - grey);
    mean += 0.299 * px[3 * i] + 0.587 * px[3 * i + 1] + 0.114 * px[3 * i + 2];
  }
  mean = n ? mean / static_cast<double>(n) : 0.0;
  Image out = make_rgb(src.width, src.height);
  for (size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      double v = mean + (1.0 + p.contrast) * (px[3 * i + c] - mean);
      v = v * (1.0 + p.brightness) + p.shift[c];
      out.data[3 * i + c] = clamp_u8(v * 255.0);
    }
  }
  return out;
}

Image composite_black(const Synthesis& synth) {
  Image out = make_rgb(synth.image.width, synth.image.height);
  for (size_t i = 0; i < synth.mask.data.size(); ++i) {
    if (!synth.mask.data[i]) continue;
    for (int c = 0; c < 3; ++c) out.data[3 * i + c] = synth.image.data[3 * i + c];
  }
  return out;
}

Image composite_background(const Synthesis& synth, const Image& background) {
  if (background.empty()) fail(ErrorCode::InvalidArgument, "empty background image");
  const int w = synth.image.width, h = synth.image.height;
  const double scale = std::max(static_cast<double>(w) / background.width, static_cast<double>(h) / background.height);
  const int sw = std::max(w, static_cast<int>(std::ceil(background.width * scale - 1e-9)));
  const int sh = std::max(h, static_cast<int>(std::ceil(background.height * scale - 1e-9)));
  const Image scaled = resize_area(to_rgb(background), sw, sh);
  const int x0 = (sw - w) / 2, y0 = (sh - h) / 2;
  Image out = make_rgb(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool label = synth.mask.at(x, y) != 0;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = label ? synth.image.at(x, y, c) : scaled.at(x + x0, y + y0, c);
    }
  }
  return out;
}

std::string manifest_header() {
  return "#output\tsource\trot_x\trot_z\ttx\tty\ttz\tbackground\tshift_r\tshift_g\tshift_b\tbrightness\tcontrast\t"
         "saturation\tseed";
}

std::string to_tsv(const ManifestRecord& r) {
  std::string s = r.output + '\t' + r.source;
  for (double v : {r.pose.rot_x_deg, r.pose.rot_z_deg, r.pose.tx, r.pose.ty, r.pose.tz}) s += '\t' + format_double(v);
  s += '\t' + r.background;
  for (double v : {r.jitter.shift[0], r.jitter.shift[1], r.jitter.shift[2], r.jitter.brightness, r.jitter.contrast,
                   r.jitter.saturation}) {
    s += '\t' + format_double(v);
  }
  s += '\t' + std::to_string(r.seed);
  return s;
}

ManifestRecord parse_manifest_line(const std::string& line) {
  std::vector<std::string> f;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, '\t')) f.push_back(field);
  if (!f.empty() && !f.back().empty() && f.back().back() == '\r') f.back().pop_back();
  if (f.size() != 15) fail(ErrorCode::ParseError, "manifest record needs 15 fields, found " + std::to_string(f.size()));
  ManifestRecord r;
  r.output = f[0];
  r.source = f[1];
  r.pose.rot_x_deg = parse_double(f[2], "rot_x");
  r.pose.rot_z_deg = parse_double(f[3], "rot_z");
  r.pose.tx = parse_double(f[4], "tx");
  r.pose.ty = parse_double(f[5], "ty");
  r.pose.tz = parse_double(f[6], "tz");
  r.background = f[7];
  for (int c = 0; c < 3; ++c) r.jitter.shift[c] = parse_double(f[8 + c], "shift");
  r.jitter.brightness = parse_double(f[11], "brightness");
  r.jitter.contrast = parse_double(f[12], "contrast");
  r.jitter.saturation = parse_double(f[13], "saturation");
  try {
    size_t used = 0;
    r.seed = std::stoull(f[14], &used);
    if (used != f[14].size()) throw std::invalid_argument("seed");
  } catch (const std::logic_error&) {
    fail(ErrorCode::ParseError, "bad seed '" + f[14] + "'");
  }
  return r;
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<ManifestRecord> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    try {
      out.push_back(parse_manifest_line(line));
    } catch (const Error& e) {
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string output_name(const std::filesystem::path& source, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%04d.png", index);
  return source.stem().string() + buf;
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) fail(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

BackgroundSet BackgroundSet::load(const std::filesystem::path& dir) {
  BackgroundSet set;
  set.paths = list_images(dir);
  if (set.paths.empty()) fail(ErrorCode::IoError, "no background images in " + dir.string());
  for (const auto& p : set.paths) set.images.push_back(read_image(p));
  return set;
}

const Image& BackgroundSet::find(const std::string& name) const {
  for (size_t i = 0; i < paths.size(); ++i) {
    if (paths[i].filename().string() == name) return images[i];
  }
  fail(ErrorCode::IoError, "background '" + name + "' not found");
}

AugmentSource prepare_source(const std::filesystem::path& path, const AugmentConfig& config) {
  const Image img = read_image(path);
  const LabelRegion region = detect_label_region(img, config.detect);
  return {path.filename().string(), extract_line_samples(img, region)};
}

Image render_record(const AugmentSource& source, const ManifestRecord& record, const AugmentConfig& config,
                    const Image& background) {
  return finish(synthesize(source, record.pose, config), record, config, background);
}

Mask record_mask(const AugmentSource& source, const ManifestRecord& record, const AugmentConfig& config) {
  return resize_mask(synthesize(source, record.pose, config).mask, config.width, config.height);
}

GeneratedImage generate_output(const AugmentSource& source, int index, const AugmentConfig& config,
                               const BackgroundSet& backgrounds) {
  GeneratedImage out;
  ManifestRecord& r = out.record;
  r.output = output_name(source.name, index);
  r.source = source.name;
  r.seed = image_seed(config.seed, source.name, index);
  ImageRng rng(r.seed);
  std::optional<Synthesis> synth;
  for (int attempt = 0; attempt < kMaxPoseAttempts && !synth; ++attempt) {
    r.pose = sample_pose(rng, config.poses);
    try {
      synth = synthesize(source, r.pose, config);
    } catch (const Error& e) {
      if (!is_geometry_error(e.code())) throw;
    }
  }
  if (!synth) fail(ErrorCode::DegenerateView, "no renderable pose after " + std::to_string(kMaxPoseAttempts) + " draws");
  const Image* bg = nullptr;
  if (!backgrounds.empty()) {
    const size_t pick = std::min(backgrounds.paths.size() - 1,
                                 static_cast<size_t>(uniform01(rng) * static_cast<double>(backgrounds.paths.size())));
    r.background = backgrounds.paths[pick].filename().string();
    bg = &backgrounds.images[pick];
  }
  r.jitter = sample_jitter(rng, config.jitter);
  out.image = finish(*synth, r, config, bg ? *bg : Image{});
  return out;
}

AugmentReport run_augment(const std::vector<std::filesystem::path>& inputs, const AugmentConfig& config,
                          const std::filesystem::path& out_dir, const LogFn& log) {
  config.validate();
  std::mutex log_mutex;
  AugmentReport report;
  const auto note = [&](const std::string& msg) {
    std::lock_guard lock(log_mutex);
    report.failures.push_back(msg);
    if (log) log(msg);
  };

  const BackgroundSet backgrounds = config.backgrounds ? BackgroundSet::load(*config.backgrounds) : BackgroundSet{};
  std::filesystem::create_directories(out_dir);

  std::vector<AugmentSource> sources;
  report.inputs = static_cast<int>(inputs.size());
  for (const auto& path : inputs) {
    try {
      sources.push_back(prepare_source(path, config));
    } catch (const Error& e) {
      ++report.failed_inputs;
      note(path.filename().string() + ": " + e.what());
    }
  }

  const size_t jobs = sources.size() * static_cast<size_t>(config.count);
  std::vector<std::optional<ManifestRecord>> slots(jobs);
  std::atomic<size_t> next{0};
  const auto worker = [&] {
    for (size_t job = next++; job < jobs; job = next++) {
      const AugmentSource& src = sources[job / config.count];
      const int index = static_cast<int>(job % config.count);
      try {
        GeneratedImage g = generate_output(src, index, config, backgrounds);
        write_png(out_dir / g.record.output, g.image);
        slots[job] = std::move(g.record);
      } catch (const Error& e) {
        note(output_name(src.name, index) + ": " + e.what());
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads) : std::min(hw, 16u);
  if (workers <= 1 || jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < std::min<size_t>(workers, jobs); ++w) pool.emplace_back(worker);
  }

  for (auto& s : slots) {
    if (s) report.records.push_back(std::move(*s));
  }
  std::ofstream manifest(out_dir / kManifestName, std::ios::binary);
  if (!manifest) fail(ErrorCode::IoError, "cannot write " + (out_dir / kManifestName).string());
  manifest << manifest_header() << '\n';
  for (const auto& r : report.records) manifest << to_tsv(r) << '\n';
  if (!manifest) fail(ErrorCode::IoError, "failed writing " + (out_dir / kManifestName).string());
  return report;
}

Image replay_record(const ManifestRecord& record, const std::filesystem::path& source_dir,
                    const AugmentConfig& config) {
  const AugmentSource source = prepare_source(source_dir / record.source, config);
  Image background;
  if (record.background != "none") {
    if (!config.backgrounds) fail(ErrorCode::InvalidArgument, "record names a background but none are configured");
    background = read_image(*config.backgrounds / record.background);
  }
  return render_record(source, record, config, background);
}

}  // namespace labelaug
