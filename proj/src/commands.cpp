#include "labelaug/commands.hpp"

#include "labelaug/augment.hpp"
#include "labelaug/error.hpp"
#include "labelaug/image_io.hpp"
#include "labelaug/metric.hpp"
#include "labelaug/rim_detection.hpp"
#include "labelaug/synthesis.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace labelaug::cli {

namespace {

/// Raised for bad flag values that CLI11 cannot check itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool debug = false;
  bool alpha = false;
  std::string pose;
  std::optional<int> count;
  std::string size;
  std::string backgrounds;
  int k = 5;
  std::vector<std::string> inputs;
};

std::string fmt(double v, int precision = 6) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

Pose parse_pose(const std::string& text) {
  std::vector<double> v;
  std::stringstream in(text);
  std::string field;
  while (std::getline(in, field, ',')) {
    try {
      size_t used = 0;
      v.push_back(std::stod(field, &used));
      if (used != field.size() || !std::isfinite(v.back())) throw std::invalid_argument(field);
    } catch (const std::logic_error&) {
      throw UsageError("--pose: '" + field + "' is not a number");
    }
  }
  if (v.size() != 5) throw UsageError("--pose expects \"rx,rz,tx,ty,tz\"");
  return {v[0], v[1], v[2], v[3], v[4]};
}

std::pair<int, int> parse_size(const std::string& text) {
  int w = 0, h = 0;
  char x = 0, extra = 0;
  if (std::sscanf(text.c_str(), "%d%c%d%c", &w, &x, &h, &extra) != 3 || (x != 'x' && x != 'X')) {
    throw UsageError("--size expects WxH");
  }
  return {w, h};
}

AugmentConfig build_config(const Options& o) {
  AugmentConfig c;
  try {
    if (!o.config.empty()) c = load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.count) c.count = *o.count;
    if (!o.size.empty()) std::tie(c.width, c.height) = parse_size(o.size);
    if (!o.backgrounds.empty()) c.backgrounds = o.backgrounds;
    c.validate();
  } catch (const Error& e) {
    throw UsageError(std::string("configuration: ") + e.what());
  }
  return c;
}

std::filesystem::path out_dir(const Options& o) { return o.out.empty() ? std::filesystem::path(".") : std::filesystem::path(o.out); }

void print_ellipse(std::ostream& out, const char* name, const Ellipse& e, double residual) {
  out << name << "\tcx=" << fmt(e.cx, 3) << "\tcy=" << fmt(e.cy, 3) << "\ta=" << fmt(e.a, 3) << "\tb=" << fmt(e.b, 3)
      << "\ttheta_deg=" << fmt(e.theta * 180.0 / kPi, 4) << "\tresidual=" << fmt(residual, 4) << '\n';
}

void print_line(std::ostream& out, const char* name, const HLine& l) {
  out << name << "\t" << fmt(l.h.x(), 9) << "\t" << fmt(l.h.y(), 9) << "\t" << fmt(l.h.z(), 4) << '\n';
}

void print_point(std::ostream& out, const char* name, const Vec2& p) {
  out << name << "\t" << fmt(p.x(), 3) << "\t" << fmt(p.y(), 3) << '\n';
}

int cmd_detect(const Options& o, std::ostream& out) {
  const AugmentConfig config = build_config(o);
  const Image img = read_image(o.inputs.at(0));
  std::optional<std::filesystem::path> debug;
  if (o.debug) {
    debug = out_dir(o) / (std::filesystem::path(o.inputs[0]).stem().string() + "_debug");
    std::filesystem::create_directories(*debug);
  }
  const RimDetection d = detect_rims(img, config.detect, debug);
  const LabelRegion& r = d.region;
  print_ellipse(out, "upper", r.upper.ellipse, r.upper_residual);
  print_ellipse(out, "lower", r.lower.ellipse, r.lower_residual);
  print_point(out, "upper_left", r.upper.left);
  print_point(out, "upper_right", r.upper.right);
  print_point(out, "lower_left", r.lower.left);
  print_point(out, "lower_right", r.lower.right);
  print_line(out, "left_line", r.left);
  print_line(out, "right_line", r.right);
  if (r.vp.is_infinite()) {
    const Vec2 dir = r.vp.direction();
    out << "vp\tinfinite\t" << fmt(dir.x(), 9) << "\t" << fmt(dir.y(), 9) << '\n';
  } else {
    print_point(out, "vp", r.vp.point());
  }
  out << "wider\t" << (r.wider == Rim::Upper ? "upper" : "lower") << '\n';
  if (debug) out << "debug\t" << debug->string() << '\n';
  return kExitOk;
}

void write_output(const std::filesystem::path& path, const Synthesis& s, const Image& img, bool alpha,
                  std::ostream& out) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  write_png(path, img, alpha ? std::optional<Mask>(s.mask) : std::nullopt);
  out << path.string() << '\n';
}

int cmd_synth(const Options& o, std::ostream& out) {
  if (o.pose.empty()) throw UsageError("synth requires --pose");
  const Pose pose = parse_pose(o.pose);
  AugmentConfig config = build_config(o);
  const Image img = read_image(o.inputs.at(0));
  const LabelRegion region = detect_label_region(img, config.detect);
  const Synthesis s = synthesize_view(img, region, pose, config.cylinder, config.camera);
  Image framed = composite_black(s);
  if (config.backgrounds) {
    std::filesystem::path bg = *config.backgrounds;
    if (std::filesystem::is_directory(bg)) {
      const auto files = list_images(bg);
      if (files.empty()) fail(ErrorCode::IoError, "no background images in " + bg.string());
      ImageRng rng(image_seed(config.seed, std::filesystem::path(o.inputs[0]).filename().string(), 0));
      bg = files[std::min(files.size() - 1, static_cast<size_t>(uniform01(rng) * files.size()))];
    }
    framed = composite_background(s, read_image(bg));
  }
  const auto path = out_dir(o) / (std::filesystem::path(o.inputs[0]).stem().string() + "_synth.png");
  write_output(path, s, framed, o.alpha, out);
  return kExitOk;
}

int cmd_frontview(const Options& o, std::ostream& out) {
  const AugmentConfig config = build_config(o);
  const Image img = read_image(o.inputs.at(0));
  const Synthesis s = front_view(img, config.detect);
  const auto path = out_dir(o) / (std::filesystem::path(o.inputs[0]).stem().string() + "_front.png");
  write_output(path, s, composite_black(s), o.alpha, out);
  return kExitOk;
}

int cmd_augment(const Options& o, std::ostream& out, std::ostream& err) {
  const AugmentConfig config = build_config(o);
  std::vector<std::filesystem::path> inputs;
  for (const auto& in : o.inputs) {
    if (std::filesystem::is_directory(in)) {
      const auto files = list_images(in);
      inputs.insert(inputs.end(), files.begin(), files.end());
    } else {
      inputs.emplace_back(in);
    }
  }
  if (inputs.empty()) fail(ErrorCode::IoError, "no input images");
  const auto dir = o.out.empty() ? std::filesystem::path("augmented") : std::filesystem::path(o.out);
  const AugmentReport report = run_augment(inputs, config, dir, [&](const std::string& m) { err << "warning: " << m << '\n'; });
  out << "images\t" << report.records.size() << '\n';
  out << "inputs\t" << report.inputs << "\tfailed\t" << report.failed_inputs << '\n';
  out << "manifest\t" << (dir / kManifestName).string() << '\n';
  return report.records.empty() ? kExitFailure : kExitOk;
}

int cmd_rank(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.inputs.size() != 2) throw UsageError("rank expects QUERY GALLERY");
  if (o.k < 1) throw UsageError("--k must be at least 1");
  const auto queries = load_embeddings(o.inputs[0]);
  const auto gallery = load_embeddings(o.inputs[1]);
  if (queries.empty()) fail(ErrorCode::ParseError, o.inputs[0] + ": no embeddings");
  if (static_cast<size_t>(o.k) > gallery.size() && !gallery.empty()) {
    err << "warning: k=" << o.k << " exceeds the gallery size " << gallery.size() << "; returning all\n";
  }
  out << "#query\tquery_class\trank\tclass_id\tsimilarity\n";
  for (size_t q = 0; q < queries.size(); ++q) {
    const auto ranked = rank_top_k(queries[q], gallery, static_cast<size_t>(o.k));
    for (size_t i = 0; i < ranked.size(); ++i) {
      out << q << '\t' << queries[q].class_id() << '\t' << i + 1 << '\t' << ranked[i].class_id << '\t'
          << fmt(ranked[i].similarity, 6) << '\n';
    }
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label-region detection, view synthesis and dataset augmentation for cylindrical labels", "labelaug"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
  };
  auto* detect = app.add_subcommand("detect", "detect the label region and print it");
  detect->add_option("image", o.inputs, "input image")->required()->expected(1);
  detect->add_flag("--debug", o.debug, "write intermediate stage images");
  common(detect);

  auto* synth = app.add_subcommand("synth", "re-synthesise the label at a new pose");
  synth->add_option("image", o.inputs, "input image")->required()->expected(1);
  synth->add_option("--pose", o.pose, "\"rx,rz,tx,ty,tz\" in degrees and millimetres")->required();
  synth->add_option("--backgrounds", o.backgrounds, "background image or directory");
  synth->add_option("--seed", o.seed, "seed for picking a background from a directory");
  synth->add_flag("--alpha", o.alpha, "store the label mask as the alpha channel");
  common(synth);

  auto* augment = app.add_subcommand("augment", "generate an augmented dataset");
  augment->add_option("inputs", o.inputs, "input images or directories")->required();
  augment->add_option("--seed", o.seed, "master seed");
  augment->add_option("--count", o.count, "images per input");
  augment->add_option("--size", o.size, "output size WxH");
  augment->add_option("--backgrounds", o.backgrounds, "background image directory");
  common(augment);

  auto* frontview = app.add_subcommand("frontview", "normalise the label to the front view");
  frontview->add_option("image", o.inputs, "input image")->required()->expected(1);
  frontview->add_flag("--alpha", o.alpha, "store the label mask as the alpha channel");
  common(frontview);

  auto* rank = app.add_subcommand("rank", "rank gallery embeddings by cosine similarity");
  rank->add_option("query", o.inputs, "query embedding file, then gallery embedding file")->required()->expected(2);
  rank->add_option("--k", o.k, "number of results per query")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*detect) return cmd_detect(o, out);
    if (*synth) return cmd_synth(o, out);
    if (*augment) return cmd_augment(o, out, err);
    if (*frontview) return cmd_frontview(o, out);
    if (*rank) return cmd_rank(o, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace labelaug::cli
