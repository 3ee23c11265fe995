#include "labelaug/augment.hpp"
#include "labelaug/camera.hpp"
#include "labelaug/image_io.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

using namespace labelaug;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Workspace {
 public:
  Workspace() {
    root_ = fs::temp_directory_path() / ("labelaug_cli_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() { fs::remove_all(root_); }

  const fs::path& root() const { return root_; }
  fs::path operator/(const std::string& name) const { return root_ / name; }

  Result run(const std::string& args) const {
    const fs::path err = root_ / "stderr.txt";
    const std::string cmd = std::string(LABELAUG_CLI_PATH) + " " + args + " 2>" + err.string();
    Result r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
  }

 private:
  fs::path root_;
};

const Workspace& workspace() {
  static const Workspace ws = [] {
    Workspace w;
    write_png(w / "bottle.png", render_reference(Pose::identity(), {}, {}, labelaug::testing::smooth_texture(21)).image);
    write_png(w / "blank.png", make_rgb(320, 240, 90));
    return w;
  }();
  return ws;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

/// key -> fields for tab-separated report lines.
std::map<std::string, std::vector<std::string>> parse_report(const std::string& text) {
  std::map<std::string, std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream f(line);
    std::string key, field;
    std::getline(f, key, '\t');
    while (std::getline(f, field, '\t')) out[key].push_back(field);
  }
  return out;
}

double field_value(const std::vector<std::string>& fields, const std::string& name) {
  for (const auto& f : fields) {
    if (f.rfind(name + "=", 0) == 0) return std::stod(f.substr(name.size() + 1));
  }
  FAIL("missing field " << name);
  return 0.0;
}

int png_color_type(const fs::path& p) {
  const std::string bytes = slurp(p);
  REQUIRE(bytes.size() > 25);
  return static_cast<unsigned char>(bytes[25]);
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  const auto& ws = workspace();
  CHECK(ws.run("").code == 1);
  CHECK(ws.run("frobnicate").code == 1);
  CHECK(ws.run("detect").code == 1);
  CHECK(ws.run("synth " + q(ws / "bottle.png")).code == 1);
  CHECK(ws.run("synth " + q(ws / "bottle.png") + " --pose 1,2,3").code == 1);
  CHECK(ws.run("synth " + q(ws / "bottle.png") + " --pose 1,2,x,4,5").code == 1);
  CHECK(ws.run("augment " + q(ws / "bottle.png") + " --size 10x10").code == 1);
  CHECK(ws.run("augment " + q(ws / "bottle.png") + " --size wide").code == 1);
  CHECK(ws.run("augment " + q(ws / "bottle.png") + " --config " + q(ws / "missing.json")).code == 1);
  const auto help = ws.run("--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("augment") != std::string::npos);
}

TEST_CASE("detect reports the analytic region") {
  const auto& ws = workspace();
  const auto r = ws.run("detect " + q(ws / "bottle.png"));
  REQUIRE(r.code == 0);
  const auto rep = parse_report(r.out);
  const Ellipse top = project_rim_circle(Pose::identity(), 25.0, {}, {});
  const Ellipse bottom = project_rim_circle(Pose::identity(), -25.0, {}, {});
  CHECK(std::abs(field_value(rep.at("upper"), "cx") - top.cx) < 2.0);
  CHECK(std::abs(field_value(rep.at("upper"), "cy") - top.cy) < 2.0);
  CHECK(std::abs(field_value(rep.at("upper"), "a") - top.a) < 2.0);
  CHECK(std::abs(field_value(rep.at("lower"), "cy") - bottom.cy) < 2.0);
  CHECK(std::abs(field_value(rep.at("lower"), "b") - bottom.b) < 2.0);
  CHECK(rep.count("left_line"));
  CHECK(rep.count("right_line"));
  CHECK(rep.count("vp"));
  CHECK(!rep.count("debug"));
}

TEST_CASE("detect --debug writes the stage images") {
  const auto& ws = workspace();
  const auto r = ws.run("detect " + q(ws / "bottle.png") + " --debug --out " + q(ws / "dbg"));
  REQUIRE(r.code == 0);
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(ws / "dbg" / "bottle_debug")) pngs += e.path().extension() == ".png";
  CHECK(pngs == 7);
}

TEST_CASE("detect failures exit with 2") {
  const auto& ws = workspace();
  const auto blank = ws.run("detect " + q(ws / "blank.png"));
  CHECK(blank.code == 2);
  CHECK(blank.err.find("no rim found") != std::string::npos);
  const auto missing = ws.run("detect " + q(ws / "nothing.png"));
  CHECK(missing.code == 2);
  CHECK(missing.err.find("I/O error") != std::string::npos);
}

TEST_CASE("synth") {
  const auto& ws = workspace();
  const auto r = ws.run("synth " + q(ws / "bottle.png") + " --pose 0,0,0,0,150 --out " + q(ws / "synth"));
  REQUIRE(r.code == 0);
  const Image out = read_image(ws / "synth" / "bottle_synth.png");
  const Image in = read_image(ws / "bottle.png");
  CHECK(out.width == 640);
  CHECK(out.height == 480);
  const auto ref = render_reference(Pose::identity(), {}, {}, labelaug::testing::smooth_texture(21));
  CHECK(mean_abs_diff(out, in, erode(ref.mask, 3)) <= 2.0 / 255.0);
  CHECK(png_color_type(ws / "synth" / "bottle_synth.png") == 2);

  const auto alpha =
      ws.run("synth " + q(ws / "bottle.png") + " --pose=-10,5,10,0,240 --alpha --out " + q(ws / "synth_alpha"));
  REQUIRE(alpha.code == 0);
  CHECK(png_color_type(ws / "synth_alpha" / "bottle_synth.png") == 6);

  const auto inside = ws.run("synth " + q(ws / "bottle.png") + " --pose 0,0,0,0,0 --out " + q(ws / "synth"));
  CHECK(inside.code == 2);
  CHECK(inside.err.find("camera inside cylinder") != std::string::npos);
}

TEST_CASE("synth with a background file") {
  const auto& ws = workspace();
  Image bg = make_rgb(100, 100, 77);
  write_png(ws / "bg_single.png", bg);
  const auto r = ws.run("synth " + q(ws / "bottle.png") + " --pose=5,0,0,0,260 --backgrounds " +
                        q(ws / "bg_single.png") + " --out " + q(ws / "synth_bg"));
  REQUIRE(r.code == 0);
  const Image out = read_image(ws / "synth_bg" / "bottle_synth.png");
  CHECK(out.at(0, 0, 0) == 77);
  CHECK(out.at(639, 479, 2) == 77);
}

TEST_CASE("frontview") {
  const auto& ws = workspace();
  const auto r = ws.run("frontview " + q(ws / "bottle.png") + " --out " + q(ws / "front"));
  REQUIRE(r.code == 0);
  const Image out = read_image(ws / "front" / "bottle_front.png");
  CHECK(out.width == 640);
  CHECK(out.height == 480);
  CHECK(ws.run("frontview " + q(ws / "blank.png") + " --out " + q(ws / "front")).code == 2);
}

TEST_CASE("augment") {
  const auto& ws = workspace();
  const std::string base = "augment " + q(ws / "bottle.png") + " --count 2 --size 64x48 --seed 3 --out ";
  const auto a = ws.run(base + q(ws / "aug1"));
  REQUIRE(a.code == 0);
  CHECK(a.out.find("images\t2") != std::string::npos);
  REQUIRE(ws.run(base + q(ws / "aug2")).code == 0);
  const auto records = read_manifest(ws / "aug1" / kManifestName);
  REQUIRE(records.size() == 2);
  for (const auto& r : records) {
    const Image img = read_image(ws / "aug1" / r.output);
    CHECK(img.width == 64);
    CHECK(img.height == 48);
    CHECK(slurp(ws / "aug1" / r.output) == slurp(ws / "aug2" / r.output));
  }
  CHECK(slurp(ws / "aug1" / kManifestName) == slurp(ws / "aug2" / kManifestName));
  const auto other = ws.run("augment " + q(ws / "bottle.png") + " --count 2 --size 64x48 --seed 4 --out " +
                            q(ws / "aug3"));
  REQUIRE(other.code == 0);
  CHECK(slurp(ws / "aug1" / kManifestName) != slurp(ws / "aug3" / kManifestName));
}

TEST_CASE("augment with a config file") {
  const auto& ws = workspace();
  {
    std::ofstream cfg(ws / "cfg.json");
    cfg << R"({"count": 1, "size": [40, 40], "poses": {"rot_x": [0, 0], "rot_z": [0, 0]}})";
  }
  const auto r = ws.run("augment " + q(ws / "bottle.png") + " --config " + q(ws / "cfg.json") + " --out " +
                        q(ws / "aug_cfg"));
  REQUIRE(r.code == 0);
  const auto records = read_manifest(ws / "aug_cfg" / kManifestName);
  REQUIRE(records.size() == 1);
  CHECK(records[0].pose.rot_x_deg == 0.0);
  CHECK(read_image(ws / "aug_cfg" / records[0].output).width == 40);

  {
    std::ofstream cfg(ws / "bad.json");
    cfg << R"({"count": 1, "mystery": true})";
  }
  const auto bad = ws.run("augment " + q(ws / "bottle.png") + " --config " + q(ws / "bad.json"));
  CHECK(bad.code == 1);
  CHECK(bad.err.find("mystery") != std::string::npos);
}

TEST_CASE("augment fails only when every input fails") {
  const auto& ws = workspace();
  const auto all_bad = ws.run("augment " + q(ws / "blank.png") + " --count 1 --out " + q(ws / "aug_bad"));
  CHECK(all_bad.code == 2);
  CHECK(all_bad.err.find("blank.png") != std::string::npos);
  const auto mixed = ws.run("augment " + q(ws / "blank.png") + " " + q(ws / "bottle.png") + " --count 1 --size 32x32 --out " +
                            q(ws / "aug_mixed"));
  CHECK(mixed.code == 0);
  CHECK(mixed.err.find("warning") != std::string::npos);
}

TEST_CASE("rank") {
  const auto& ws = workspace();
  {
    std::ofstream g(ws / "gallery.txt");
    g << "# one embedding per class\n10 1 0 0\n20 0 1 0\n30 0 0 1\n";
    std::ofstream qf(ws / "query.txt");
    qf << "20 0 2 0\n";
    std::ofstream bad(ws / "bad.txt");
    bad << "10 1 0 0\n20 0 one 0\n";
  }
  const auto r = ws.run("rank " + q(ws / "query.txt") + " " + q(ws / "gallery.txt") + " --k 2");
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string header, first, second, third;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(first == "0\t20\t1\t20\t1.000000");
  CHECK(second == "0\t20\t2\t10\t0.000000");
  CHECK(!std::getline(lines, third));

  const auto all = ws.run("rank " + q(ws / "query.txt") + " " + q(ws / "gallery.txt") + " --k 9");
  CHECK(all.code == 0);
  CHECK(all.err.find("warning") != std::string::npos);
  CHECK(std::count(all.out.begin(), all.out.end(), '\n') == 4);

  const auto bad = ws.run("rank " + q(ws / "query.txt") + " " + q(ws / "bad.txt"));
  CHECK(bad.code == 2);
  CHECK(bad.err.find("bad.txt:2") != std::string::npos);
  CHECK(ws.run("rank " + q(ws / "query.txt")).code == 1);
}
