#include "labelaug/augment.hpp"
#include "labelaug/camera.hpp"
#include "labelaug/conic.hpp"
#include "labelaug/error.hpp"
#include "labelaug/image_io.hpp"
#include "labelaug/metric.hpp"
#include "labelaug/rim_detection.hpp"
#include "labelaug/synthesis.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

namespace py = pybind11;
using namespace pybind11::literals;
using namespace labelaug;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image image_from_array(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an HxWx3 uint8 array");
  Image img = make_rgb(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.data.data(), a.data(), img.data.size());
  return img;
}

U8Array image_to_array(const Image& img) {
  const Image rgb = to_rgb(img);
  U8Array a({rgb.height, rgb.width, 3});
  std::memcpy(a.mutable_data(), rgb.data.data(), rgb.data.size());
  return a;
}

py::array_t<bool> mask_to_array(const Mask& m) {
  py::array_t<bool> a({m.height, m.width});
  auto v = a.mutable_unchecked<2>();
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) v(y, x) = m.at(x, y) != 0;
  }
  return a;
}

py::tuple line_tuple(const HLine& l) { return py::make_tuple(l.h.x(), l.h.y(), l.h.z()); }

py::object vp_object(const HPoint& p) {
  if (p.is_infinite()) return py::none();
  return py::make_tuple(p.point().x(), p.point().y());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Label-region geometry, view synthesis and embedding ranking";

  static py::exception<Error> error(m, "LabelaugError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error;
      py::object inst = exc(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  py::class_<Ellipse>(m, "Ellipse")
      .def(py::init(&Ellipse::make), py::arg("cx"), py::arg("cy"), py::arg("a"), py::arg("b"), py::arg("theta") = 0.0)
      .def_readonly("cx", &Ellipse::cx)
      .def_readonly("cy", &Ellipse::cy)
      .def_readonly("a", &Ellipse::a)
      .def_readonly("b", &Ellipse::b)
      .def_readonly("theta", &Ellipse::theta)
      .def("point_at", [](const Ellipse& e, double t) {
        const Vec2 p = e.point_at(t);
        return py::make_tuple(p.x(), p.y());
      })
      .def("__repr__", [](const Ellipse& e) {
        return "Ellipse(cx=" + std::to_string(e.cx) + ", cy=" + std::to_string(e.cy) + ", a=" + std::to_string(e.a) +
               ", b=" + std::to_string(e.b) + ", theta=" + std::to_string(e.theta) + ")";
      });

  m.def("fit_ellipse", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pts) {
    if (pts.ndim() != 2 || pts.shape(1) != 2) throw py::value_error("expected an Nx2 array");
    std::vector<Vec2> v;
    auto r = pts.unchecked<2>();
    for (py::ssize_t i = 0; i < r.shape(0); ++i) v.emplace_back(r(i, 0), r(i, 1));
    return fit_ellipse(v).ellipse;
  });
  m.def("common_external_tangents", [](const Ellipse& e1, const Ellipse& e2) {
    const CommonTangents ct = common_external_tangents(e1, e2);
    return py::dict("left"_a = line_tuple(ct.left), "right"_a = line_tuple(ct.right), "vp"_a = vp_object(ct.vp));
  });
  m.def("cross_ratio", &cross_ratio, py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"));
  m.def("solve_fourth_point", &solve_fourth_point, py::arg("a"), py::arg("c"), py::arg("d"), py::arg("kappa"));

  py::class_<Pose>(m, "Pose")
      .def(py::init([](double rx, double rz, double tx, double ty, double tz) { return Pose{rx, rz, tx, ty, tz}; }),
           py::arg("rot_x") = 0.0, py::arg("rot_z") = 0.0, py::arg("tx") = 0.0, py::arg("ty") = 0.0,
           py::arg("tz") = 150.0)
      .def_readwrite("rot_x", &Pose::rot_x_deg)
      .def_readwrite("rot_z", &Pose::rot_z_deg)
      .def_readwrite("tx", &Pose::tx)
      .def_readwrite("ty", &Pose::ty)
      .def_readwrite("tz", &Pose::tz);

  py::class_<LabelRegion>(m, "LabelRegion")
      .def_property_readonly("upper", [](const LabelRegion& r) { return r.upper.ellipse; })
      .def_property_readonly("lower", [](const LabelRegion& r) { return r.lower.ellipse; })
      .def_property_readonly("left", [](const LabelRegion& r) { return line_tuple(r.left); })
      .def_property_readonly("right", [](const LabelRegion& r) { return line_tuple(r.right); })
      .def_property_readonly("vp", [](const LabelRegion& r) { return vp_object(r.vp); })
      .def_property_readonly("wider", [](const LabelRegion& r) { return r.wider == Rim::Upper ? "upper" : "lower"; })
      .def("mask", [](const LabelRegion& r, int w, int h) { return mask_to_array(region_mask(r, w, h)); },
           py::arg("width") = 640, py::arg("height") = 480);

  m.def("project_rim_circle", [](const Pose& p, double h) { return project_rim_circle(p, h, {}, {}); },
        py::arg("pose"), py::arg("height_mm"));
  m.def("target_region", [](const Pose& p) { return target_region(p, {}, {}); }, py::arg("pose"));
  m.def(
      "render_reference",
      [](const Pose& p, const U8Array& texture) {
        const Rendering r = render_reference(p, {}, {}, image_from_array(texture));
        return py::make_tuple(image_to_array(r.image), mask_to_array(r.mask));
      },
      py::arg("pose"), py::arg("texture"));

  m.def("read_image", [](const std::filesystem::path& p) { return image_to_array(read_image(p)); });
  m.def("write_png", [](const std::filesystem::path& p, const U8Array& img) { write_png(p, image_from_array(img)); });

  m.def("detect_label_region", [](const U8Array& img) { return detect_label_region(image_from_array(img)); });
  m.def(
      "synthesize_view",
      [](const U8Array& img, const LabelRegion& region, const Pose& pose) {
        const Synthesis s = synthesize_view(image_from_array(img), region, pose);
        return py::make_tuple(image_to_array(s.image), mask_to_array(s.mask));
      },
      py::arg("image"), py::arg("region"), py::arg("pose"));
  m.def("front_view", [](const U8Array& img) {
    const Synthesis s = front_view(image_from_array(img));
    return py::make_tuple(image_to_array(s.image), mask_to_array(s.mask));
  });

  m.def("cosine_distance", [](std::vector<double> u, std::vector<double> v) {
    return cosine_distance(Embedding(0, std::move(u)), Embedding(0, std::move(v)));
  });
  m.def(
      "batch_all_triplet_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& emb, const std::vector<std::int64_t>& labels,
         double margin, bool mean_over_active) {
        if (emb.ndim() != 2) throw py::value_error("expected an NxD array");
        if (static_cast<size_t>(emb.shape(0)) != labels.size()) throw py::value_error("one label per row required");
        TripletBatch b;
        b.margin = margin;
        auto r = emb.unchecked<2>();
        for (py::ssize_t i = 0; i < r.shape(0); ++i) {
          std::vector<double> v(r.shape(1));
          for (py::ssize_t j = 0; j < r.shape(1); ++j) v[j] = r(i, j);
          b.embeddings.emplace_back(labels[i], std::move(v));
        }
        const TripletLoss l = batch_all_triplet_loss(
            b, mean_over_active ? TripletAggregation::MeanOverActive : TripletAggregation::Sum);
        return py::dict("loss"_a = l.value, "triplets"_a = l.triplets, "active"_a = l.active);
      },
      py::arg("embeddings"), py::arg("labels"), py::arg("margin") = 0.3, py::arg("mean_over_active") = false);
  m.def(
      "rank_top_k",
      [](std::vector<double> query, const std::vector<std::vector<double>>& gallery,
         const std::vector<std::int64_t>& class_ids, size_t k) {
        if (gallery.size() != class_ids.size()) throw py::value_error("one class id per gallery row required");
        std::vector<Embedding> g;
        for (size_t i = 0; i < gallery.size(); ++i) g.emplace_back(class_ids[i], gallery[i]);
        std::vector<std::pair<std::int64_t, double>> out;
        for (const auto& e : rank_top_k(Embedding(0, std::move(query)), g, k)) out.emplace_back(e.class_id, e.similarity);
        return out;
      },
      py::arg("query"), py::arg("gallery"), py::arg("class_ids"), py::arg("k") = 5);

  m.def(
      "augment",
      [](const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out_dir,
         const std::string& config_json) {
        const AugmentConfig c = config_json.empty() ? AugmentConfig{} : parse_config(config_json);
        py::gil_scoped_release release;
        const AugmentReport r = run_augment(inputs, c, out_dir);
        std::vector<std::string> outputs;
        for (const auto& rec : r.records) outputs.push_back(rec.output);
        return std::make_pair(outputs, r.failures);
      },
      py::arg("inputs"), py::arg("out_dir"), py::arg("config_json") = "");
}
