#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "kneeflex/checkpoint.hpp"
#include "kneeflex/goniometry.hpp"
#include "kneeflex/loss.hpp"
#include "kneeflex/network.hpp"
#include "kneeflex/scenegen.hpp"

namespace py = pybind11;
using namespace kneeflex;

namespace {

using Points = std::array<double, 6>;
using Pixels = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Pixels to_numpy(const ImageRGBA& img) {
  Pixels out({img.height, img.width, 4});
  std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size());
  return out;
}

// Accepts (H, W, 3) or (H, W, 4) uint8 arrays; RGB input becomes opaque.
ImageRGBA from_numpy(const Pixels& arr) {
  if (arr.ndim() != 3 || (arr.shape(2) != 3 && arr.shape(2) != 4))
    throw py::value_error("image must have shape (H, W, 3) or (H, W, 4)");
  const int h = static_cast<int>(arr.shape(0)), w = static_cast<int>(arr.shape(1));
  const int c = static_cast<int>(arr.shape(2));
  ImageRGBA img(w, h);
  const std::uint8_t* src = arr.data();
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i)
    for (int ch = 0; ch < 4; ++ch) img.pixels[i * 4 + ch] = ch < c ? src[i * c + ch] : 255;
  return img;
}

GenerateConfig generate_config(int n, std::uint64_t seed, double flex_min, double flex_max, double max_offset,
                               bool both_legs, const std::string& skin) {
  GenerateConfig g;
  g.n_samples = n;
  g.seed = seed;
  g.flexion_range = {flex_min, flex_max};
  g.max_offset_deg = max_offset;
  g.both_legs = both_legs;
  if (skin == "original")
    g.skin_mode = SkinMode::Original;
  else if (skin == "varied")
    g.skin_mode = SkinMode::Varied;
  else
    throw py::value_error("skin must be 'original' or 'varied'");
  g.validate();
  return g;
}

}  // namespace

PYBIND11_MODULE(_kneeflex, m) {
  m.doc() = "Knee flexion keypoint regression";

  m.def(
      "flexion_angle", [](const Points& p) { return flexion_angle(KeypointLabel::from_flat(p)); }, py::arg("points"),
      "Knee flexion in degrees from (thigh_x, thigh_y, knee_x, knee_y, leg_x, leg_y).");
  m.def(
      "euclid_loss", [](const Points& pred, const Points& label) { return euclid_loss(pred, label); },
      py::arg("pred"), py::arg("label"), "Total Euclidean distance over the three keypoints.");

  m.def(
      "generate",
      [](int n, std::uint64_t seed, double flex_min, double flex_max, double max_offset, bool both_legs,
         const std::string& skin) {
        const auto samples = generate_samples(generate_config(n, seed, flex_min, flex_max, max_offset, both_legs, skin));
        py::list out;
        for (const auto& s : samples) out.append(py::make_tuple(to_numpy(s.image), s.label.flat()));
        return out;
      },
      py::arg("n"), py::arg("seed") = 0, py::arg("flex_min") = 0.0, py::arg("flex_max") = kMaxKneeFlexionDeg,
      py::arg("max_offset") = 10.0, py::arg("both_legs") = false, py::arg("skin") = "original",
      "List of (RGBA uint8 image, label 6-tuple) pairs.");
  m.def(
      "generate_dataset",
      [](const std::filesystem::path& out_dir, int n, std::uint64_t seed, double flex_min, double flex_max,
         double max_offset, bool both_legs, const std::string& skin) {
        generate_dataset(generate_config(n, seed, flex_min, flex_max, max_offset, both_legs, skin), out_dir);
      },
      py::arg("out_dir"), py::arg("n"), py::arg("seed") = 0, py::arg("flex_min") = 0.0,
      py::arg("flex_max") = kMaxKneeFlexionDeg, py::arg("max_offset") = 10.0, py::arg("both_legs") = false,
      py::arg("skin") = "original", "Writes numbered PNGs and labels.csv into out_dir.");

  m.def(
      "annotate", [](const Pixels& image, const Points& p) { return to_numpy(annotate(from_numpy(image), KeypointLabel::from_flat(p))); },
      py::arg("image"), py::arg("points"), "Copy of the image with the predicted keypoints drawn in red.");

  py::class_<Network>(m, "Model")
      .def(py::init([](std::uint64_t seed) { return build_eva(seed); }), py::arg("seed") = 0)
      .def_static(
          "load", [](const std::filesystem::path& path) { return load_checkpoint(path).network; }, py::arg("path"))
      .def(
          "save",
          [](const Network& net, const std::filesystem::path& path, std::uint64_t seed) {
            save_checkpoint(net, {0, 1, seed}, path);
          },
          py::arg("path"), py::arg("seed") = 0)
      .def_property_readonly("parameter_count", &Network::parameter_count)
      .def(
          "summary",
          [](const Network& net) {
            py::list rows;
            for (const auto& l : net.summary()) rows.append(py::make_tuple(l.type, l.output_shape, l.parameters));
            return rows;
          },
          "(type, output shape, parameter count) per layer.")
      .def(
          "predict", [](const Network& net, const Pixels& image) { return predict(net, from_numpy(image)).flat(); },
          py::arg("image"), "Six keypoint coordinates for an image of any size.");
}
