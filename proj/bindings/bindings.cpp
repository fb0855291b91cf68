// Python bindings for the main pipeline operations. Thin wrappers: plain
// vectors and dicts in, vectors and dicts out, all heavy lifting in C++.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dpd/harness.hpp"
#include "dpd/io.hpp"
#include "dpd/rng.hpp"

namespace py = pybind11;

namespace {

dpd::ImageSample to_sample(const std::vector<double>& pixels, std::size_t label) {
  dpd::ImageSample s;
  s.pixels = pixels;
  s.label = label;
  return s;
}

}  // namespace

PYBIND11_MODULE(_dpd, m) {
  m.doc() = "prototype-guided diffusion dataset distillation core";

  py::class_<dpd::ImageSample>(m, "ImageSample")
      .def(py::init(&to_sample), py::arg("pixels"), py::arg("label"))
      .def_readwrite("pixels", &dpd::ImageSample::pixels)
      .def_readwrite("label", &dpd::ImageSample::label);

  py::class_<dpd::NoiseSchedule>(m, "NoiseSchedule")
      .def_readonly("beta", &dpd::NoiseSchedule::beta)
      .def_readonly("alpha", &dpd::NoiseSchedule::alpha)
      .def_readonly("alpha_bar", &dpd::NoiseSchedule::alpha_bar)
      .def("alpha_bar_at", &dpd::NoiseSchedule::alpha_bar_at)
      .def("timesteps", &dpd::NoiseSchedule::timesteps);

  m.def("build_schedule", &dpd::build_schedule, py::arg("timesteps"), py::arg("beta_start"),
        py::arg("beta_end"));
  m.def("forward_diffuse", &dpd::forward_diffuse, py::arg("z0"), py::arg("t"), py::arg("eps"),
        py::arg("schedule"));
  m.def("estimate_clean", &dpd::estimate_clean, py::arg("zt"), py::arg("eps_hat"), py::arg("t"),
        py::arg("schedule"));
  m.def("sampling_timesteps", &dpd::sampling_timesteps, py::arg("t_start"), py::arg("num_steps"));

  py::class_<dpd::Codec>(m, "Codec")
      .def(py::init([](std::size_t height, std::size_t width, std::size_t latent_dim) {
             return dpd::Codec(dpd::CodecConfig{height, width, latent_dim});
           }),
           py::arg("height") = 16, py::arg("width") = 16, py::arg("latent_dim") = 64)
      .def("encode", &dpd::Codec::encode)
      .def("decode", &dpd::Codec::decode)
      .def("decode_raw", &dpd::Codec::decode_raw)
      .def("pixel_count", &dpd::Codec::pixel_count);

  py::class_<dpd::Clustering>(m, "Clustering")
      .def_readonly("k", &dpd::Clustering::k)
      .def_readonly("assignments", &dpd::Clustering::assignments)
      .def_readonly("centroids", &dpd::Clustering::centroids)
      .def_readonly("inertia", &dpd::Clustering::inertia);

  m.def(
      "kmeans",
      [](const std::vector<dpd::LatentVector>& points, std::size_t k, std::uint64_t seed) {
        return dpd::kmeans(points, k, seed);
      },
      py::arg("points"), py::arg("k"), py::arg("seed") = 0);
  m.def("margin", &dpd::margin, py::arg("zi"), py::arg("k"), py::arg("centroids"));
  m.def("select_prototypes", &dpd::select_prototypes, py::arg("clustering"), py::arg("points"));

  m.def("substream_seed", [](std::uint64_t root, const std::string& name) {
    return dpd::substream_seed(root, name);
  });

  py::class_<dpd::EvalReport>(m, "EvalReport")
      .def_readonly("mean", &dpd::EvalReport::mean)
      .def_readonly("stddev", &dpd::EvalReport::stddev)
      .def_readonly("per_seed", &dpd::EvalReport::per_seed)
      .def("to_json", &dpd::EvalReport::to_json);

  py::class_<dpd::RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("from_json", &dpd::RunConfig::from_json)
      .def("to_json", &dpd::RunConfig::to_json)
      .def("hash", &dpd::RunConfig::hash)
      .def("with_seed", &dpd::RunConfig::with_seed);

  m.def("generate_toy_dataset", [](const std::string& config_json) {
    dpd::RunConfig cfg = dpd::RunConfig::from_json(config_json);
    dpd::ToyDataset ds = dpd::generate_toy_dataset(cfg.data);
    py::dict out;
    out["train"] = ds.train;
    out["test"] = ds.test;
    out["class_names"] = ds.class_names;
    return out;
  });

  m.def(
      "run_pipeline",
      [](const std::string& config_json) {
        dpd::RunConfig cfg = dpd::RunConfig::from_json(config_json);
        dpd::PipelineResult res = dpd::run_pipeline(cfg);
        py::dict out;
        out["distilled"] = res.distilled.samples;
        out["report_json"] = res.report.to_json();
        out["classifier_test_oa"] = res.phi_test_accuracy;
        return out;
      },
      py::arg("config_json"),
      "Full gen-data/pretrain/train/prototype/distill/evaluate run from a JSON config.");
}
