// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "smle/cli.hpp"
#include "smle/data.hpp"
#include "smle/dsp.hpp"
#include "smle/metrics.hpp"
#include "smle/models.hpp"
#include "smle/wav.hpp"

namespace py = pybind11;
using namespace smle;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::span<const double> view(const Array& a) {
  if (a.ndim() != 1) throw Error("expected a 1-D array");
  return {a.data(), static_cast<std::size_t>(a.size())};
}

py::array_t<double> to_numpy(Signal s) {
  auto* owned = new Signal(std::move(s));
  py::capsule free(owned, [](void* p) { delete static_cast<Signal*>(p); });
  return py::array_t<double>(owned->size(), owned->data(), free);
}

StftConfig make_config(int frame_size, int hop) {
  StftConfig c{frame_size, hop};
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_smle, m) {
  m.doc() = "Sparse ensemble-of-specialists speech denoising";
  py::register_exception<Error>(m, "SmleError", PyExc_ValueError);

  m.attr("SAMPLE_RATE") = kSampleRate;

  m.def(
      "stft",
      [](const Array& x, int frame_size, int hop) {
        return stft(view(x), make_config(frame_size, hop)).bins;
      },
      py::arg("signal"), py::arg("frame_size") = 1024, py::arg("hop") = 256,
      "Complex bins x frames matrix (periodic Hann window, no padding).");
  m.def(
      "istft",
      [](const ComplexMatrix& bins, std::size_t length, int frame_size, int hop) {
        return to_numpy(istft({bins, make_config(frame_size, hop)}, length));
      },
      py::arg("bins"), py::arg("length"), py::arg("frame_size") = 1024, py::arg("hop") = 256);
  m.def(
      "interior_range",
      [](std::size_t length, int frame_size, int hop) {
        const SampleRange r = interior_range(length, make_config(frame_size, hop));
        return std::pair{r.begin, r.end};
      },
      py::arg("length"), py::arg("frame_size") = 1024, py::arg("hop") = 256);

  m.def(
      "si_sdr",
      [](const Array& reference, const Array& estimate, bool scale_invariant) {
        return si_sdr(view(reference), view(estimate), scale_invariant);
      },
      py::arg("reference"), py::arg("estimate"), py::arg("scale_invariant") = true);
  m.def("ideal_ratio_mask", &ideal_ratio_mask, py::arg("speech_magnitude"),
        py::arg("noise_magnitude"));
  m.def(
      "scaled_softmax",
      [](const std::vector<double>& logits, double lambda) {
        return scaled_softmax(logits, lambda).probs;
      },
      py::arg("logits"), py::arg("lam") = 10.0);
  m.def(
      "param_count",
      [](int input_dim, const std::vector<int>& hidden, int output_dim) {
        return param_count({input_dim, hidden, output_dim});
      },
      py::arg("input_dim"), py::arg("hidden"), py::arg("output_dim"));

  m.def("load_wav", [](const std::filesystem::path& p) { return to_numpy(load_wav(p)); });
  m.def(
      "save_wav", [](const std::filesystem::path& p, const Array& x) { save_wav(p, view(x)); },
      py::arg("path"), py::arg("samples"));

  m.def(
      "denoise",
      [](const std::filesystem::path& model, const Array& x) {
        const LoadedModel loaded = load_model(model);
        DenoiseResult r = denoise(as_denoiser(loaded), view(x), loaded.stft);
        py::dict report;
        report["chosen"] = r.report.chosen;
        report["gate_probs"] = r.report.gate_probs;
        report["active_params"] = r.report.active_params;
        report["learned_params"] = r.report.learned_params;
        return py::make_tuple(to_numpy(std::move(r.estimate)), report);
      },
      py::arg("model"), py::arg("mixture"),
      "Denoise with a saved checkpoint; returns (estimate, report).");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = dispatch(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run an smle subcommand; returns (exit_code, stdout, stderr).");
}
