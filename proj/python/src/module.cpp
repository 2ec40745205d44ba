// Copyright 2026 The esdd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <sstream>

#include "esdd/captions.hpp"
#include "esdd/cli.hpp"
#include "esdd/error.hpp"
#include "esdd/evalkit.hpp"
#include "esdd/features.hpp"
#include "esdd/manifest.hpp"
#include "esdd/util.hpp"
#include "esdd/wav.hpp"

namespace py = pybind11;
using namespace esdd;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

FloatArray to_array(const FeatureMatrix& m) {
  FloatArray out({m.frames, m.dims});
  std::memcpy(out.mutable_data(), m.values.data(), m.values.size() * sizeof(float));
  return out;
}

py::dict record_to_dict(const ClipRecord& r) {
  py::dict d;
  d["clip_id"] = r.clip_id;
  d["source"] = std::string(to_string(r.source));
  d["audio_type"] = std::string(to_string(r.audio_type));
  d["label"] = std::string(to_string(r.label));
  d["deepfake_type"] = std::string(to_string(r.deepfake_type));
  d["generation_model"] = std::string(to_string(r.generation_model));
  d["split"] = std::string(to_string(r.split));
  d["parent_clip_id"] = r.parent_clip_id ? py::object(py::str(*r.parent_clip_id)) : py::object(py::none());
  d["path"] = r.path;
  d["sample_rate"] = r.sample_rate;
  d["duration"] = r.duration;
  d["caption"] = r.caption;
  d["scene"] = r.scene;
  d["events"] = r.events;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Environmental sound deepfake benchmark toolkit.";
  m.attr("__version__") = std::string(kToolVersion).substr(5);

  // Messages carry the error kind, e.g. "format: bad magic".
  static PyObject* error_type = py::exception<Error>(m, "Error", PyExc_RuntimeError).release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(error_kind_name(e.kind())) + ": " + e.what();
      PyErr_SetString(error_type, msg.c_str());
    }
  });

  m.def(
      "compute_eer",
      [](const std::vector<double>& real, const std::vector<double>& fake) {
        const EerResult r = compute_eer(real, fake);
        return py::make_tuple(r.eer, r.threshold);
      },
      py::arg("real_scores"), py::arg("fake_scores"),
      "Equal error rate (proportion) and threshold; higher scores mean real.");
  m.def("format_percent", &format_percent, py::arg("percent"));

  m.def("rewrite_label", [](const std::string& s) { return rewrite_label(s); }, py::arg("label"));
  m.def(
      "render_prompt",
      [](const std::string& scene, const std::vector<std::string>& events) {
        const RenderedPrompt r = render_prompt(scene, events);
        return py::make_tuple(r.kind == PromptKind::A ? "A" : "B", r.text);
      },
      py::arg("scene"), py::arg("events") = std::vector<std::string>{});

  m.def(
      "logmel",
      [](const FloatArray& samples, int sample_rate) {
        if (samples.ndim() != 1) throw py::value_error("samples must be one-dimensional");
        Waveform w;
        w.sample_rate = sample_rate;
        w.samples.assign(samples.data(), samples.data() + samples.size());
        LogMelConfig cfg;
        cfg.sample_rate = sample_rate;
        FeatureMatrix f;
        {
          py::gil_scoped_release release;
          f = LogMel(cfg).compute(w);
        }
        return to_array(f);
      },
      py::arg("samples"), py::arg("sample_rate") = 16000, "T x 64 log-mel matrix.");

  m.def(
      "read_wav",
      [](const std::filesystem::path& path) {
        const Waveform w = read_wav(path);
        FloatArray a(w.samples.size());
        std::memcpy(a.mutable_data(), w.samples.data(), w.samples.size() * sizeof(float));
        return py::make_tuple(a, w.sample_rate);
      },
      py::arg("path"));

  m.def(
      "read_embedding",
      [](const std::filesystem::path& path) {
        const FeatureMatrix f = read_embedding(path);
        return py::make_tuple(to_array(f), f.front_end_id);
      },
      py::arg("path"), "(T x D float32 array, front-end id)");
  m.def(
      "write_embedding",
      [](const std::filesystem::path& path, const FloatArray& values, const std::string& front_end_id) {
        if (values.ndim() != 2) throw py::value_error("values must be a T x D array");
        FeatureMatrix f;
        f.frames = static_cast<std::size_t>(values.shape(0));
        f.dims = static_cast<std::size_t>(values.shape(1));
        f.front_end_id = front_end_id;
        f.values.assign(values.data(), values.data() + values.size());
        write_embedding(path, f);
      },
      py::arg("path"), py::arg("values"), py::arg("front_end_id"));

  m.def(
      "read_manifest",
      [](const std::filesystem::path& path) {
        const Manifest mf = read_manifest(path);
        py::list records;
        for (const auto& r : mf.records) records.append(record_to_dict(r));
        return py::make_tuple(records, mf.provenance);
      },
      py::arg("path"), "(list of record dicts, provenance lines)");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err, esdd_environment());
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one esdd command in-process; returns (exit code, stdout, stderr).");
}
