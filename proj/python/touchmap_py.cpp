/*
 Copyright 2026 The touchmap Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// Python bindings: array-level access to the DSP, detector, manifold and
// regressor, plus the file-based pipeline stages.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "touchmap/audio.hpp"
#include "touchmap/corpus.hpp"
#include "touchmap/detector.hpp"
#include "touchmap/dsp.hpp"
#include "touchmap/error.hpp"
#include "touchmap/manifold.hpp"
#include "touchmap/pipeline.hpp"
#include "touchmap/regressor.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace touchmap;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

AudioClip to_clip(const DArray& samples, int sample_rate) {
    if (samples.ndim() != 1) throw py::value_error("samples must be one-dimensional");
    AudioClip c;
    c.sample_rate = sample_rate;
    c.samples.assign(samples.data(), samples.data() + samples.size());
    return c;
}

DArray vec(const std::vector<double>& v) {
    DArray out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

DArray matrix(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
    DArray out({static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(cols)});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

EmbeddingMatrix to_embedding(const DArray& data, std::vector<std::string> ids) {
    if (data.ndim() != 2) throw py::value_error("embeddings must be a 2-D array");
    EmbeddingMatrix m;
    m.n = static_cast<std::size_t>(data.shape(0));
    m.d = static_cast<std::size_t>(data.shape(1));
    m.data.assign(data.data(), data.data() + data.size());
    if (ids.empty())
        for (std::size_t i = 0; i < m.n; ++i) ids.push_back(std::to_string(i));
    if (ids.size() != m.n) throw py::value_error("ids must have one entry per row");
    m.ids = std::move(ids);
    return m;
}

PipelineConfig config_of(const std::string& json) {
    return config_from_json(json.empty() ? "{}" : json);
}

py::dict event_dict(const DetectionEvent& e) {
    py::dict d;
    d["peak_frame"] = e.peak_frame;
    d["peak_time"] = e.peak_time;
    d["energy_prominence"] = e.energy_prominence;
    d["flatness"] = e.flatness_at_peak;
    d["onset_ratio"] = e.onset_ratio;
    d["segment_start"] = e.segment_start;
    d["segment_end"] = e.segment_end;
    return d;
}

} // namespace

PYBIND11_MODULE(_touchmap, m) {
    m.doc() = "touchmap core bindings";

    auto base = py::register_exception<Error>(m, "TouchmapError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());

    m.attr("SAMPLE_RATE") = kPipelineSampleRate;

    // Audio
    m.def(
        "read_wav",
        [](const fs::path& p) {
            const auto c = read_wav(p);
            return vec(c.samples);
        },
        py::arg("path"), "16-bit mono WAV as float64 samples at 16 kHz.");
    m.def(
        "write_wav",
        [](const fs::path& p, const DArray& samples) { write_wav(p, to_clip(samples, kPipelineSampleRate)); },
        py::arg("path"), py::arg("samples"));

    // DSP
    m.def(
        "stft",
        [](const DArray& samples, int window, int hop, int fft_size, bool pad_end) {
            const auto s = stft(to_clip(samples, kPipelineSampleRate), StftConfig{window, hop, fft_size, pad_end});
            return matrix(s.mag, s.n_frames, s.n_bins);
        },
        py::arg("samples"), py::arg("window") = 480, py::arg("hop") = 160, py::arg("fft_size") = 512,
        py::arg("pad_end") = true, "Magnitude STFT, shape (frames, bins).");
    m.def(
        "features",
        [](const DArray& samples) {
            const auto clip = to_clip(samples, kPipelineSampleRate);
            const auto spec = stft(clip);
            const auto f = compute_features(clip, spec);
            py::dict d;
            d["energy"] = vec(f.energy);
            d["flatness"] = vec(f.flatness);
            d["onset"] = vec(f.onset);
            d["centroid"] = vec(f.centroid);
            d["zcr"] = vec(f.zcr);
            return d;
        },
        py::arg("samples"), "Per-frame feature tracks.");
    m.def(
        "segment_features",
        [](const DArray& samples) {
            const auto s = stft(to_clip(samples, kPipelineSampleRate));
            return matrix(log_magnitude(s), s.n_frames, s.n_bins);
        },
        py::arg("samples"), "Log-magnitude regressor input, shape (frames, bins).");

    // Detector
    m.def(
        "detect",
        [](const DArray& samples, const std::string& config_json) {
            const auto cfg = config_of(config_json);
            const auto clip = to_clip(samples, kPipelineSampleRate);
            std::vector<DetectionEvent> ev;
            {
                py::gil_scoped_release nogil;
                ev = detect_clip(clip, cfg.detector, cfg.dsp);
            }
            py::list out;
            for (const auto& e : ev) out.append(event_dict(e));
            return out;
        },
        py::arg("samples"), py::arg("config_json") = "", "Detected events as dicts, sorted by time.");

    // Manifold
    m.def(
        "embed",
        [](const DArray& data, int n_neighbors, double min_dist, int n_epochs, std::uint64_t seed) {
            const auto emb = to_embedding(data, {});
            ManifoldConfig cfg;
            cfg.n_neighbors = n_neighbors;
            cfg.min_dist = min_dist;
            cfg.n_epochs = n_epochs;
            cfg.seed = seed;
            ManifoldCoords c;
            {
                py::gil_scoped_release nogil;
                c = embed(emb, cfg);
            }
            return matrix(c.xy, c.size(), 2);
        },
        py::arg("data"), py::arg("n_neighbors") = 15, py::arg("min_dist") = 0.1, py::arg("n_epochs") = 200,
        py::arg("seed") = 42, "2-D layout of the rows of `data`.");
    m.def(
        "neighborhood_preservation",
        [](const DArray& high, const DArray& low, std::size_t k) {
            if (low.ndim() != 2 || low.shape(1) != 2) throw py::value_error("low must have shape (n, 2)");
            ManifoldCoords c;
            c.xy.assign(low.data(), low.data() + low.size());
            return neighborhood_preservation(to_embedding(high, {}), c, k);
        },
        py::arg("high"), py::arg("low"), py::arg("k") = 15);
    m.def(
        "read_embedding",
        [](const fs::path& p) {
            const auto e = read_embedding(p);
            return py::make_tuple(e.ids, matrix(e.data, e.n, e.d));
        },
        py::arg("path"), "(ids, array) from a CSV or a float32 blob with JSON sidecar.");
    m.def(
        "write_embedding",
        [](const fs::path& p, const DArray& data, std::vector<std::string> ids) {
            const auto e = to_embedding(data, std::move(ids));
            if (p.extension() == ".csv") write_embedding_csv(p, e);
            else write_embedding_bin(p, e);
        },
        py::arg("path"), py::arg("data"), py::arg("ids") = std::vector<std::string>{},
        "CSV for a .csv path, otherwise a float32 blob plus sidecar.");

    // Regressor
    py::class_<RegressorModel>(m, "Model")
        .def_static(
            "load", [](const fs::path& p) { return load_model(p); }, py::arg("path"))
        .def(
            "predict",
            [](const RegressorModel& self, const DArray& samples) {
                const auto f = segment_features(to_clip(samples, kPipelineSampleRate));
                const auto y = self.predict(f);
                return py::make_tuple(y[0], y[1]);
            },
            py::arg("segment"), "Coordinates for one segment of audio.")
        .def_property_readonly("n_params", [](const RegressorModel& self) { return self.net.params().size(); })
        .def_property_readonly("input_shape", [](const RegressorModel& self) {
            return py::make_tuple(self.net.config().input_frames, self.net.config().input_bins);
        });

    // Pipeline stages
    m.def("default_config", [] { return config_to_json(config_of("")); });
    m.def(
        "synth",
        [](const fs::path& out, int n_clips, std::uint64_t seed, bool blind) {
            auto spec = SynthSpec::standard();
            spec.n_clips = n_clips;
            spec.seed = seed;
            spec.validate();
            py::gil_scoped_release nogil;
            write_corpus(out, spec, synth_audio(spec), blind);
        },
        py::arg("out"), py::arg("n_clips") = 100, py::arg("seed") = 7, py::arg("blind") = false,
        "Writes the standard synthetic corpus under `out`.");
    m.def(
        "run_detect",
        [](const fs::path& audio_dir, const fs::path& out, const std::string& config_json) {
            const auto cfg = config_of(config_json);
            DetectReport r;
            {
                py::gil_scoped_release nogil;
                r = run_detect(audio_dir, cfg, out);
            }
            py::dict d;
            d["clips"] = r.clips;
            d["events"] = r.events;
            d["warnings"] = r.warnings;
            py::list failures;
            for (const auto& f : r.failures) failures.append(py::make_tuple(f.file, f.message));
            d["failures"] = failures;
            return d;
        },
        py::arg("audio_dir"), py::arg("out"), py::arg("config_json") = "");
    m.def(
        "run_reduce",
        [](const fs::path& embeddings, const fs::path& out, const std::string& config_json,
           std::optional<fs::path> manifest) {
            const auto cfg = config_of(config_json);
            py::gil_scoped_release nogil;
            run_reduce(embeddings, cfg, out, manifest);
        },
        py::arg("embeddings"), py::arg("out"), py::arg("config_json") = "", py::arg("manifest") = py::none());
    m.def(
        "run_train",
        [](const fs::path& segments, const fs::path& coords, const fs::path& manifest, const fs::path& out,
           const std::string& config_json) {
            const auto cfg = config_of(config_json);
            TrainEvalReport r;
            {
                py::gil_scoped_release nogil;
                r = run_train_eval(segments, coords, manifest, cfg, out);
            }
            return r.to_json();
        },
        py::arg("segments"), py::arg("coords"), py::arg("manifest"), py::arg("out"), py::arg("config_json") = "",
        "Trains and evaluates; returns the report as JSON text.");
}
