// Copyright (c) 2026 The redforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "redforge/annotation.hpp"
#include "redforge/cluster.hpp"
#include "redforge/corpus.hpp"
#include "redforge/dsp.hpp"
#include "redforge/error.hpp"
#include "redforge/kernels.hpp"
#include "redforge/pipeline.hpp"
#include "redforge/quality.hpp"
#include "redforge/segmenter.hpp"
#include "redforge/synth.hpp"

namespace py = pybind11;
using namespace redforge;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <class J>
py::object to_py(const J& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Json from_py(const py::handle& obj) {
  const std::string text = py::str(py::module_::import("json").attr("dumps")(obj));
  return Json::parse(text);
}

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw InvariantError("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

Array from_matrix(const Matrix& m) {
  Array a({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

kern::Tensor to_tensor(const Array& a) {
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  return kern::Tensor(std::move(shape), to_vector(a));
}

Array from_tensor(const kern::Tensor& t) {
  Array a(std::vector<py::ssize_t>(t.shape.begin(), t.shape.end()));
  std::copy(t.data.begin(), t.data.end(), a.mutable_data());
  return a;
}

std::vector<SegmentRecord> records_from_py(const py::list& records) {
  std::vector<SegmentRecord> out;
  for (const auto& r : records) out.push_back(segment_from_json(from_py(r)));
  return out;
}

py::list records_to_py(const std::vector<SegmentRecord>& records) {
  py::list out;
  for (const auto& r : records) out.append(to_py(to_json(r)));
  return out;
}

py::list intervals_to_py(const std::vector<seg::Interval>& v) {
  py::list out;
  for (const auto& iv : v) out.append(py::make_tuple(iv.start, iv.end));
  return out;
}

pipeline::PipelineConfig config_from_py(const py::dict& config) {
  auto c = pipeline::PipelineConfig::from_json(from_py(config));
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_redforge, m) {
  m.doc() = "redforge data-curation pipeline and kernels";

  // Translators run most recent first, so subclasses are registered last.
  const auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvariantError>(m, "InvariantError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<ManifestError>(m, "ManifestError", error.ptr());
  py::register_exception<ProtocolError>(m, "ProtocolError", error.ptr());
  py::register_exception<StageError>(m, "StageError", error.ptr());

  // Pipeline
  m.def(
      "run_pipeline",
      [](const py::dict& cfg, std::optional<std::function<void(const std::string&)>> progress) {
        const auto c = config_from_py(cfg);
        pipeline::RunResult r;
        {
          py::gil_scoped_release release;
          pipeline::ProgressFn fn;
          if (progress) {
            fn = [&](const std::string& msg) {
              py::gil_scoped_acquire acquire;
              (*progress)(msg);
            };
          }
          r = pipeline::run_pipeline(c, fn);
        }
        py::list stages;
        for (const auto& s : r.stages) {
          py::dict d;
          d["stage"] = pipeline::to_string(s.stage);
          d["resumed"] = s.resumed;
          d["tally"] = to_py(pipeline::tally_to_json(s.tally));
          stages.append(d);
        }
        py::dict out;
        out["stages"] = stages;
        out["funnel"] = to_py(r.funnel.to_json());
        out["final_manifest"] = r.final_manifest.string();
        return out;
      },
      py::arg("config"), py::arg("progress") = py::none(),
      "Run every stage, resuming from matching checkpoints. Returns the funnel.");
  m.def(
      "run_stage",
      [](const py::dict& cfg, const std::string& name) {
        const auto s = pipeline::parse_stage(name);
        if (!s) throw ConfigError("unknown stage '" + name + "'");
        const auto c = config_from_py(cfg);
        pipeline::StageResult r;
        {
          py::gil_scoped_release release;
          r = pipeline::run_stage(c, *s);
        }
        py::dict d;
        d["stage"] = name;
        d["resumed"] = r.resumed;
        d["tally"] = to_py(pipeline::tally_to_json(r.tally));
        return d;
      },
      py::arg("config"), py::arg("stage"));
  m.def("stats", [](const std::filesystem::path& ws) { return to_py(pipeline::stats(ws).to_json()); },
        py::arg("workspace"));
  m.def("default_config", [] { return to_py(pipeline::PipelineConfig{}.to_json()); });
  m.def("stage_names", [] {
    std::vector<std::string> out;
    for (auto s : pipeline::kStages) out.push_back(pipeline::to_string(s));
    return out;
  });

  // Manifests
  m.def(
      "read_manifest", [](const std::filesystem::path& p) { return records_to_py(read_manifest(p)); },
      py::arg("path"));
  m.def(
      "write_manifest",
      [](const py::list& records, const std::filesystem::path& p) { write_manifest(records_from_py(records), p); },
      py::arg("records"), py::arg("path"));

  // Quality filter
  m.def(
      "apply_filters",
      [](const py::list& records, double mos_min, double rolloff_min_hz, double asr_conf_min) {
        const quality::FilterThresholds t{mos_min, rolloff_min_hz, asr_conf_min};
        t.validate();
        const auto r = quality::apply_filters(records_from_py(records), t);
        py::dict d;
        d["kept"] = records_to_py(r.kept);
        d["rejected"] = records_to_py(r.rejected);
        d["all_failures"] = r.all_failures;
        return d;
      },
      py::arg("records"), py::arg("mos_min") = 3.3, py::arg("rolloff_min_hz") = 7000.0,
      py::arg("asr_conf_min") = 0.8);

  // Segmentation
  m.def(
      "segment_track",
      [](const std::vector<std::uint8_t>& decisions, double frame_shift, double asset_duration, double merge_gap,
         double boundary_pad, double min_dur, double max_dur) {
        const seg::SegmentationPolicy p{merge_gap, boundary_pad, min_dur, max_dur};
        p.validate();
        const auto r = seg::segment_track({decisions, frame_shift, asset_duration}, p);
        return py::make_tuple(intervals_to_py(r.kept), intervals_to_py(r.rejected));
      },
      py::arg("decisions"), py::arg("frame_shift"), py::arg("asset_duration"), py::arg("merge_gap") = 1.0,
      py::arg("boundary_pad") = 0.3, py::arg("min_dur") = 2.0, py::arg("max_dur") = 20.0,
      "Returns (kept, rejected) lists of (start, end) in seconds.");
  m.def(
      "energy_vad",
      [](const Array& samples, int sample_rate, double threshold_db) {
        const auto x = to_vector(samples);
        const auto t = seg::energy_vad(x, sample_rate, seg::default_vad_frames(sample_rate), threshold_db);
        return py::make_tuple(t.decisions, t.frame_shift, t.asset_duration);
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("threshold_db") = seg::kDefaultVadThresholdDb);

  // Roll-off
  m.def(
      "rolloff",
      [](const Array& samples, int sample_rate, double fraction) {
        return dsp::signal_rolloff(to_vector(samples), sample_rate, fraction);
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("energy_fraction") = 0.995);

  // Speaker clustering
  m.def(
      "cluster",
      [](const Array& embeddings, int k, std::uint64_t seed, double merge_threshold) {
        const Matrix e = to_matrix(embeddings);
        cluster::ClusterParams p;
        p.seed = seed;
        p.merge_threshold = merge_threshold;
        const int kk = k > 0 ? k : cluster::default_k(e.rows());
        return to_py(cluster::merge_clusters(cluster::kmeans(e, kk, p), merge_threshold).to_json());
      },
      py::arg("embeddings"), py::arg("k") = 0, py::arg("seed") = 0, py::arg("merge_threshold") = 0.8,
      "k-means followed by centroid merging; returns the model as a dict.");

  // Kernels
  m.def(
      "vq_quantize",
      [](const Array& inputs, const Array& codebook) {
        const auto r = kern::vq_quantize(to_matrix(inputs), kern::Codebook{to_matrix(codebook)});
        return py::make_tuple(r.indices, from_matrix(r.quantized), r.loss);
      },
      py::arg("inputs"), py::arg("codebook"), "Returns (indices, quantized, loss).");
  m.def(
      "composite_loss",
      [](double vq, double ssl, double acoustic) { return kern::composite_loss(vq, ssl, acoustic).composite; },
      py::arg("vq"), py::arg("ssl"), py::arg("acoustic"));
  m.def(
      "clip_and_shuffle",
      [](const Array& frames, double frame_rate, std::optional<double> fraction, double slice_len,
         std::uint64_t seed) {
        const auto r = kern::clip_and_shuffle(to_matrix(frames), frame_rate, {fraction, slice_len, seed});
        py::dict d;
        d["output"] = from_matrix(r.output);
        d["fraction"] = r.fraction;
        d["span_start"] = r.span_start;
        d["span_frames"] = r.span_frames;
        d["slice_frames"] = r.slice_frames;
        d["order"] = r.order;
        return d;
      },
      py::arg("frames"), py::arg("frame_rate"), py::arg("fraction") = py::none(), py::arg("slice_len") = 1.0,
      py::arg("seed") = 0);
  m.def(
      "delay_encode",
      [](const kern::Streams& streams, std::optional<std::vector<int>> delays, std::int32_t n_codes) {
        const auto d = delays ? *delays : kern::canonical_delays(streams.size());
        const auto g = kern::delay_encode(streams, d, n_codes);
        kern::Streams rows(g.n_streams);
        for (std::size_t k = 0; k < g.n_streams; ++k) {
          rows[k].assign(g.tokens.begin() + static_cast<std::ptrdiff_t>(k * g.width),
                         g.tokens.begin() + static_cast<std::ptrdiff_t>((k + 1) * g.width));
        }
        return rows;
      },
      py::arg("streams"), py::arg("delays") = py::none(), py::arg("n_codes") = kern::kDefaultCodebookSize);
  m.def(
      "delay_decode",
      [](const kern::Streams& rows, const std::vector<int>& delays, std::int32_t n_codes) {
        kern::TokenGrid g;
        g.n_streams = rows.size();
        g.width = rows.empty() ? 0 : rows[0].size();
        for (const auto& r : rows) {
          if (r.size() != g.width) throw InvariantError("ragged token grid");
          g.tokens.insert(g.tokens.end(), r.begin(), r.end());
        }
        g.delays = delays;
        g.n_codes = n_codes;
        g.pad_id = n_codes;
        return kern::delay_decode(g);
      },
      py::arg("grid"), py::arg("delays"), py::arg("n_codes") = kern::kDefaultCodebookSize);
  m.def(
      "lookahead_align",
      [](std::size_t semantic_len, std::size_t acoustic_len, int lookahead, int upsample) {
        std::vector<std::int64_t> out;
        for (const auto& e : kern::lookahead_align(semantic_len, acoustic_len, lookahead, upsample)) {
          out.push_back(e.semantic_index);
        }
        return out;
      },
      py::arg("semantic_len"), py::arg("acoustic_len"), py::arg("lookahead") = kern::kDefaultLookahead,
      py::arg("upsample") = 2, "Semantic frame per acoustic position; -1 marks the begin embedding.");
  m.def(
      "ot_path",
      [](const Array& x0, const Array& x1, double t, double sigma) {
        return from_tensor(kern::ot_path(to_tensor(x0), to_tensor(x1), t, sigma));
      },
      py::arg("x0"), py::arg("x1"), py::arg("t"), py::arg("sigma") = 1e-4);
  m.def(
      "ot_field",
      [](const Array& x0, const Array& x1, double sigma) {
        return from_tensor(kern::ot_field(to_tensor(x0), to_tensor(x1), sigma));
      },
      py::arg("x0"), py::arg("x1"), py::arg("sigma") = 1e-4);
  m.def(
      "cfg_combine",
      [](const Array& cond, const Array& uncond, double alpha) {
        return from_tensor(kern::cfg_combine(to_tensor(cond), to_tensor(uncond), alpha));
      },
      py::arg("v_cond"), py::arg("v_uncond"), py::arg("alpha") = 0.7);
  m.def(
      "integrate_ode",
      [](const std::function<Array(Array, double)>& field, const Array& x0, int n_steps) {
        const kern::FieldFn fn = [&](const kern::Tensor& x, double t, const kern::Tensor*) {
          return to_tensor(field(from_tensor(x), t));
        };
        return from_tensor(kern::integrate_ode(fn, to_tensor(x0), n_steps));
      },
      py::arg("field"), py::arg("x0"), py::arg("n_steps"), "Euler from t=0 to 1; field(x, t) -> array.");

  // Annotation
  m.def(
      "parse_annotated",
      [](const std::string& text, const std::string& emotion) {
        return to_py(annot::parse_annotated(text, annot::parse_emotion(emotion)).to_json());
      },
      py::arg("text"), py::arg("emotion") = "neutral");
  m.def(
      "canonical_text",
      [](const std::string& text, const std::string& emotion) {
        return annot::serialize(annot::parse_annotated(text, annot::parse_emotion(emotion)));
      },
      py::arg("text"), py::arg("emotion") = "neutral");
  m.def("behaviors", [] {
    py::dict out;
    for (int i = 0; i < annot::kBehaviorCount; ++i) {
      const auto b = static_cast<annot::Behavior>(i);
      out[py::str(annot::to_string(b))] =
          annot::mode_of(b) == annot::LabelMode::kTokenInsertion ? "token_insertion" : "embedding_injection";
    }
    return out;
  });

  // Synthetic corpus
  m.def(
      "write_corpus",
      [](const std::filesystem::path& dir, std::size_t n_files, double file_seconds, std::uint64_t seed) {
        py::list out;
        for (const auto& t : synth::write_corpus(dir, {n_files, file_seconds, seed})) out.append(to_py(synth::to_json(t)));
        return out;
      },
      py::arg("dir"), py::arg("n_files") = 20, py::arg("file_seconds") = 30.0, py::arg("seed") = 7);
}
