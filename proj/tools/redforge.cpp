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

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "redforge/annotation.hpp"
#include "redforge/bridge.hpp"
#include "redforge/error.hpp"
#include "redforge/kernels.hpp"
#include "redforge/pipeline.hpp"
#include "redforge/synth.hpp"

namespace rf = redforge;
namespace pl = redforge::pipeline;
namespace kern = redforge::kern;

namespace {

// ---------------------------------------------------------------------------
// JSON file helpers

rf::Json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw rf::ConfigError("cannot read " + path);
  try {
    return rf::Json::parse(f);
  } catch (const rf::Json::exception& e) {
    throw rf::ConfigError(path + " is not valid JSON: " + e.what());
  }
}

void emit(const rf::OrderedJson& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump() << '\n';
    return;
  }
  std::ofstream f(out);
  if (!f) throw rf::ConfigError("cannot write " + out);
  f << j.dump() << '\n';
}

rf::Matrix matrix_from_json(const rf::Json& j, const std::string& what) {
  if (!j.is_array()) throw rf::ConfigError(what + " must be a nested array");
  std::vector<std::vector<double>> rows;
  for (const auto& r : j) {
    if (!r.is_array()) throw rf::ConfigError(what + " must be a nested array");
    rows.push_back(r.get<std::vector<double>>());
  }
  if (rows.empty()) return {};
  return rf::Matrix::from_rows(rows);
}

rf::OrderedJson matrix_to_json(const rf::Matrix& m) {
  rf::OrderedJson j = rf::OrderedJson::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    j.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return j;
}

void tensor_shape(const rf::Json& j, std::size_t depth, std::vector<std::size_t>& shape) {
  if (!j.is_array()) return;
  if (depth == shape.size()) shape.push_back(j.size());
  if (!j.empty()) tensor_shape(j[0], depth + 1, shape);
}

void tensor_fill(const rf::Json& j, std::size_t depth, const std::vector<std::size_t>& shape,
                 std::vector<double>& data) {
  if (depth == shape.size()) {
    if (!j.is_number()) throw rf::ConfigError("tensor is not rectangular");
    data.push_back(j.get<double>());
    return;
  }
  if (!j.is_array() || j.size() != shape[depth]) throw rf::ConfigError("tensor is not rectangular");
  for (const auto& e : j) tensor_fill(e, depth + 1, shape, data);
}

kern::Tensor tensor_from_json(const rf::Json& j) {
  std::vector<std::size_t> shape;
  tensor_shape(j, 0, shape);
  std::vector<double> data;
  tensor_fill(j, 0, shape, data);
  return kern::Tensor(shape, data);
}

rf::OrderedJson tensor_to_json(const kern::Tensor& t, std::size_t depth = 0,
                               std::size_t offset = 0) {
  if (depth == t.shape.size()) return t.data[offset];
  std::size_t stride = 1;
  for (std::size_t d = depth + 1; d < t.shape.size(); ++d) stride *= t.shape[d];
  rf::OrderedJson j = rf::OrderedJson::array();
  for (std::size_t i = 0; i < t.shape[depth]; ++i) {
    j.push_back(tensor_to_json(t, depth + 1, offset + i * stride));
  }
  return j;
}

kern::Tensor read_tensor(const std::string& path) { return tensor_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Pipeline options shared by the stage subcommands

struct PipelineFlags {
  std::string config;
  std::string workspace;
  std::vector<std::string> inputs;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<double> merge_gap, boundary_pad, min_dur, max_dur;
  std::optional<std::string> vad_backend;
  std::optional<double> vad_threshold_db;
  std::optional<int> k_init;
  std::optional<double> merge_threshold, outlier_threshold, chunk_len, chunk_hop;
  std::optional<double> mos_min, rolloff_min_hz, asr_conf_min;
  std::optional<std::string> rolloff_source;
  std::vector<std::string> plugins;  // cap=cmd
  std::optional<double> plugin_timeout;
  bool quiet = false;
};

void add_pipeline_flags(CLI::App* app, PipelineFlags& f) {
  app->add_option("-c,--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("-w,--workspace", f.workspace, "Workspace directory");
  app->add_option("-i,--input", f.inputs, "Input WAV glob (repeatable)");
  app->add_option("--workers", f.workers, "Worker count");
  app->add_option("--seed", f.seed, "Global seed");
  app->add_option("--merge-gap", f.merge_gap, "segmentation.merge_gap (s)");
  app->add_option("--boundary-pad", f.boundary_pad, "segmentation.boundary_pad (s)");
  app->add_option("--min-dur", f.min_dur, "segmentation.min_dur (s)");
  app->add_option("--max-dur", f.max_dur, "segmentation.max_dur (s)");
  app->add_option("--vad-backend", f.vad_backend, "vad.backend")
      ->check(CLI::IsMember({"energy", "plugin"}));
  app->add_option("--vad-threshold-db", f.vad_threshold_db, "vad.threshold_db");
  app->add_option("--k-init", f.k_init, "cluster.k_init (0 picks the default)");
  app->add_option("--merge-threshold", f.merge_threshold, "cluster.merge_threshold");
  app->add_option("--outlier-threshold", f.outlier_threshold, "cluster.outlier_threshold");
  app->add_option("--chunk-len", f.chunk_len, "cluster.chunk_len (s)");
  app->add_option("--chunk-hop", f.chunk_hop, "cluster.chunk_hop (s)");
  app->add_option("--mos-min", f.mos_min, "filter.mos_min");
  app->add_option("--rolloff-min-hz", f.rolloff_min_hz, "filter.rolloff_min_hz");
  app->add_option("--asr-conf-min", f.asr_conf_min, "filter.asr_conf_min");
  app->add_option("--rolloff-source", f.rolloff_source, "filter.rolloff_source")
      ->check(CLI::IsMember({"enhanced", "original"}));
  app->add_option("--plugin", f.plugins, "CAP=CMD plugin command (repeatable)");
  app->add_option("--plugin-timeout", f.plugin_timeout, "Per-call timeout for --plugin (s)");
  app->add_flag("-q,--quiet", f.quiet, "No progress output");
}

pl::PipelineConfig build_config(const PipelineFlags& f) {
  rf::Json j = f.config.empty() ? rf::Json::object() : read_json_file(f.config);
  if (!j.is_object()) throw rf::ConfigError("config must be a JSON object");
  const auto set = [&](const char* section, const char* key, const auto& v) {
    if (!v) return;
    if (!j.contains(section)) j[section] = rf::Json::object();
    j[section][key] = *v;
  };
  if (!f.workspace.empty()) j["workspace"] = f.workspace;
  if (!f.inputs.empty()) j["inputs"] = f.inputs;
  if (f.workers) j["workers"] = *f.workers;
  if (f.seed) j["seed"] = *f.seed;
  set("segmentation", "merge_gap", f.merge_gap);
  set("segmentation", "boundary_pad", f.boundary_pad);
  set("segmentation", "min_dur", f.min_dur);
  set("segmentation", "max_dur", f.max_dur);
  set("vad", "backend", f.vad_backend);
  set("vad", "threshold_db", f.vad_threshold_db);
  set("cluster", "k_init", f.k_init);
  set("cluster", "merge_threshold", f.merge_threshold);
  set("cluster", "outlier_threshold", f.outlier_threshold);
  set("cluster", "chunk_len", f.chunk_len);
  set("cluster", "chunk_hop", f.chunk_hop);
  set("filter", "mos_min", f.mos_min);
  set("filter", "rolloff_min_hz", f.rolloff_min_hz);
  set("filter", "asr_conf_min", f.asr_conf_min);
  set("filter", "rolloff_source", f.rolloff_source);
  for (const auto& p : f.plugins) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw rf::ConfigError("--plugin expects CAP=CMD");
    if (!j.contains("plugins")) j["plugins"] = rf::Json::object();
    rf::Json spec = {{"cmd", p.substr(eq + 1)}};
    if (f.plugin_timeout) spec["timeout_s"] = *f.plugin_timeout;
    j["plugins"][p.substr(0, eq)] = spec;
  }
  auto config = pl::PipelineConfig::from_json(j);
  config.validate();
  return config;
}

pl::ProgressFn progress(const PipelineFlags& f) {
  if (f.quiet) return {};
  return [](const std::string& msg) { std::cerr << msg << '\n'; };
}


std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw rf::ConfigError("expected a comma-separated integer list, got '" + s + "'");
    }
  }
  return out;
}

kern::Streams streams_from_json(const rf::Json& j) {
  if (!j.is_array()) throw rf::ConfigError("streams must be a nested integer array");
  kern::Streams s;
  for (const auto& row : j) s.push_back(row.get<std::vector<std::int32_t>>());
  return s;
}

rf::OrderedJson grid_to_json(const kern::TokenGrid& g) {
  rf::OrderedJson rows = rf::OrderedJson::array();
  for (std::size_t k = 0; k < g.n_streams; ++k) {
    std::vector<std::int32_t> row(g.width);
    for (std::size_t t = 0; t < g.width; ++t) row[t] = g.at(k, t);
    rows.push_back(row);
  }
  rf::OrderedJson j;
  j["tokens"] = rows;
  j["delays"] = g.delays;
  j["pad_id"] = g.pad_id;
  j["n_codes"] = g.n_codes;
  return j;
}

kern::TokenGrid grid_from_json(const rf::Json& j) {
  kern::TokenGrid g;
  const auto rows = streams_from_json(j.at("tokens"));
  g.n_streams = rows.size();
  g.width = rows.empty() ? 0 : rows[0].size();
  for (const auto& r : rows) {
    if (r.size() != g.width) throw rf::ConfigError("grid rows differ in width");
    g.tokens.insert(g.tokens.end(), r.begin(), r.end());
  }
  g.delays = j.at("delays").get<std::vector<int>>();
  g.n_codes = j.value("n_codes", kern::kDefaultCodebookSize);
  g.pad_id = j.value("pad_id", g.n_codes);
  return g;
}

void add_kern(CLI::App& app) {
  auto* k = app.add_subcommand("kern", "Token and flow-matching kernels on JSON files");
  k->require_subcommand(1);

  {
    auto* c = k->add_subcommand("vq", "Nearest-codeword quantization");
    static std::string codebook, input, out;
    static double shift = kern::kSemanticFrameShift;
    c->add_option("--codebook", codebook, "Codebook JSON [n_codes x dim]")->required();
    c->add_option("--input", input, "Frames JSON [n x dim]")->required();
    c->add_option("--frame-shift", shift, "Codebook frame shift (s)");
    c->add_option("-o,--out", out, "Output file (stdout when omitted)");
    c->callback([] {
      kern::Codebook cb{matrix_from_json(read_json_file(codebook), "codebook"), shift};
      const auto r = kern::vq_quantize(matrix_from_json(read_json_file(input), "input"), cb);
      rf::OrderedJson j;
      j["indices"] = r.indices;
      j["quantized"] = matrix_to_json(r.quantized);
      j["loss"] = r.loss;
      emit(j, out);
    });
  }
  {
    auto* c = k->add_subcommand("clipshuffle", "Clip a span and shuffle its slices");
    static std::string input, out;
    static double frame_rate = 0.0, slice_len = 1.0;
    static std::optional<double> fraction;
    static std::uint64_t seed = 0;
    c->add_option("--input", input, "Frames JSON [n x dim]")->required();
    c->add_option("--frame-rate", frame_rate, "Frames per second")->required();
    c->add_option("--fraction", fraction, "Kept fraction in [0.25, 0.75]");
    c->add_option("--slice-len", slice_len, "Slice length (s)");
    c->add_option("--seed", seed, "Seed");
    c->add_option("-o,--out", out, "Output file");
    c->callback([] {
      const auto r = kern::clip_and_shuffle(matrix_from_json(read_json_file(input), "input"),
                                            frame_rate, {fraction, slice_len, seed});
      rf::OrderedJson j;
      j["output"] = matrix_to_json(r.output);
      j["fraction"] = r.fraction;
      j["span_start"] = r.span_start;
      j["span_frames"] = r.span_frames;
      j["slice_frames"] = r.slice_frames;
      j["order"] = r.order;
      emit(j, out);
    });
  }
  {
    auto* d = k->add_subcommand("delay", "Multi-stream delay pattern");
    d->require_subcommand(1);
    auto* enc = d->add_subcommand("encode", "Streams JSON to a delayed grid");
    static std::string enc_in, enc_out, delays;
    static std::int32_t n_codes = kern::kDefaultCodebookSize;
    enc->add_option("--input", enc_in, "Streams JSON [n x T]")->required();
    enc->add_option("--delays", delays, "Comma-separated delays (default 0,1,...)");
    enc->add_option("--n-codes", n_codes, "Codebook size (pad id)");
    enc->add_option("-o,--out", enc_out, "Output file");
    enc->callback([] {
      const auto streams = streams_from_json(read_json_file(enc_in));
      const auto dl = delays.empty() ? kern::canonical_delays(streams.size()) : parse_int_list(delays);
      emit(grid_to_json(kern::delay_encode(streams, dl, n_codes)), enc_out);
    });
    auto* dec = d->add_subcommand("decode", "Delayed grid JSON back to streams");
    static std::string dec_in, dec_out;
    dec->add_option("--input", dec_in, "Grid JSON {tokens, delays, pad_id, n_codes}")->required();
    dec->add_option("-o,--out", dec_out, "Output file");
    dec->callback([] {
      const auto streams = kern::delay_decode(grid_from_json(read_json_file(dec_in)));
      emit(rf::OrderedJson(streams), dec_out);
    });
  }
  {
    auto* c = k->add_subcommand("lookahead", "Semantic-to-acoustic lookahead plan");
    static std::size_t semantic_len = 0, acoustic_len = 0;
    static int lookahead = kern::kDefaultLookahead, upsample = 1;
    static std::string out;
    c->add_option("--semantic-len", semantic_len, "Semantic frames")->required();
    c->add_option("--acoustic-len", acoustic_len, "Acoustic frames")->required();
    c->add_option("-d,--lookahead", lookahead, "Lookahead frames");
    c->add_option("-r,--upsample", upsample, "Acoustic frames per semantic frame");
    c->add_option("-o,--out", out, "Output file");
    c->callback([] {
      rf::OrderedJson j = rf::OrderedJson::array();
      for (const auto& e : kern::lookahead_align(semantic_len, acoustic_len, lookahead, upsample)) {
        j.push_back({{"acoustic_index", e.acoustic_index}, {"semantic_index", e.semantic_index}});
      }
      emit(j, out);
    });
  }
  {
    auto* fm = k->add_subcommand("fm", "Flow-matching kernels");
    fm->require_subcommand(1);
    static std::string x0, x1, cond, uncond, out;
    static double t = 0.0, sigma = kern::FlowKernelParams{}.sigma, alpha = kern::FlowKernelParams{}.cfg_alpha;
    static int steps = 32;

    auto* path = fm->add_subcommand("path", "phi_t for (x0, x1)");
    path->add_option("--x0", x0, "Tensor JSON")->required();
    path->add_option("--x1", x1, "Tensor JSON")->required();
    path->add_option("-t", t, "Time in [0, 1]")->required();
    path->add_option("--sigma", sigma, "sigma");
    path->add_option("-o,--out", out, "Output file");
    path->callback([] { emit(tensor_to_json(kern::ot_path(read_tensor(x0), read_tensor(x1), t, sigma)), out); });

    auto* field = fm->add_subcommand("field", "Target vector field for (x0, x1)");
    field->add_option("--x0", x0, "Tensor JSON")->required();
    field->add_option("--x1", x1, "Tensor JSON")->required();
    field->add_option("--sigma", sigma, "sigma");
    field->add_option("-o,--out", out, "Output file");
    field->callback([] { emit(tensor_to_json(kern::ot_field(read_tensor(x0), read_tensor(x1), sigma)), out); });

    auto* cfg = fm->add_subcommand("cfg", "Guided combination of two field estimates");
    cfg->add_option("--cond", cond, "Conditional estimate JSON")->required();
    cfg->add_option("--uncond", uncond, "Unconditional estimate JSON")->required();
    cfg->add_option("--alpha", alpha, "Guidance scale");
    cfg->add_option("-o,--out", out, "Output file");
    cfg->callback([] {
      emit(tensor_to_json(kern::cfg_combine(read_tensor(cond), read_tensor(uncond), alpha)), out);
    });

    auto* ode = fm->add_subcommand("ode", "Euler integration of the OT field from x0");
    ode->add_option("--x0", x0, "Tensor JSON")->required();
    ode->add_option("--x1", x1, "Tensor JSON")->required();
    ode->add_option("--sigma", sigma, "sigma");
    ode->add_option("--steps", steps, "Euler steps");
    ode->add_option("-o,--out", out, "Output file");
    ode->callback([] {
      const kern::Tensor a = read_tensor(x0);
      const kern::Tensor v = kern::ot_field(a, read_tensor(x1), sigma);
      const kern::FieldFn f = [v](const kern::Tensor&, double, const kern::Tensor*) { return v; };
      emit(tensor_to_json(kern::integrate_ode(f, a, steps)), out);
    });
  }
}

int annotate_check(const std::string& path, rf::annot::Emotion emotion) {
  std::ifstream f(path);
  if (!f) throw rf::ConfigError("cannot read " + path);
  std::string line;
  std::size_t n = 0, bad = 0;
  while (std::getline(f, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto plan = rf::annot::parse_annotated(line, emotion);
      plan.validate();
      if (rf::annot::parse_annotated(rf::annot::serialize(plan), emotion) != plan) {
        throw rf::InvariantError("canonical form does not round-trip");
      }
    } catch (const rf::Error& e) {
      ++bad;
      std::cout << path << ":" << n << ": " << e.what() << '\n';
    }
  }
  std::cout << (n - bad) << " of " << n << " lines valid\n";
  return bad == 0 ? 0 : static_cast<int>(rf::ExitCode::kStage);
}

std::vector<rf::bridge::Capability> parse_caps(const std::string& list) {
  std::vector<rf::bridge::Capability> caps;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto c = rf::bridge::parse_capability(item);
    if (!c) throw rf::ConfigError("unknown capability '" + item + "'");
    caps.push_back(*c);
  }
  return caps;
}

rf::OrderedJson pipeline_tally_json(const pl::StageResult& r) {
  rf::OrderedJson j;
  j["stage"] = pl::to_string(r.stage);
  j["resumed"] = r.resumed;
  j["tally"] = pl::tally_to_json(r.tally);
  return j;
}

int run(int argc, char** argv) {
  CLI::App app{"redforge: speech corpus curation pipeline and token kernels"};
  app.require_subcommand(1);
  int status = 0;

  PipelineFlags flags;
  for (pl::Stage s : pl::kStages) {
    auto* c = app.add_subcommand(pl::to_string(s), "Run the " + pl::to_string(s) + " stage");
    add_pipeline_flags(c, flags);
    c->callback([&flags, s] {
      const auto r = pl::run_stage(build_config(flags), s, progress(flags));
      std::cout << pipeline_tally_json(r).dump() << '\n';
    });
  }
  {
    auto* c = app.add_subcommand("run", "Run every stage, resuming from checkpoints");
    add_pipeline_flags(c, flags);
    c->callback([&flags] {
      const auto r = pl::run_pipeline(build_config(flags), progress(flags));
      std::cout << r.funnel.to_table();
    });
  }
  {
    auto* c = app.add_subcommand("stats", "Funnel report for a workspace");
    static std::string workspace;
    static bool json = false;
    c->add_option("-w,--workspace", workspace, "Workspace directory")->required();
    c->add_flag("--json", json, "Print JSON instead of the table");
    c->callback([] {
      const auto report = pl::stats(workspace);
      if (json) {
        std::cout << report.to_json().dump(2) << '\n';
      } else {
        std::cout << report.to_table();
      }
    });
  }
  {
    auto* c = app.add_subcommand("synth-corpus", "Write the synthetic test corpus");
    static std::string dir;
    static rf::synth::CorpusOptions opts;
    c->add_option("dir", dir, "Output directory")->required();
    c->add_option("--files", opts.n_files, "Number of files");
    c->add_option("--seconds", opts.file_seconds, "Seconds per file");
    c->add_option("--seed", opts.seed, "Seed");
    c->callback([] {
      const auto truth = rf::synth::write_corpus(dir, opts);
      std::cout << truth.size() << " files written to " << dir << '\n';
    });
  }
  {
    auto* c = app.add_subcommand("plugin-check", "Run the protocol conformance suite on a plugin");
    static std::string cmd, golden;
    static rf::bridge::ConformanceOptions opts;
    c->add_option("cmd", cmd, "Plugin command line")->required();
    c->add_option("--timeout", opts.timeout_s, "Per-call timeout (s)");
    c->add_option("--scratch", opts.scratch_dir, "Scratch directory");
    c->add_flag("--expect-builtin", opts.expect_builtin, "Compare results with the builtin providers");
    c->add_option("--golden", golden, "Expected transcript file")->check(CLI::ExistingFile);
    c->callback([&status] {
      const auto checks = rf::bridge::run_conformance(cmd, opts);
      const std::string transcript = rf::bridge::conformance_transcript(checks);
      for (const auto& ch : checks) {
        std::cout << (ch.passed ? "PASS " : "FAIL ") << ch.name;
        if (!ch.passed && !ch.detail.empty()) {
          std::string detail = ch.detail;
          std::replace(detail.begin(), detail.end(), '\n', ' ');
          std::cout << "  (" << detail << ")";
        }
        std::cout << '\n';
      }
      bool ok = std::all_of(checks.begin(), checks.end(), [](const auto& ch) { return ch.passed; });
      if (!golden.empty()) {
        std::ifstream f(golden);
        std::stringstream expected;
        expected << f.rdbuf();
        if (expected.str() != transcript) {
          std::cout << "transcript differs from " << golden << '\n';
          ok = false;
        }
      }
      if (!ok) status = static_cast<int>(rf::ExitCode::kProtocol);
    });
  }
  {
    auto* c = app.add_subcommand("plugin-serve", "Serve the builtin providers over protocol v1");
    static std::string caps;
    static double vad_threshold = 12.0;
    c->add_option("--caps", caps, "Comma-separated capabilities to declare");
    c->add_option("--vad-threshold-db", vad_threshold, "Energy VAD threshold");
    c->callback([] {
      rf::bridge::BuiltinProvider provider;
      provider.vad_threshold_db = vad_threshold;
      rf::bridge::ServeOptions opts;
      if (!caps.empty()) opts.capabilities = parse_caps(caps);
      rf::bridge::serve(provider, std::cin, std::cout, opts);
    });
  }
  add_kern(app);
  {
    auto* a = app.add_subcommand("annotate", "Paralinguistic annotation format");
    a->require_subcommand(1);
    static std::string emotion = "neutral", text, file;
    auto* p = a->add_subcommand("parse", "Parse annotated text into a prompt plan");
    p->add_option("--emotion", emotion, "neutral, happy, sad or angry")
        ->check(CLI::IsMember({"neutral", "happy", "sad", "angry"}));
    p->add_option("text", text, "Annotated text")->required();
    p->callback([] {
      const auto plan = rf::annot::parse_annotated(text, rf::annot::parse_emotion(emotion));
      std::cout << plan.to_json().dump() << '\n';
    });
    auto* c = a->add_subcommand("check", "Validate a file of annotated lines");
    c->add_option("--emotion", emotion, "Emotion applied to every line")
        ->check(CLI::IsMember({"neutral", "happy", "sad", "angry"}));
    c->add_option("file", file, "One annotated utterance per line")->required();
    c->callback([&status] { status = annotate_check(file, rf::annot::parse_emotion(emotion)); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(rf::ExitCode::kUsage);
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const rf::Error& e) {
    std::cerr << "redforge: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "redforge: " << e.what() << '\n';
    return static_cast<int>(rf::ExitCode::kStage);
  }
}
