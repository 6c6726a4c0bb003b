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

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "redforge/bridge.hpp"

namespace redforge::bridge {

namespace {

std::string error_line(const Json& id, const char* code, const std::string& message) {
  OrderedJson r;
  r["id"] = id;
  r["ok"] = false;
  r["error"] = {{"code", code}, {"message", message}};
  return r.dump();
}

std::string ok_line(const Json& id, OrderedJson result) {
  OrderedJson r;
  r["id"] = id;
  r["ok"] = true;
  r["result"] = std::move(result);
  return r.dump();
}

}  // namespace

std::optional<std::string> handle_request(Provider& provider,
                                          const Handshake& declared,
                                          const std::string& line) {
  Json req;
  try {
    req = Json::parse(line);
  } catch (const Json::exception&) {
    return error_line(nullptr, codes::kInternal, "malformed request line");
  }
  if (!req.is_object()) return error_line(nullptr, codes::kInternal, "request is not an object");
  const Json id = req.value("id", Json());
  if (!req.contains("op") || !req["op"].is_string()) {
    return error_line(id, codes::kInternal, "request lacks an op");
  }
  const std::string op = req["op"].get<std::string>();
  const Json params = req.value("params", Json::object());
  if (params.is_object() && params.contains("__fault")) {
    const Json& fault = params["__fault"];
    if (fault == "exit") return std::nullopt;
    if (fault == "internal") return error_line(id, codes::kInternal, "injected fault");
  }
  const auto cap = parse_capability(op);
  if (!cap || !declared.has(*cap)) {
    return error_line(id, codes::kUnsupportedOp, "unsupported op '" + op + "'");
  }

  Audio audio;
  try {
    if (req.contains("audio_b64")) {
      const std::string& b64 = req["audio_b64"].get_ref<const std::string&>();
      if (b64.size() > kInlineAudioCap / 3 * 4 + 4) {
        return error_line(id, codes::kBadAudio, "inline audio exceeds the size cap");
      }
      audio = decode_wav(base64_decode(b64));
    } else if (req.contains("audio_path") && req["audio_path"].is_string()) {
      audio = read_wav(req["audio_path"].get<std::string>());
    } else {
      return error_line(id, codes::kBadAudio, "request carries no audio");
    }
  } catch (const std::exception& e) {
    return error_line(id, codes::kBadAudio, e.what());
  }
  if (audio.samples.empty()) return error_line(id, codes::kBadAudio, "audio is empty");

  try {
    OrderedJson result;
    switch (*cap) {
      case Capability::kEnhance: {
        if (!params.is_object() || !params.contains("output_path") ||
            !params["output_path"].is_string()) {
          return error_line(id, codes::kInternal, "enhance requires params.output_path");
        }
        const std::string out_path = params["output_path"].get<std::string>();
        const Audio out = provider.enhance(audio);
        write_wav(out_path, out, SampleFormat::kFloat32);
        result["audio_path"] = out_path;
        result["num_samples"] = out.samples.size();
        break;
      }
      case Capability::kVad: {
        const VadResult r = provider.vad(audio);
        result["frame_shift"] = r.frame_shift;
        OrderedJson d = OrderedJson::array();
        for (auto v : r.decisions) d.push_back(v != 0);
        result["decisions"] = std::move(d);
        break;
      }
      case Capability::kEmbed:
        result["embedding"] = provider.embed(audio);
        break;
      case Capability::kTranscribe: {
        const TranscribeResult r = provider.transcribe(audio);
        result["text"] = r.text;
        result["confidence"] = r.confidence;
        break;
      }
      case Capability::kMos:
        result["mos"] = provider.mos(audio);
        break;
    }
    return ok_line(id, std::move(result));
  } catch (const std::exception& e) {
    return error_line(id, codes::kInternal, e.what());
  }
}

std::size_t serve(Provider& provider, std::istream& in, std::ostream& out,
                  const ServeOptions& options) {
  Handshake declared = provider.handshake();
  if (!options.capabilities.empty()) {
    Handshake h;
    for (auto c : options.capabilities) {
      if (provider.handshake().has(c) && !h.has(c)) h.capabilities.push_back(c);
    }
    if (h.has(Capability::kEmbed)) h.embedding_dim = declared.embedding_dim;
    if (h.has(Capability::kVad)) h.vad_frame_shift = declared.vad_frame_shift;
    declared = h;
  }
  declared.validate();
  out << declared.to_json().dump() << '\n' << std::flush;
  std::size_t answered = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto resp = handle_request(provider, declared, line);
    if (!resp) break;
    out << *resp << '\n' << std::flush;
    ++answered;
  }
  return answered;
}

// ---------------------------------------------------------------------------

namespace {

Audio tone_fixture() {
  Audio a;
  a.sample_rate = 16000;
  a.samples.resize(2 * 16000);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    a.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 * i / 16000.0);
  }
  return a;
}

constexpr Capability kAllCapabilities[] = {Capability::kEnhance, Capability::kVad,
                                           Capability::kEmbed, Capability::kTranscribe,
                                           Capability::kMos};

// Runs op through the typed, contract-checked interface and returns the
// result as JSON for comparisons.
Json typed_call(Provider& p, Capability c, const Audio& audio) {
  switch (c) {
    case Capability::kEnhance: {
      // Enhanced audio travels as float32 WAV.
      Audio out = p.enhance(audio);
      for (double& x : out.samples) x = static_cast<float>(x);
      return Json(out.samples);
    }
    case Capability::kVad: {
      const VadResult r = p.vad(audio);
      return Json{{"frame_shift", r.frame_shift}, {"decisions", r.decisions}};
    }
    case Capability::kEmbed:
      return Json(p.embed(audio));
    case Capability::kTranscribe: {
      const TranscribeResult r = p.transcribe(audio);
      return Json{{"text", r.text}, {"confidence", r.confidence}};
    }
    case Capability::kMos:
      return Json(p.mos(audio));
  }
  return Json();
}

}  // namespace

std::vector<ConformanceCheck> run_conformance(const std::string& cmd,
                                              const ConformanceOptions& options) {
  std::vector<ConformanceCheck> checks;
  const auto record = [&](std::string name, bool passed, std::string detail = {}) {
    checks.push_back({std::move(name), passed, std::move(detail)});
  };

  PluginSpec spec;
  spec.cmd = cmd;
  spec.timeout_s = options.timeout_s;
  spec.handshake_timeout_s = options.timeout_s;
  spec.scratch_dir = options.scratch_dir.empty()
                         ? std::filesystem::temp_directory_path() / "redforge-conformance"
                         : options.scratch_dir;
  std::filesystem::create_directories(spec.scratch_dir);
  const auto fixture_path = spec.scratch_dir / "tone_fixture.wav";
  write_wav(fixture_path, tone_fixture(), SampleFormat::kFloat32);
  const Audio fixture = read_wav(fixture_path);

  std::unique_ptr<PluginProvider> plugin;
  try {
    plugin = std::make_unique<PluginProvider>(spec);
    record("handshake", true, plugin->handshake().to_json().dump());
  } catch (const Error& e) {
    record("handshake", false, e.what());
    return checks;
  }
  const Handshake& hs = plugin->handshake();
  BuiltinProvider builtin;

  for (Capability c : kAllCapabilities) {
    const std::string op = to_string(c);
    if (!hs.has(c)) {
      try {
        plugin->request(op, fixture_path.string());
        record(op + " unsupported_op", false, "undeclared op answered");
      } catch (const CallError& e) {
        record(op + " unsupported_op", e.code() == codes::kUnsupportedOp, e.what());
      } catch (const Error& e) {
        record(op + " unsupported_op", false, e.what());
      }
      continue;
    }
    try {
      const Json first = typed_call(*plugin, c, fixture);
      record(op + " contract", true);
      const Json second = typed_call(*plugin, c, fixture);
      record(op + " determinism", first == second,
             first == second ? "" : "repeated call returned a different result");
      if (options.expect_builtin) {
        const Json expected = typed_call(builtin, c, fixture);
        record(op + " matches builtin", first == expected,
               first == expected ? "" : "result differs from the builtin provider");
      }
    } catch (const Error& e) {
      record(op + " contract", false, e.what());
    }
  }

  const std::string probe_op = to_string(hs.capabilities.front());
  const auto expect_code = [&](const std::string& name, const std::string& code,
                               std::string_view op, const std::string& path,
                               const Json& params) {
    try {
      plugin->request(op, path, params);
      record(name, false, "request succeeded");
    } catch (const CallError& e) {
      record(name, e.code() == code, e.what());
    } catch (const Error& e) {
      record(name, false, e.what());
    }
  };
  expect_code("error unsupported_op", codes::kUnsupportedOp, "no_such_op",
              fixture_path.string(), Json::object());
  expect_code("error bad_audio", codes::kBadAudio, probe_op,
              (spec.scratch_dir / "missing.wav").string(), Json::object());
  Json fault = {{"__fault", "internal"}};
  if (hs.capabilities.front() == Capability::kEnhance) {
    fault["output_path"] = (spec.scratch_dir / "fault_out.wav").string();
  }
  expect_code("error internal", codes::kInternal, probe_op, fixture_path.string(), fault);

  const int restarts_before = plugin->restarts();
  expect_code("death detected", codes::kDied, probe_op, fixture_path.string(),
              Json{{"__fault", "exit"}});
  const bool retried = plugin->restarts() == restarts_before + 1;
  record("death retried once", retried,
         "restarts: " + std::to_string(plugin->restarts() - restarts_before));
  try {
    typed_call(*plugin, hs.capabilities.front(), fixture);
    record("recovery after death", true);
  } catch (const Error& e) {
    record("recovery after death", false, e.what());
  }
  return checks;
}

std::string conformance_transcript(const std::vector<ConformanceCheck>& checks) {
  std::ostringstream out;
  for (const auto& c : checks) out << (c.passed ? "PASS " : "FAIL ") << c.name << '\n';
  return out.str();
}

}  // namespace redforge::bridge
