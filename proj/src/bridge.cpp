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

#include "redforge/bridge.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "redforge/subprocess.hpp"

namespace redforge::bridge {

namespace {

constexpr std::array<const char*, kCapabilityCount> kCapabilityNames = {
    "enhance", "vad", "embed", "transcribe", "mos"};

std::string tail(const std::string& s, std::size_t n = 2000) {
  std::string t = s.size() <= n ? s : s.substr(s.size() - n);
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
  return t;
}

std::string with_stderr(const std::string& what, const std::string& err) {
  if (err.empty()) return what + " (stderr empty)";
  return what + "; stderr: " + tail(err);
}

[[noreturn]] void contract(const std::string& what) {
  throw CallError(codes::kContract, what);
}

const Json& field(const Json& result, const char* key, std::string_view op) {
  if (!result.is_object() || !result.contains(key)) {
    contract(std::string(op) + " result lacks '" + key + "'");
  }
  return result.at(key);
}

double number_field(const Json& result, const char* key, std::string_view op) {
  const Json& v = field(result, key, op);
  if (!v.is_number()) contract(std::string(op) + " '" + key + "' is not a number");
  return v.get<double>();
}

bool is_known_error_code(const std::string& code) {
  return code == codes::kUnsupportedOp || code == codes::kBadAudio ||
         code == codes::kInternal;
}

}  // namespace

std::string to_string(Capability c) {
  return kCapabilityNames[static_cast<std::size_t>(c)];
}

std::optional<Capability> parse_capability(std::string_view name) {
  for (std::size_t i = 0; i < kCapabilityNames.size(); ++i) {
    if (name == kCapabilityNames[i]) return static_cast<Capability>(i);
  }
  return std::nullopt;
}

bool Handshake::has(Capability c) const {
  return std::find(capabilities.begin(), capabilities.end(), c) !=
         capabilities.end();
}

void Handshake::validate() const {
  if (protocol_version != kProtocolVersion) {
    throw ProtocolError("protocol version mismatch: plugin speaks " +
                        std::to_string(protocol_version) + ", expected " +
                        std::to_string(kProtocolVersion));
  }
  if (capabilities.empty()) throw ProtocolError("handshake declares no capabilities");
  if (has(Capability::kEmbed) != embedding_dim.has_value()) {
    throw ProtocolError("embedding_dim must be present exactly when embed is declared");
  }
  if (embedding_dim && *embedding_dim <= 0) {
    throw ProtocolError("embedding_dim must be positive");
  }
  if (vad_frame_shift && !(*vad_frame_shift > 0.0)) {
    throw ProtocolError("vad_frame_shift must be positive");
  }
}

OrderedJson Handshake::to_json() const {
  OrderedJson j;
  j["protocol_version"] = protocol_version;
  j["capabilities"] = OrderedJson::array();
  for (auto c : capabilities) j["capabilities"].push_back(to_string(c));
  if (embedding_dim) j["embedding_dim"] = *embedding_dim;
  if (vad_frame_shift) j["vad_frame_shift"] = *vad_frame_shift;
  return j;
}

Handshake Handshake::from_json(const Json& j) {
  if (!j.is_object()) throw ProtocolError("handshake is not a JSON object");
  Handshake h;
  if (!j.contains("protocol_version") || !j["protocol_version"].is_number_integer()) {
    throw ProtocolError("handshake lacks an integer protocol_version");
  }
  h.protocol_version = j["protocol_version"].get<int>();
  if (h.protocol_version != kProtocolVersion) {
    throw ProtocolError("protocol version mismatch: plugin speaks " +
                        std::to_string(h.protocol_version) + ", expected " +
                        std::to_string(kProtocolVersion));
  }
  if (!j.contains("capabilities") || !j["capabilities"].is_array()) {
    throw ProtocolError("handshake lacks a capabilities array");
  }
  for (const auto& c : j["capabilities"]) {
    if (!c.is_string()) throw ProtocolError("capability names must be strings");
    const auto cap = parse_capability(c.get<std::string>());
    if (!cap) throw ProtocolError("unknown capability '" + c.get<std::string>() + "'");
    if (!h.has(*cap)) h.capabilities.push_back(*cap);
  }
  if (j.contains("embedding_dim")) {
    if (!j["embedding_dim"].is_number_integer()) {
      throw ProtocolError("embedding_dim must be an integer");
    }
    h.embedding_dim = j["embedding_dim"].get<int>();
  }
  if (j.contains("vad_frame_shift")) {
    if (!j["vad_frame_shift"].is_number()) {
      throw ProtocolError("vad_frame_shift must be a number");
    }
    h.vad_frame_shift = j["vad_frame_shift"].get<double>();
  }
  h.validate();
  return h;
}

void check_enhance(const Audio& in, const Audio& out) {
  if (out.sample_rate != in.sample_rate) {
    contract("enhance changed the sample rate from " +
             std::to_string(in.sample_rate) + " to " +
             std::to_string(out.sample_rate));
  }
  if (out.samples.size() != in.samples.size()) {
    contract("enhance returned " + std::to_string(out.samples.size()) +
             " samples for " + std::to_string(in.samples.size()));
  }
  for (double x : out.samples) {
    if (!std::isfinite(x)) contract("enhance returned non-finite samples");
  }
}

void check_vad(const Audio& in, const VadResult& r,
               std::optional<double> declared_shift) {
  if (!(r.frame_shift > 0.0) || !std::isfinite(r.frame_shift)) {
    contract("vad frame_shift must be positive");
  }
  // Declared shifts are nominal; allow the half-sample rounding of a frame
  // hop at the input's rate.
  const double slack = in.sample_rate > 0 ? 0.5 / in.sample_rate + 1e-12 : 1e-9;
  if (declared_shift && std::abs(r.frame_shift - *declared_shift) > slack) {
    contract("vad frame_shift differs from the declared vad_frame_shift");
  }
  const double expected = in.duration() / r.frame_shift;
  if (std::abs(static_cast<double>(r.decisions.size()) - expected) > 1.0 + 1e-9) {
    contract("vad returned " + std::to_string(r.decisions.size()) +
             " decisions for " + std::to_string(in.duration()) + " s");
  }
  for (auto d : r.decisions) {
    if (d > 1) contract("vad decisions must be boolean");
  }
}

void check_embed(const std::vector<double>& v, std::size_t dim) {
  if (v.size() != dim) {
    contract("embedding has dimension " + std::to_string(v.size()) +
             ", declared " + std::to_string(dim));
  }
  for (double x : v) {
    if (!std::isfinite(x)) contract("embedding is not finite");
  }
}

void check_transcribe(const TranscribeResult& r) {
  if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
    contract("transcribe confidence outside [0, 1]");
  }
}

void check_mos(double mos) {
  if (!(mos >= 1.0 && mos <= 5.0)) contract("mos outside [1, 5]");
}

// ---------------------------------------------------------------------------

std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const auto v = (static_cast<unsigned char>(bytes[i]) << 16) |
                   (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                   static_cast<unsigned char>(bytes[i + 2]);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  if (i < bytes.size()) {
    unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    if (i + 1 < bytes.size()) v |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  const auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw Error("base64 length is not a multiple of 4");
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0 || (v[k] = value(c)) < 0) throw Error("invalid base64 input");
    }
    const unsigned n = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<char>((n >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<char>((n >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<char>(n & 0xFF));
  }
  return out;
}

// ---------------------------------------------------------------------------

PluginProvider::PluginProvider(PluginSpec spec) : spec_(std::move(spec)) {
  if (spec_.cmd.empty()) throw ConfigError("plugin command is empty");
  if (!(spec_.timeout_s > 0.0) || !(spec_.handshake_timeout_s > 0.0)) {
    throw ConfigError("plugin timeouts must be positive");
  }
  if (spec_.scratch_dir.empty()) {
    spec_.scratch_dir = std::filesystem::temp_directory_path() /
                        ("redforge-" + std::to_string(::getpid()));
  }
  std::filesystem::create_directories(spec_.scratch_dir);
  start();
}

PluginProvider::~PluginProvider() = default;

std::string PluginProvider::stderr_text() const {
  return proc_ ? proc_->stderr_text() : std::string();
}

void PluginProvider::kill_process() {
  if (proc_) proc_->kill();
}

void PluginProvider::start() {
  proc_ = std::make_unique<Subprocess>(spec_.cmd);
  const auto r = proc_->read_line(spec_.handshake_timeout_s);
  const auto fail = [&](const std::string& what) {
    proc_->kill();
    const std::string err = proc_->stderr_text();
    proc_.reset();
    throw ProtocolError(with_stderr("plugin '" + spec_.cmd + "': " + what, err));
  };
  if (r.status == Subprocess::ReadStatus::kTimeout) {
    fail("no handshake within " + std::to_string(spec_.handshake_timeout_s) + " s");
  }
  if (r.status == Subprocess::ReadStatus::kClosed) {
    const auto status = proc_->wait(1.0);
    fail("exited before the handshake" +
         (status ? " (" + describe_wait_status(*status) + ")" : std::string()));
  }
  Json j;
  try {
    j = Json::parse(r.line);
  } catch (const Json::exception&) {
    fail("malformed handshake line '" + tail(r.line, 200) + "'");
  }
  try {
    handshake_ = Handshake::from_json(j);
  } catch (const ProtocolError& e) {
    fail(e.what());
  }
}

Json PluginProvider::exchange(const Json& base) {
  for (int attempt = 0;; ++attempt) {
    if (!proc_) start();
    Json req = base;
    const std::int64_t id = next_id_++;
    req["id"] = id;
    Subprocess::ReadResult r;
    if (proc_->write_line(req.dump())) {
      r = proc_->read_line(spec_.timeout_s);
    }
    if (r.status == Subprocess::ReadStatus::kTimeout) {
      proc_->kill();
      proc_.reset();
      throw CallError(codes::kTimeout, "plugin '" + spec_.cmd + "' gave no response to " +
                                           base.value("op", "?") + " within " +
                                           std::to_string(spec_.timeout_s) + " s");
    }
    if (r.status == Subprocess::ReadStatus::kClosed) {
      const auto status = proc_->wait(1.0);
      const std::string err = proc_->stderr_text();
      proc_.reset();
      if (attempt == 0) {
        ++restarts_;
        continue;
      }
      throw CallError(codes::kDied,
                      with_stderr("plugin '" + spec_.cmd + "' exited during " +
                                      base.value("op", "?") + " twice" +
                                      (status ? " (" + describe_wait_status(*status) + ")"
                                              : std::string()),
                                  err));
    }
    Json resp;
    try {
      resp = Json::parse(r.line);
    } catch (const Json::exception&) {
      throw ProtocolError(with_stderr("plugin '" + spec_.cmd + "' sent a malformed line '" +
                                          tail(r.line, 200) + "'",
                                      proc_->stderr_text()));
    }
    if (!resp.is_object() || !resp.contains("id") || resp["id"] != Json(id)) {
      throw ProtocolError("plugin '" + spec_.cmd + "' response does not echo id " +
                          std::to_string(id));
    }
    if (!resp.contains("ok") || !resp["ok"].is_boolean()) {
      throw ProtocolError("plugin '" + spec_.cmd + "' response lacks a boolean 'ok'");
    }
    if (resp["ok"].get<bool>()) {
      if (!resp.contains("result") || !resp["result"].is_object()) {
        throw ProtocolError("plugin '" + spec_.cmd + "' success lacks a result object");
      }
      return resp["result"];
    }
    const Json& err = resp.value("error", Json());
    if (!err.is_object() || !err.contains("code") || !err["code"].is_string()) {
      throw ProtocolError("plugin '" + spec_.cmd + "' error lacks a code");
    }
    const std::string code = err["code"].get<std::string>();
    if (!is_known_error_code(code)) {
      throw ProtocolError("plugin '" + spec_.cmd + "' sent unknown error code '" + code + "'");
    }
    const std::string message =
        err.contains("message") && err["message"].is_string() ? err["message"].get<std::string>()
                                                              : std::string();
    throw CallError(code, message);
  }
}

Json PluginProvider::request(std::string_view op, const std::string& audio_path,
                             const Json& params) {
  Json req;
  req["id"] = 0;
  req["op"] = std::string(op);
  if (!audio_path.empty()) req["audio_path"] = audio_path;
  req["params"] = params;
  return exchange(req);
}

std::filesystem::path PluginProvider::scratch_path(std::string_view tag) {
  return spec_.scratch_dir /
         (std::string(tag) + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) +
          "-" + std::to_string(scratch_counter_++) + ".wav");
}

Json PluginProvider::request_audio(std::string_view op, const Audio& audio,
                                   const Json& params) {
  const std::string bytes = encode_wav(audio, SampleFormat::kFloat32);
  if (spec_.inline_audio && bytes.size() <= kInlineAudioCap) {
    Json req;
    req["id"] = 0;
    req["op"] = std::string(op);
    req["audio_b64"] = base64_encode(bytes);
    req["params"] = params;
    return exchange(req);
  }
  const auto path = scratch_path("in");
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("cannot write scratch audio " + path.string());
  }
  struct Cleanup {
    std::filesystem::path p;
    ~Cleanup() {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
  } cleanup{path};
  return request(op, path.string(), params);
}

namespace {

void require(const Handshake& h, Capability c, const std::string& cmd) {
  if (!h.has(c)) {
    throw CallError(codes::kUnsupportedOp,
                    "plugin '" + cmd + "' does not declare " + to_string(c));
  }
}

}  // namespace

Audio PluginProvider::enhance(const Audio& in) {
  require(handshake_, Capability::kEnhance, spec_.cmd);
  const auto out_path = scratch_path("out");
  Json params;
  params["output_path"] = out_path.string();
  const Json result = request_audio("enhance", in, params);
  const Json& path = field(result, "audio_path", "enhance");
  if (!path.is_string()) contract("enhance audio_path is not a string");
  const Json& count = field(result, "num_samples", "enhance");
  if (!count.is_number_integer()) contract("enhance num_samples is not an integer");
  Audio out;
  try {
    out = read_wav(path.get<std::string>());
  } catch (const Error& e) {
    contract(std::string("enhance output unreadable: ") + e.what());
  }
  std::error_code ec;
  std::filesystem::remove(path.get<std::string>(), ec);
  if (count.get<std::int64_t>() != static_cast<std::int64_t>(out.samples.size())) {
    contract("enhance num_samples does not match the written audio");
  }
  check_enhance(in, out);
  return out;
}

VadResult PluginProvider::vad(const Audio& in) {
  require(handshake_, Capability::kVad, spec_.cmd);
  const Json result = request_audio("vad", in);
  VadResult r;
  r.frame_shift = number_field(result, "frame_shift", "vad");
  const Json& d = field(result, "decisions", "vad");
  if (!d.is_array()) contract("vad decisions is not an array");
  r.decisions.reserve(d.size());
  for (const auto& x : d) {
    if (x.is_boolean()) {
      r.decisions.push_back(x.get<bool>() ? 1 : 0);
    } else if (x.is_number_integer() && (x.get<int>() == 0 || x.get<int>() == 1)) {
      r.decisions.push_back(static_cast<std::uint8_t>(x.get<int>()));
    } else {
      contract("vad decisions must be booleans");
    }
  }
  check_vad(in, r, handshake_.vad_frame_shift);
  return r;
}

std::vector<double> PluginProvider::embed(const Audio& in) {
  require(handshake_, Capability::kEmbed, spec_.cmd);
  const Json result = request_audio("embed", in);
  const Json& e = field(result, "embedding", "embed");
  if (!e.is_array()) contract("embedding is not an array");
  std::vector<double> v;
  v.reserve(e.size());
  for (const auto& x : e) {
    if (!x.is_number()) contract("embedding holds a non-number");
    v.push_back(x.get<double>());
  }
  check_embed(v, static_cast<std::size_t>(*handshake_.embedding_dim));
  return v;
}

TranscribeResult PluginProvider::transcribe(const Audio& in) {
  require(handshake_, Capability::kTranscribe, spec_.cmd);
  const Json result = request_audio("transcribe", in);
  TranscribeResult r;
  const Json& text = field(result, "text", "transcribe");
  if (!text.is_string()) contract("transcribe text is not a string");
  r.text = text.get<std::string>();
  r.confidence = number_field(result, "confidence", "transcribe");
  check_transcribe(r);
  return r;
}

double PluginProvider::mos(const Audio& in) {
  require(handshake_, Capability::kMos, spec_.cmd);
  const Json result = request_audio("mos", in);
  const double m = number_field(result, "mos", "mos");
  check_mos(m);
  return m;
}

}  // namespace redforge::bridge
