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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "redforge/corpus.hpp"
#include "redforge/error.hpp"
#include "redforge/wav.hpp"

namespace redforge {
class Subprocess;
}

namespace redforge::bridge {

inline constexpr int kProtocolVersion = 1;
inline constexpr double kHandshakeTimeout = 10.0;
inline constexpr double kDefaultCallTimeout = 60.0;
inline constexpr std::size_t kInlineAudioCap = 10 * 1024 * 1024;

enum class Capability { kEnhance, kVad, kEmbed, kTranscribe, kMos };
inline constexpr int kCapabilityCount = 5;

std::string to_string(Capability c);
std::optional<Capability> parse_capability(std::string_view name);

struct Handshake {
  int protocol_version = kProtocolVersion;
  std::vector<Capability> capabilities;
  std::optional<int> embedding_dim;
  std::optional<double> vad_frame_shift;

  bool has(Capability c) const;
  // Non-empty capabilities, embedding_dim present iff embed is declared.
  // Throws ProtocolError.
  void validate() const;
  OrderedJson to_json() const;
  static Handshake from_json(const Json& j);
};

// Error codes carried in error responses, plus the bridge-side failures
// that end a call without a response.
namespace codes {
inline constexpr const char* kUnsupportedOp = "unsupported_op";
inline constexpr const char* kBadAudio = "bad_audio";
inline constexpr const char* kInternal = "internal";
inline constexpr const char* kTimeout = "timeout";
inline constexpr const char* kDied = "died";
inline constexpr const char* kContract = "contract";
}  // namespace codes

// A single call failed. The stage marks the item failed and carries on.
class CallError : public Error {
 public:
  CallError(std::string code, const std::string& what)
      : Error(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct VadResult {
  double frame_shift = 0.0;
  std::vector<std::uint8_t> decisions;
};

struct TranscribeResult {
  std::string text;
  double confidence = 0.0;
};

// Contract checks applied to every provider result. Throw CallError with
// code "contract".
void check_enhance(const Audio& in, const Audio& out);
void check_vad(const Audio& in, const VadResult& r,
               std::optional<double> declared_shift);
void check_embed(const std::vector<double>& v, std::size_t dim);
void check_transcribe(const TranscribeResult& r);
void check_mos(double mos);

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  virtual const Handshake& handshake() const = 0;

  virtual Audio enhance(const Audio& in) = 0;
  virtual VadResult vad(const Audio& in) = 0;
  virtual std::vector<double> embed(const Audio& in) = 0;
  virtual TranscribeResult transcribe(const Audio& in) = 0;
  virtual double mos(const Audio& in) = 0;
};

// ---------------------------------------------------------------------------
// Built-in deterministic providers

inline constexpr std::size_t kBuiltinMelBands = 40;
inline constexpr std::size_t kBuiltinEmbeddingDim = 2 * kBuiltinMelBands;
inline constexpr double kBuiltinVadShift = 0.025;
inline constexpr const char* kSyntheticTranscript = "<synthetic>";

// SNR proxy in dB, the larger of two noise-floor estimates:
//   temporal: mean 25 ms frame power over the quietest 100 ms stretch;
//   spectral: total averaged-spectrum power over the median bin times the
//   bin count (catches stationary signals with no pauses).
// Capped at 120 dB; digital silence scores 0.
double snr_proxy_db(const Audio& audio);
double temporal_snr_db(const Audio& audio);
double spectral_snr_db(const Audio& audio);
double mos_from_snr(double snr_db);         // 1 + 4 clamp(snr / 40)
double confidence_from_snr(double snr_db);  // clamp((snr - 20) / 15)

// Spectral-floor gate: STFT (512, hop 256, sqrt-Hann); the per-bin floor
// is the mean power over the quietest 10% of frames, and bins below four
// times the floor are scaled by kGateAttenuation. Output length equals
// input length; silence stays silence.
inline constexpr double kGateAttenuation = 0.25;
Audio spectral_gate(const Audio& in);

// Unit-normalized [mean of log-mel bands (centered across bands), std of
// log-mel bands], 25 ms frames every 10 ms, pooled over frames within 30 dB
// of the loudest frame.
std::vector<double> logmel_embedding(const Audio& in);

class BuiltinProvider final : public Provider {
 public:
  BuiltinProvider();
  std::string name() const override { return "builtin"; }
  const Handshake& handshake() const override { return handshake_; }
  Audio enhance(const Audio& in) override;
  VadResult vad(const Audio& in) override;
  std::vector<double> embed(const Audio& in) override;
  TranscribeResult transcribe(const Audio& in) override;
  double mos(const Audio& in) override;

  double vad_threshold_db = 12.0;

 private:
  Handshake handshake_;
};

// ---------------------------------------------------------------------------
// Subprocess plugins

struct PluginSpec {
  std::string cmd;
  double timeout_s = kDefaultCallTimeout;
  double handshake_timeout_s = kHandshakeTimeout;
  // Directory for the temporary WAV files exchanged with the plugin.
  std::filesystem::path scratch_dir;
  // Send audio inline as base64 WAV bytes instead of by path (up to
  // kInlineAudioCap bytes; larger payloads fall back to a path).
  bool inline_audio = false;
};

// One plugin process. Requests are strictly sequential. A process that dies
// mid-call is restarted and the request retried once; a second death, a
// timeout, or an error response fails the call with CallError. Malformed
// handshakes or responses throw ProtocolError.
class PluginProvider final : public Provider {
 public:
  explicit PluginProvider(PluginSpec spec);
  ~PluginProvider() override;

  std::string name() const override { return spec_.cmd; }
  const Handshake& handshake() const override { return handshake_; }

  Audio enhance(const Audio& in) override;
  VadResult vad(const Audio& in) override;
  std::vector<double> embed(const Audio& in) override;
  TranscribeResult transcribe(const Audio& in) override;
  double mos(const Audio& in) override;

  // Sends one raw request and returns the "result" object. audio_path may be
  // empty when params carry everything the op needs.
  Json request(std::string_view op, const std::string& audio_path,
               const Json& params = Json::object());
  Json request_audio(std::string_view op, const Audio& audio,
                     const Json& params = Json::object());

  int restarts() const { return restarts_; }
  std::string stderr_text() const;
  // Kills the current process; the next request restarts it.
  void kill_process();

 private:
  void start();
  Json exchange(const Json& req);
  std::filesystem::path scratch_path(std::string_view tag);

  PluginSpec spec_;
  Handshake handshake_;
  std::unique_ptr<Subprocess> proc_;
  std::int64_t next_id_ = 1;
  std::uint64_t scratch_counter_ = 0;
  int restarts_ = 0;
};

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

// ---------------------------------------------------------------------------
// Serving side

struct ServeOptions {
  // Capabilities to declare; all of the provider's when empty.
  std::vector<Capability> capabilities;
};

// Answers protocol v1 requests from `in` on `out` until end of input.
// Requests carrying params {"__fault": "internal"} are answered with an
// internal error; {"__fault": "exit"} terminates the server without a
// response. Returns the number of requests answered.
std::size_t serve(Provider& provider, std::istream& in, std::ostream& out,
                  const ServeOptions& options = {});

// Handles one request line; nullopt when the request asks the server to exit.
std::optional<std::string> handle_request(Provider& provider,
                                          const Handshake& declared,
                                          const std::string& line);

// ---------------------------------------------------------------------------
// Conformance

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ConformanceOptions {
  double timeout_s = 10.0;
  std::filesystem::path scratch_dir;
  // Compare every result to the builtin provider's (for plugins that wrap
  // the builtin implementations).
  bool expect_builtin = false;
};

// Runs the protocol suite against a plugin command: handshake, every
// declared op on a tone fixture with its contract, determinism, each error
// code, and recovery from a mid-call death.
std::vector<ConformanceCheck> run_conformance(const std::string& cmd,
                                              const ConformanceOptions& options);

// One "<PASS|FAIL> <name>" line per check (the golden transcript shape).
std::string conformance_transcript(const std::vector<ConformanceCheck>& checks);

}  // namespace redforge::bridge
