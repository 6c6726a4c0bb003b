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

#include <fstream>
#include <sstream>

#include "redforge/bridge.hpp"
#include "redforge/error.hpp"
#include "test_util.hpp"

namespace redforge::bridge {
namespace {

using test::TempDir;

const std::string kFake = REDFORGE_FAKE_PLUGIN;

// Float32-exact so results match after a trip through a WAV file.
Audio tone_audio(double seconds = 1.0) {
  Audio a = test::audio(test::tone(1000.0, seconds, 16000));
  for (double& x : a.samples) x = static_cast<float>(x);
  return a;
}

PluginSpec spec_for(const TempDir& dir, const std::string& flags = "") {
  PluginSpec s;
  s.cmd = kFake + (flags.empty() ? "" : " " + flags);
  s.timeout_s = 5.0;
  s.handshake_timeout_s = 5.0;
  s.scratch_dir = dir.path();
  return s;
}

TEST(Handshake, Validation) {
  Handshake h;
  EXPECT_THROW(h.validate(), ProtocolError);
  h.capabilities = {Capability::kEmbed};
  EXPECT_THROW(h.validate(), ProtocolError);
  h.embedding_dim = 0;
  EXPECT_THROW(h.validate(), ProtocolError);
  h.embedding_dim = 192;
  EXPECT_NO_THROW(h.validate());
  const Handshake back = Handshake::from_json(Json::parse(h.to_json().dump()));
  EXPECT_EQ(back.capabilities, h.capabilities);
  EXPECT_EQ(back.embedding_dim, 192);

  h.capabilities = {Capability::kMos};
  EXPECT_THROW(h.validate(), ProtocolError);
  EXPECT_THROW(Handshake::from_json(Json::parse(R"({"protocol_version":2,"capabilities":["mos"]})")),
               ProtocolError);
  EXPECT_THROW(Handshake::from_json(Json::parse(R"({"protocol_version":1,"capabilities":["sing"]})")),
               ProtocolError);
  EXPECT_THROW(Handshake::from_json(Json::parse(R"([1])")), ProtocolError);
}

TEST(Capability, Names) {
  for (auto c : {Capability::kEnhance, Capability::kVad, Capability::kEmbed, Capability::kTranscribe,
                 Capability::kMos}) {
    EXPECT_EQ(parse_capability(to_string(c)), c);
  }
  EXPECT_FALSE(parse_capability("denoise"));
}

template <typename F>
std::string contract_code(F f) {
  try {
    f();
  } catch (const CallError& e) {
    return e.code();
  }
  return "";
}

TEST(Contracts, RejectMalformedResults) {
  const Audio in = tone_audio();
  Audio out = in;
  EXPECT_NO_THROW(check_enhance(in, out));
  out.sample_rate = 8000;
  EXPECT_EQ(contract_code([&] { check_enhance(in, out); }), codes::kContract);
  out = in;
  out.samples.pop_back();
  EXPECT_EQ(contract_code([&] { check_enhance(in, out); }), codes::kContract);
  out = in;
  out.samples[3] = NAN;
  EXPECT_EQ(contract_code([&] { check_enhance(in, out); }), codes::kContract);

  EXPECT_NO_THROW(check_vad(in, {0.025, std::vector<std::uint8_t>(40, 1)}, 0.025));
  EXPECT_EQ(contract_code([&] { check_vad(in, {0.025, std::vector<std::uint8_t>(40, 2)}, 0.025); }),
            codes::kContract);
  EXPECT_EQ(contract_code([&] { check_vad(in, {0.01, std::vector<std::uint8_t>(100, 1)}, 0.025); }),
            codes::kContract);
  EXPECT_EQ(contract_code([&] { check_vad(in, {0.025, std::vector<std::uint8_t>(400, 1)}, 0.025); }),
            codes::kContract);

  EXPECT_NO_THROW(check_embed(std::vector<double>(4, 0.5), 4));
  EXPECT_EQ(contract_code([&] { check_embed(std::vector<double>(3, 0.5), 4); }), codes::kContract);
  EXPECT_EQ(contract_code([&] { check_embed({0.5, NAN}, 2); }), codes::kContract);

  EXPECT_NO_THROW(check_transcribe({"hi", 1.0}));
  EXPECT_EQ(contract_code([] { check_transcribe({"hi", 1.2}); }), codes::kContract);
  EXPECT_NO_THROW(check_mos(1.0));
  EXPECT_NO_THROW(check_mos(5.0));
  EXPECT_EQ(contract_code([] { check_mos(5.01); }), codes::kContract);
  EXPECT_EQ(contract_code([] { check_mos(NAN); }), codes::kContract);
}

TEST(Builtin, MosPrefersCleanSignal) {
  BuiltinProvider p;
  const Audio clean = tone_audio(2.0);
  Audio noisy = clean;
  const auto n = test::noise(noisy.samples.size(), 0.5 / std::sqrt(2.0), 9);
  for (std::size_t i = 0; i < n.size(); ++i) noisy.samples[i] += n[i];
  EXPECT_GE(p.mos(clean), p.mos(noisy));
  EXPECT_GT(p.mos(clean), 4.5);
  EXPECT_LT(p.mos(noisy), 2.0);
  EXPECT_DOUBLE_EQ(mos_from_snr(0.0), 1.0);
  EXPECT_DOUBLE_EQ(mos_from_snr(20.0), 3.0);
  EXPECT_DOUBLE_EQ(mos_from_snr(80.0), 5.0);
  EXPECT_DOUBLE_EQ(confidence_from_snr(27.5), 0.5);
  EXPECT_EQ(snr_proxy_db(test::audio(std::vector<double>(16000, 0.0))), 0.0);
}

TEST(Builtin, TranscribeStubAndEmbedding) {
  BuiltinProvider p;
  const Audio a = tone_audio(2.0);
  const auto t = p.transcribe(a);
  EXPECT_EQ(t.text, kSyntheticTranscript);
  EXPECT_NO_THROW(check_transcribe(t));

  const auto e = p.embed(a);
  ASSERT_EQ(e.size(), kBuiltinEmbeddingDim);
  double norm = 0.0;
  for (double v : e) norm += v * v;
  EXPECT_NEAR(norm, 1.0, 1e-9);
  const auto other = p.embed(test::audio(test::tone(3000.0, 2.0, 16000)));
  double dot = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) dot += e[i] * other[i];
  EXPECT_LT(dot, 0.99);
  EXPECT_EQ(p.embed(a), e);
  const auto silent = p.embed(test::audio(std::vector<double>(8000, 0.0)));
  EXPECT_NO_THROW(check_embed(silent, kBuiltinEmbeddingDim));
}

TEST(Builtin, GateKeepsLengthAndSilence) {
  const Audio silence = test::audio(std::vector<double>(10000, 0.0));
  EXPECT_EQ(spectral_gate(silence).samples, silence.samples);
  std::vector<double> x(8000, 0.0);
  const auto t = test::tone(1000.0, 1.0, 16000);
  x.insert(x.end(), t.begin(), t.end());
  const auto n = test::noise(x.size(), 0.01, 3);
  for (std::size_t i = 0; i < n.size(); ++i) x[i] += n[i];
  const Audio a = test::audio(x);
  const Audio g = spectral_gate(a);
  EXPECT_EQ(g.samples.size(), a.samples.size());
  EXPECT_EQ(g.sample_rate, a.sample_rate);
  double before = 0.0, after = 0.0;
  for (std::size_t i = 1000; i < 7000; ++i) {
    before += a.samples[i] * a.samples[i];
    after += g.samples[i] * g.samples[i];
  }
  EXPECT_LT(after, 0.25 * before);
}

TEST(Builtin, VadFindsTone) {
  BuiltinProvider p;
  std::vector<double> x(16000, 0.0);
  const auto t = test::tone(500.0, 1.0, 16000);
  x.insert(x.end(), t.begin(), t.end());
  const auto r = p.vad(test::audio(x));
  EXPECT_DOUBLE_EQ(r.frame_shift, kBuiltinVadShift);
  ASSERT_EQ(r.decisions.size(), 80u);
  EXPECT_EQ(r.decisions[10], 0);
  EXPECT_EQ(r.decisions[60], 1);
}

TEST(Base64, KnownVectorsAndRoundTrip) {
  EXPECT_EQ(base64_encode(""), "");
  EXPECT_EQ(base64_encode("f"), "Zg==");
  EXPECT_EQ(base64_encode("fo"), "Zm8=");
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(base64_decode("Zm9vYg=="), "foob");
  std::string bytes;
  for (int i = 0; i < 1000; ++i) bytes.push_back(static_cast<char>(i * 37));
  EXPECT_EQ(base64_decode(base64_encode(bytes)), bytes);
  EXPECT_THROW(base64_decode("Zm9*"), Error);
}

TEST(Serve, InProcessTranscript) {
  BuiltinProvider p;
  TempDir dir;
  write_wav(dir / "t.wav", tone_audio(), SampleFormat::kFloat32);
  std::stringstream in, out;
  in << R"({"id":1,"op":"mos","audio_path":")" << (dir / "t.wav").string() << "\"}\n"
     << R"({"id":2,"op":"sing","audio_path":"x"})" << "\n"
     << R"({"id":3,"op":"mos","audio_path":"/nonexistent.wav"})" << "\n"
     << R"({"id":4,"op":"mos","params":{"__fault":"internal"}})" << "\n"
     << R"({"id":5,"op":"mos","params":{"__fault":"exit"}})" << "\n"
     << R"({"id":6,"op":"mos"})" << "\n";
  EXPECT_EQ(serve(p, in, out), 4u);
  std::vector<Json> lines;
  std::string line;
  while (std::getline(out, line)) lines.push_back(Json::parse(line));
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0]["protocol_version"], 1);
  EXPECT_TRUE(lines[1]["ok"].get<bool>());
  EXPECT_DOUBLE_EQ(lines[1]["result"]["mos"].get<double>(), p.mos(tone_audio()));
  EXPECT_EQ(lines[2]["error"]["code"], codes::kUnsupportedOp);
  EXPECT_EQ(lines[3]["error"]["code"], codes::kBadAudio);
  EXPECT_EQ(lines[4]["error"]["code"], codes::kInternal);
}

TEST(Plugin, OpsMatchBuiltin) {
  TempDir dir;
  PluginProvider plugin(spec_for(dir));
  BuiltinProvider builtin;
  const Audio a = tone_audio(2.0);
  EXPECT_EQ(plugin.handshake().embedding_dim, static_cast<int>(kBuiltinEmbeddingDim));
  EXPECT_DOUBLE_EQ(plugin.mos(a), builtin.mos(a));
  const auto e = plugin.embed(a);
  const auto eb = builtin.embed(a);
  ASSERT_EQ(e.size(), eb.size());
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_DOUBLE_EQ(e[i], eb[i]);
  EXPECT_EQ(plugin.transcribe(a).text, kSyntheticTranscript);
  EXPECT_EQ(plugin.vad(a).decisions, builtin.vad(a).decisions);
  const Audio g = plugin.enhance(a);
  const Audio gb = builtin.enhance(a);
  ASSERT_EQ(g.samples.size(), gb.samples.size());
  for (std::size_t i = 0; i < g.samples.size(); ++i) {
    EXPECT_EQ(g.samples[i], static_cast<double>(static_cast<float>(gb.samples[i])));
  }
  EXPECT_EQ(plugin.restarts(), 0);
  EXPECT_NE(plugin.stderr_text().find("fake_plugin starting"), std::string::npos);
}

TEST(Plugin, InlineAudio) {
  TempDir dir;
  PluginSpec s = spec_for(dir);
  s.inline_audio = true;
  PluginProvider plugin(s);
  const Audio a = tone_audio();
  EXPECT_DOUBLE_EQ(plugin.mos(a), BuiltinProvider().mos(a));
}

TEST(Plugin, ErrorCodes) {
  TempDir dir;
  PluginProvider plugin(spec_for(dir, "--caps mos"));
  const auto code_of = [&](auto f) {
    try {
      f();
    } catch (const CallError& e) {
      return e.code();
    }
    return std::string();
  };
  EXPECT_EQ(code_of([&] { plugin.embed(tone_audio()); }), codes::kUnsupportedOp);
  EXPECT_EQ(code_of([&] { plugin.request("mos", "/nonexistent.wav"); }), codes::kBadAudio);
  EXPECT_EQ(code_of([&] { plugin.request_audio("mos", tone_audio(), {{"__fault", "internal"}}); }),
            codes::kInternal);
  EXPECT_NO_THROW(plugin.mos(tone_audio()));
}

TEST(Plugin, BadHandshakes) {
  TempDir dir;
  EXPECT_THROW(PluginProvider(spec_for(dir, "--empty-caps")), ProtocolError);
  EXPECT_THROW(PluginProvider(spec_for(dir, "--garbage")), ProtocolError);
  EXPECT_THROW(PluginProvider(spec_for(dir, "--version 2")), ProtocolError);
  PluginSpec silent = spec_for(dir, "--no-handshake");
  silent.handshake_timeout_s = 0.5;
  EXPECT_THROW(PluginProvider{silent}, ProtocolError);
  PluginSpec missing = spec_for(dir);
  missing.cmd = (dir / "no-such-plugin").string();
  EXPECT_THROW(PluginProvider{missing}, ProtocolError);
}

TEST(Plugin, ContractViolations) {
  TempDir dir;
  PluginProvider dim(spec_for(dir, "--wrong-dim"));
  EXPECT_EQ(contract_code([&] { dim.embed(tone_audio()); }), codes::kContract);
  PluginProvider mos(spec_for(dir, "--mos-out-of-range"));
  EXPECT_EQ(contract_code([&] { mos.mos(tone_audio()); }), codes::kContract);
}

TEST(Plugin, TimeoutAndRestart) {
  TempDir dir;
  PluginSpec hang = spec_for(dir, "--hang");
  hang.timeout_s = 0.3;
  PluginProvider h(hang);
  EXPECT_EQ(contract_code([&] { h.mos(tone_audio()); }), codes::kTimeout);

  PluginProvider once(spec_for(dir, "--die-once " + (dir / "marker").string()));
  EXPECT_NO_THROW(once.mos(tone_audio()));
  EXPECT_EQ(once.restarts(), 1);

  PluginProvider always(spec_for(dir, "--die-on-request 1"));
  EXPECT_EQ(contract_code([&] { always.mos(tone_audio()); }), codes::kDied);

  PluginProvider killed(spec_for(dir));
  killed.kill_process();
  EXPECT_NO_THROW(killed.mos(tone_audio()));
}

std::string read_file(const std::string& p) {
  std::ifstream f(p);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

TEST(Conformance, FakePluginMatchesGolden) {
  TempDir dir;
  ConformanceOptions o;
  o.scratch_dir = dir.path();
  o.timeout_s = 5.0;
  EXPECT_EQ(conformance_transcript(run_conformance(kFake, o)),
            read_file(std::string(REDFORGE_GOLDEN_DIR) + "/conformance_all.txt"));
  EXPECT_EQ(conformance_transcript(run_conformance(kFake + " --caps mos,embed,transcribe", o)),
            read_file(std::string(REDFORGE_GOLDEN_DIR) + "/conformance_reference.txt"));
  o.expect_builtin = true;
  for (const auto& c : run_conformance(kFake, o)) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

TEST(Conformance, BrokenPluginsFail) {
  TempDir dir;
  ConformanceOptions o;
  o.scratch_dir = dir.path();
  o.timeout_s = 2.0;
  const auto garbage = run_conformance(kFake + " --garbage", o);
  ASSERT_EQ(garbage.size(), 1u);
  EXPECT_FALSE(garbage[0].passed);
  bool any_failed = false;
  for (const auto& c : run_conformance(kFake + " --mos-out-of-range", o)) any_failed |= !c.passed;
  EXPECT_TRUE(any_failed);
}

}  // namespace
}  // namespace redforge::bridge
