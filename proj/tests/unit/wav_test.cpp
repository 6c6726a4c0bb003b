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

#include "redforge/dsp.hpp"
#include "redforge/error.hpp"
#include "redforge/wav.hpp"
#include "test_util.hpp"

namespace redforge {
namespace {

using test::TempDir;

TEST(Wav, RoundTripEachFormat) {
  TempDir dir;
  const Audio a{22050, test::tone(440.0, 0.2, 22050, 0.8)};
  const std::pair<SampleFormat, double> cases[] = {
      {SampleFormat::kPcm16, 0.5 / 32768.0},
      {SampleFormat::kPcm24, 0.5 / 8388608.0},
      {SampleFormat::kFloat32, 1e-7},
  };
  for (const auto& [fmt, tol] : cases) {
    const auto p = dir / "x.wav";
    write_wav(p, a, fmt);
    const WavInfo info = read_wav_info(p);
    EXPECT_EQ(info.sample_rate, 22050);
    EXPECT_EQ(info.channels, 1);
    EXPECT_EQ(info.num_frames, a.samples.size());
    EXPECT_EQ(info.format, fmt);
    const Audio b = read_wav(p);
    ASSERT_EQ(b.samples.size(), a.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_NEAR(b.samples[i], a.samples[i], tol);
  }
}

TEST(Wav, InMemoryMatchesFile) {
  TempDir dir;
  const Audio a{16000, test::noise(1000, 0.1, 2)};
  write_wav(dir / "a.wav", a, SampleFormat::kFloat32);
  std::ifstream f(dir / "a.wav", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  EXPECT_EQ(bytes, encode_wav(a, SampleFormat::kFloat32));
  EXPECT_EQ(decode_wav(bytes), read_wav(dir / "a.wav"));
}

TEST(Wav, StereoIsDownmixed) {
  TempDir dir;
  // 16-bit stereo: left 0.5, right -0.25 at every frame.
  const std::int16_t l = 16384, r = -8192;
  const std::uint32_t frames = 10, data = frames * 4;
  std::ofstream f(dir / "s.wav", std::ios::binary);
  const auto u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  const auto u16 = [&](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
  f.write("RIFF", 4);
  u32(36 + data);
  f.write("WAVEfmt ", 8);
  u32(16);
  u16(1);
  u16(2);
  u32(8000);
  u32(8000 * 4);
  u16(4);
  u16(16);
  f.write("data", 4);
  u32(data);
  for (std::uint32_t i = 0; i < frames; ++i) {
    f.write(reinterpret_cast<const char*>(&l), 2);
    f.write(reinterpret_cast<const char*>(&r), 2);
  }
  f.close();
  EXPECT_EQ(read_wav_info(dir / "s.wav").channels, 2);
  const Audio a = read_wav(dir / "s.wav");
  ASSERT_EQ(a.samples.size(), frames);
  EXPECT_NEAR(a.samples[3], (16384.0 - 8192.0) / 2.0 / 32768.0, 1e-4);
}

TEST(Wav, RejectsGarbage) {
  TempDir dir;
  std::ofstream(dir / "g.wav") << "definitely not a wav file";
  EXPECT_THROW(read_wav(dir / "g.wav"), Error);
  EXPECT_THROW(read_wav(dir / "missing.wav"), Error);
  EXPECT_THROW(decode_wav("RIFF"), Error);
}

TEST(Resample, KeepsDurationAndPitch) {
  const Audio a{48000, test::tone(1000.0, 1.0, 48000)};
  const Audio b = resample(a, 16000);
  EXPECT_EQ(b.sample_rate, 16000);
  EXPECT_NEAR(static_cast<double>(b.samples.size()), 16000.0, 1.0);
  const auto ps = dsp::welch_spectrum(b.samples, 16000);
  std::size_t peak = 0;
  for (std::size_t k = 0; k < ps.bins.size(); ++k) {
    if (ps.bins[k] > ps.bins[peak]) peak = k;
  }
  EXPECT_NEAR(ps.frequency(peak), 1000.0, ps.bin_hz);
  EXPECT_EQ(resample(b, 16000), b);
}

TEST(Resample, RemovesContentAboveNewNyquist) {
  const Audio a{48000, test::tone(12000.0, 0.5, 48000)};
  const Audio b = resample(a, 16000);
  EXPECT_LT(dsp::rms(b.samples), 0.01);
}

TEST(Slice, ClampsToSignal) {
  const Audio a{1000, std::vector<double>(1000, 1.0)};
  EXPECT_EQ(slice(a, 0.25, 0.5).samples.size(), 250u);
  EXPECT_EQ(slice(a, -1.0, 0.1).samples.size(), 100u);
  EXPECT_EQ(slice(a, 0.9, 5.0).samples.size(), 100u);
  EXPECT_TRUE(slice(a, 2.0, 3.0).samples.empty());
}

}  // namespace
}  // namespace redforge
