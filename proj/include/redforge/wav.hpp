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
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace redforge {

// Mono waveform with samples nominally in [-1, 1].
struct Audio {
  int sample_rate = 0;
  std::vector<double> samples;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
  bool operator==(const Audio&) const = default;
};

enum class SampleFormat { kPcm16, kPcm24, kFloat32 };

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  std::uint64_t num_frames = 0;
  SampleFormat format = SampleFormat::kPcm16;
};

// PCM WAV with 16/24-bit integer or 32-bit float samples. Multi-channel
// input is downmixed to mono by averaging. Throws Error on anything else.
WavInfo read_wav_info(const std::filesystem::path& path);
Audio read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Audio& audio,
               SampleFormat format = SampleFormat::kPcm16);
// In-memory counterparts of read_wav / write_wav.
Audio decode_wav(std::string_view bytes);
std::string encode_wav(const Audio& audio,
                       SampleFormat format = SampleFormat::kPcm16);

// Band-limited (windowed-sinc) sample rate conversion.
Audio resample(const Audio& audio, int target_rate);

// Samples [start, end) in seconds, clamped to the signal.
Audio slice(const Audio& audio, double start, double end);

}  // namespace redforge
