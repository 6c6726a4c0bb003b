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

#include "redforge/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <numbers>
#include <string>

#include "redforge/error.hpp"

namespace redforge {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

struct Parsed {
  WavInfo info;
  std::vector<unsigned char> data;
  int bits = 0;
};

Parsed parse(std::istream& in, const std::string& name, bool want_data) {
  const auto fail = [&](const std::string& what) -> Error {
    return Error(name + ": " + what);
  };
  unsigned char hdr[12];
  if (!in.read(reinterpret_cast<char*>(hdr), 12) ||
      std::memcmp(hdr, "RIFF", 4) != 0 || std::memcmp(hdr + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  Parsed p;
  bool have_fmt = false;
  bool have_data = false;
  std::uint16_t tag = 0;
  int block_align = 0;
  while (!have_data) {
    unsigned char ch[8];
    if (!in.read(reinterpret_cast<char*>(ch), 8)) break;
    const std::uint32_t size = le32(ch + 4);
    if (std::memcmp(ch, "fmt ", 4) == 0) {
      std::vector<unsigned char> fmt(size);
      if (size < 16 || !in.read(reinterpret_cast<char*>(fmt.data()), size)) {
        throw fail("truncated fmt chunk");
      }
      tag = le16(fmt.data());
      p.info.channels = le16(fmt.data() + 2);
      p.info.sample_rate = static_cast<int>(le32(fmt.data() + 4));
      block_align = le16(fmt.data() + 12);
      p.bits = le16(fmt.data() + 14);
      if (tag == kFormatExtensible && size >= 26) tag = le16(fmt.data() + 24);
      have_fmt = true;
    } else if (std::memcmp(ch, "data", 4) == 0) {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      if (block_align <= 0) throw fail("invalid block alignment");
      p.info.num_frames = size / static_cast<std::uint32_t>(block_align);
      if (want_data) {
        p.data.resize(static_cast<std::size_t>(p.info.num_frames) * block_align);
        if (!in.read(reinterpret_cast<char*>(p.data.data()),
                     static_cast<std::streamsize>(p.data.size()))) {
          throw fail("truncated data chunk");
        }
      }
      have_data = true;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
    if (!have_data && (size & 1) && std::memcmp(ch, "fmt ", 4) == 0) {
      in.seekg(1, std::ios::cur);
    }
  }
  if (!have_fmt || !have_data) throw fail("missing fmt or data chunk");
  if (p.info.channels < 1) throw fail("no channels");
  if (p.info.sample_rate <= 0) throw fail("invalid sample rate");
  if (tag == kFormatPcm && p.bits == 16) {
    p.info.format = SampleFormat::kPcm16;
  } else if (tag == kFormatPcm && p.bits == 24) {
    p.info.format = SampleFormat::kPcm24;
  } else if (tag == kFormatFloat && p.bits == 32) {
    p.info.format = SampleFormat::kFloat32;
  } else {
    throw fail("unsupported sample format (tag " + std::to_string(tag) + ", " +
               std::to_string(p.bits) + " bits)");
  }
  if (block_align != p.info.channels * p.bits / 8) {
    throw fail("block alignment does not match channels and sample size");
  }
  return p;
}


Parsed parse_file(const std::filesystem::path& path, bool want_data) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open audio file " + path.string());
  return parse(in, path.string(), want_data);
}

Audio to_audio(const Parsed& p) {
  const int channels = p.info.channels;
  const int bytes = p.bits / 8;
  Audio audio;
  audio.sample_rate = p.info.sample_rate;
  audio.samples.resize(p.info.num_frames);
  const unsigned char* d = p.data.data();
  for (std::uint64_t f = 0; f < p.info.num_frames; ++f) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* s = d + (f * channels + c) * bytes;
      switch (p.info.format) {
        case SampleFormat::kPcm16:
          acc += static_cast<std::int16_t>(le16(s)) / 32768.0;
          break;
        case SampleFormat::kPcm24: {
          std::int32_t v = s[0] | (s[1] << 8) | (s[2] << 16);
          if (v & 0x800000) v -= 0x1000000;
          acc += v / 8388608.0;
          break;
        }
        case SampleFormat::kFloat32: {
          std::uint32_t bits = le32(s);
          float v;
          std::memcpy(&v, &bits, 4);
          acc += v;
          break;
        }
      }
    }
    audio.samples[f] = acc / channels;
  }
  return audio;
}

}  // namespace

WavInfo read_wav_info(const std::filesystem::path& path) {
  return parse_file(path, false).info;
}

Audio read_wav(const std::filesystem::path& path) {
  return to_audio(parse_file(path, true));
}

Audio decode_wav(std::string_view bytes) {
  std::istringstream in{std::string(bytes)};
  return to_audio(parse(in, "<memory>", true));
}

std::string encode_wav(const Audio& audio, SampleFormat format) {
  if (audio.sample_rate <= 0) throw Error("encode_wav: invalid sample rate");
  const int bits = format == SampleFormat::kPcm16 ? 16
                   : format == SampleFormat::kPcm24 ? 24 : 32;
  const int bytes = bits / 8;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(audio.samples.size() * bytes);
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put32(out, 36 + data_size);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, format == SampleFormat::kFloat32 ? kFormatFloat : kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put32(out, static_cast<std::uint32_t>(audio.sample_rate * bytes));
  put16(out, static_cast<std::uint16_t>(bytes));
  put16(out, static_cast<std::uint16_t>(bits));
  out += "data";
  put32(out, data_size);
  for (double x : audio.samples) {
    const double c = std::clamp(x, -1.0, 1.0);
    switch (format) {
      case SampleFormat::kPcm16: {
        const auto v = static_cast<std::int16_t>(std::min(32767L, std::lround(c * 32768.0)));
        put16(out, static_cast<std::uint16_t>(v));
        break;
      }
      case SampleFormat::kPcm24: {
        const auto v = static_cast<std::int32_t>(std::min(8388607L, std::lround(c * 8388608.0)));
        out.push_back(static_cast<char>(v & 0xFF));
        out.push_back(static_cast<char>((v >> 8) & 0xFF));
        out.push_back(static_cast<char>((v >> 16) & 0xFF));
        break;
      }
      case SampleFormat::kFloat32: {
        const float v = static_cast<float>(x);
        std::uint32_t b;
        std::memcpy(&b, &v, 4);
        put32(out, b);
        break;
      }
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Audio& audio,
               SampleFormat format) {
  const std::string out = encode_wav(audio, format);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write audio file " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("write failed: " + path.string());
}

Audio resample(const Audio& audio, int target_rate) {
  if (target_rate <= 0) throw Error("resample: invalid target rate");
  if (audio.sample_rate == target_rate) return audio;
  constexpr int kZeroCrossings = 16;
  const double ratio = static_cast<double>(target_rate) / audio.sample_rate;
  const double cutoff = 0.95 * std::min(1.0, ratio);
  const double half_width = kZeroCrossings / cutoff;
  const auto n_out = static_cast<std::size_t>(
      std::floor(static_cast<double>(audio.samples.size()) * ratio));
  Audio out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  const auto n_in = static_cast<std::int64_t>(audio.samples.size());
  for (std::size_t i = 0; i < n_out; ++i) {
    const double center = static_cast<double>(i) / ratio;
    const auto lo = static_cast<std::int64_t>(std::ceil(center - half_width));
    const auto hi = static_cast<std::int64_t>(std::floor(center + half_width));
    double acc = 0.0;
    for (std::int64_t j = std::max<std::int64_t>(lo, 0);
         j <= std::min(hi, n_in - 1); ++j) {
      const double x = (static_cast<double>(j) - center) * cutoff;
      const double sinc =
          x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double w =
          0.5 + 0.5 * std::cos(std::numbers::pi * x / kZeroCrossings);
      acc += audio.samples[static_cast<std::size_t>(j)] * sinc * w;
    }
    out.samples[i] = acc * cutoff;
  }
  return out;
}

Audio slice(const Audio& audio, double start, double end) {
  Audio out;
  out.sample_rate = audio.sample_rate;
  const auto n = static_cast<std::int64_t>(audio.samples.size());
  const auto a = std::clamp<std::int64_t>(
      std::llround(start * audio.sample_rate), 0, n);
  const auto b = std::clamp<std::int64_t>(
      std::llround(end * audio.sample_rate), a, n);
  out.samples.assign(audio.samples.begin() + a, audio.samples.begin() + b);
  return out;
}

}  // namespace redforge
