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

#include "redforge/synth.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include "redforge/dsp.hpp"
#include "redforge/error.hpp"
#include "redforge/hash.hpp"

namespace redforge::synth {

namespace {

constexpr double kSpeechRms = 0.1;
constexpr double kCleanSnrDb = 60.0;
constexpr double kNoisySnrDb = 10.0;
constexpr double kModerateSnrDb = 19.0;
constexpr double kLowpassHz = 4000.0;

double envelope(const Voice& v, double f, double lowpass_hz) {
  double a = v.floor;
  for (std::size_t j = 0; j < v.formants.size(); ++j) {
    const double z = (f - v.formants[j]) / v.bandwidths[j];
    a += v.gains[j] * std::exp(-0.5 * z * z);
  }
  if (lowpass_hz > 0.0) {
    const double edge = 200.0;
    if (f >= lowpass_hz) return 0.0;
    if (f > lowpass_hz - edge) {
      a *= 0.5 * (1.0 + std::cos(std::numbers::pi * (f - lowpass_hz + edge) / edge));
    }
  }
  return a;
}

// Zero-phase FIR with the voice's magnitude envelope, by frequency sampling.
std::vector<double> design_kernel(const Voice& v, int sample_rate, double lowpass_hz) {
  std::size_t n = dsp::next_power_of_two(static_cast<std::size_t>(sample_rate / 40));
  std::vector<std::complex<double>> h(n);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n);
    h[k] = envelope(v, f, lowpass_hz);
    if (k > 0 && k < n / 2) h[n - k] = h[k];
  }
  dsp::fft(h, true);
  const auto w = dsp::make_window(dsp::Window::kHann, n);
  std::vector<double> kernel(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t src = (i + n / 2) % n;
    kernel[i] = h[src].real() / static_cast<double>(n) * w[i];
  }
  return kernel;
}

void normalize_rms(std::vector<double>& x, double target) {
  double e = 0.0;
  for (double v : x) e += v * v;
  const double r = std::sqrt(e / static_cast<double>(std::max<std::size_t>(1, x.size())));
  if (r > 0.0) {
    for (double& v : x) v *= target / r;
  }
}

}  // namespace

const std::vector<Voice>& voices() {
  static const std::vector<Voice> kVoices = {
      {105.0, {350.0, 900.0, 2400.0}, {90.0, 140.0, 220.0}, {1.0, 0.5, 0.25}, 0.14},
      {145.0, {700.0, 1250.0, 2900.0}, {110.0, 160.0, 250.0}, {1.0, 0.8, 0.3}, 0.12},
      {210.0, {480.0, 2100.0, 3300.0}, {100.0, 180.0, 260.0}, {0.7, 1.0, 0.45}, 0.13},
      {265.0, {850.0, 1650.0, 3900.0}, {130.0, 170.0, 300.0}, {1.0, 0.45, 0.6}, 0.15},
  };
  return kVoices;
}

std::vector<double> voiced_burst(const Voice& voice, double seconds,
                                 int sample_rate, double lowpass_hz,
                                 std::uint64_t seed) {
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  const auto kernel = design_kernel(voice, sample_rate, lowpass_hz);
  const std::size_t half = kernel.size() / 2;
  std::vector<double> out(n, 0.0);
  const double vib_rate = rng.uniform(0.5, 1.0);
  const double vib_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double syl_rate = rng.uniform(3.0, 5.0);
  const double syl_phase = rng.uniform(0.0, std::numbers::pi);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double f0 = voice.f0 * (1.0 + 0.04 * std::sin(2.0 * std::numbers::pi * vib_rate * t + vib_phase));
    phase += f0 / sample_rate;
    if (phase < 1.0) continue;
    phase -= 1.0;
    const double amp = 1.0 + 0.05 * rng.normal();
    for (std::size_t k = 0; k < kernel.size(); ++k) {
      const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i + k) - static_cast<std::ptrdiff_t>(half);
      if (j >= 0 && j < static_cast<std::ptrdiff_t>(n)) out[static_cast<std::size_t>(j)] += amp * kernel[k];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    out[i] *= 0.3 + 0.7 * std::abs(std::sin(std::numbers::pi * syl_rate * t + syl_phase));
  }
  // Short fades so bursts start and end cleanly.
  const std::size_t fade = std::min<std::size_t>(n / 2, static_cast<std::size_t>(0.01 * sample_rate));
  for (std::size_t i = 0; i < fade; ++i) {
    const double g = static_cast<double>(i) / static_cast<double>(fade);
    out[i] *= g;
    out[n - 1 - i] *= g;
  }
  normalize_rms(out, kSpeechRms);
  return out;
}

OrderedJson to_json(const FileTruth& t) {
  OrderedJson j;
  j["file"] = t.file;
  j["kind"] = t.kind;
  j["sample_rate"] = t.sample_rate;
  j["snr_db"] = t.snr_db;
  j["bursts"] = OrderedJson::array();
  for (const auto& b : t.bursts) {
    j["bursts"].push_back({{"start", b.start}, {"end", b.end}, {"speaker", b.speaker}});
  }
  return j;
}

std::vector<FileTruth> write_corpus(const std::filesystem::path& dir,
                                    const CorpusOptions& options) {
  if (options.file_seconds < 10.0) throw ConfigError("synthetic files must be at least 10 s");
  std::filesystem::create_directories(dir);
  std::vector<FileTruth> truth;
  const auto& vs = voices();
  for (std::size_t i = 0; i < options.n_files; ++i) {
    const std::size_t slot = i % 20;
    FileTruth t;
    int speaker = static_cast<int>(i % vs.size());
    int second_speaker = -1;
    double lowpass = 0.0;
    t.kind = "clean";
    t.snr_db = kCleanSnrDb;
    if (slot >= 10 && slot <= 12) {
      t.kind = "noisy";
      t.snr_db = kNoisySnrDb;
    } else if (slot == 13 || slot == 14) {
      t.kind = "moderate";
      t.snr_db = kModerateSnrDb;
    } else if (slot >= 15 && slot <= 17) {
      t.kind = "lowpass";
      lowpass = kLowpassHz;
    } else if (slot >= 18) {
      t.kind = "two_speaker";
      second_speaker = (speaker + 1) % static_cast<int>(vs.size());
    }
    t.sample_rate = slot == 9 ? 48000 : slot == 17 ? 44100 : 16000;
    char name[64];
    std::snprintf(name, sizeof name, "synth_%02zu_%s.wav", i, t.kind.c_str());
    t.file = name;

    Rng rng(mix_seed(options.seed, t.file));
    const int sr = t.sample_rate;
    const auto total = static_cast<std::size_t>(std::llround(options.file_seconds * sr));
    std::vector<double> signal(total, 0.0);
    const auto place = [&](double start, const std::vector<double>& burst) {
      const auto off = static_cast<std::size_t>(std::llround(start * sr));
      for (std::size_t k = 0; k < burst.size() && off + k < total; ++k) signal[off + k] += burst[k];
    };

    double cursor = rng.uniform(0.6, 1.0);
    const double stop = options.file_seconds - 0.8;
    std::size_t n_burst = 0;
    while (true) {
      double len;
      if (n_burst == 1) {
        len = 1.2;  // below the minimum duration
      } else if (slot == 3 && n_burst == 0) {
        len = 22.0;  // above the maximum duration
      } else {
        len = rng.uniform(4.0, 8.0);
      }
      const bool pair = second_speaker >= 0 && n_burst % 2 == 0 && n_burst != 1;
      if (cursor + (pair ? 2.0 : 1.0) * len > stop) {
        if (n_burst > 0) break;
        // Short files still get one burst (or pair).
        len = (stop - cursor) / (pair ? 2.0 : 1.0);
        if (len < 0.5) break;
      }
      const double need = pair ? 2.0 * len : len;
      const std::uint64_t s1 = rng.next_u64();
      place(cursor, voiced_burst(vs[speaker], len, sr, lowpass, s1));
      t.bursts.push_back({cursor, cursor + len, speaker});
      if (pair) {
        const std::uint64_t s2 = rng.next_u64();
        place(cursor + len, voiced_burst(vs[second_speaker], len, sr, lowpass, s2));
        t.bursts.push_back({cursor + len, cursor + 2.0 * len, second_speaker});
      }
      cursor += need + rng.uniform(1.5, 2.5);
      ++n_burst;
    }
    const double noise_rms = kSpeechRms * std::pow(10.0, -t.snr_db / 20.0);
    for (double& x : signal) x += noise_rms * rng.normal();
    write_wav(dir / t.file, Audio{sr, std::move(signal)}, SampleFormat::kPcm16);
    truth.push_back(std::move(t));
  }
  OrderedJson doc = OrderedJson::array();
  for (const auto& t : truth) doc.push_back(to_json(t));
  std::ofstream f(dir / "truth.json");
  f << doc.dump(2) << '\n';
  if (!f) throw Error("cannot write " + (dir / "truth.json").string());
  return truth;
}

}  // namespace redforge::synth
