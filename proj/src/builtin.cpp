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

#include <algorithm>
#include <cmath>
#include <complex>

#include "redforge/bridge.hpp"
#include "redforge/dsp.hpp"
#include "redforge/segmenter.hpp"

namespace redforge::bridge {

namespace {

constexpr std::size_t kGateFrame = 512;
constexpr std::size_t kGateHop = 256;
constexpr double kGateFloorFactor = 4.0;
constexpr double kMaxSnrDb = 120.0;
constexpr std::size_t kFloorWindowFrames = 4;
// Embedding statistics pool frames within 30 dB of the loudest frame.
constexpr double kActiveFrameRatio = 1e-3;

bool all_zero(const std::vector<double>& x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  const auto idx = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

}  // namespace

double spectral_snr_db(const Audio& audio) {
  if (audio.samples.empty() || all_zero(audio.samples)) return 0.0;
  const auto ps = dsp::welch_spectrum(audio.samples, audio.sample_rate);
  double total = 0.0;
  for (double b : ps.bins) total += b;
  if (!(total > 0.0)) return 0.0;
  const double median = percentile(ps.bins, 0.5);
  const double noise = std::max(median * static_cast<double>(ps.bins.size()),
                                total * std::pow(10.0, -kMaxSnrDb / 10.0));
  return 10.0 * std::log10(total / noise);
}

double temporal_snr_db(const Audio& audio) {
  if (audio.samples.empty() || all_zero(audio.samples)) return 0.0;
  const auto spec = seg::default_vad_frames(audio.sample_rate);
  if (audio.samples.size() < spec.frame_length) return 0.0;
  const Matrix frames = dsp::frame_signal(audio.samples, spec);
  std::vector<double> power(frames.rows());
  double mean = 0.0;
  for (std::size_t f = 0; f < frames.rows(); ++f) {
    const double r = dsp::rms(frames.row(f));
    power[f] = r * r;
    mean += power[f];
  }
  mean /= static_cast<double>(power.size());
  const std::size_t w = std::min(kFloorWindowFrames, power.size());
  double acc = 0.0;
  for (std::size_t f = 0; f < w; ++f) acc += power[f];
  double floor = acc;
  for (std::size_t f = w; f < power.size(); ++f) {
    acc += power[f] - power[f - w];
    floor = std::min(floor, acc);
  }
  floor = std::max(floor / static_cast<double>(w),
                   mean * std::pow(10.0, -kMaxSnrDb / 10.0));
  return 10.0 * std::log10(mean / floor);
}

double snr_proxy_db(const Audio& audio) {
  return std::max(temporal_snr_db(audio), spectral_snr_db(audio));
}

double mos_from_snr(double snr_db) {
  return 1.0 + 4.0 * std::clamp(snr_db / 40.0, 0.0, 1.0);
}

double confidence_from_snr(double snr_db) {
  return std::clamp((snr_db - 20.0) / 15.0, 0.0, 1.0);
}

Audio spectral_gate(const Audio& in) {
  Audio out{in.sample_rate, std::vector<double>(in.samples.size(), 0.0)};
  if (in.samples.empty() || all_zero(in.samples)) return out;

  const std::size_t n = in.samples.size();
  const std::size_t pad = kGateFrame;
  std::size_t padded_len = n + 2 * pad;
  padded_len += (kGateHop - (padded_len - kGateFrame) % kGateHop) % kGateHop;
  std::vector<double> x(padded_len, 0.0);
  std::copy(in.samples.begin(), in.samples.end(), x.begin() + pad);

  const auto hann = dsp::make_window(dsp::Window::kHann, kGateFrame);
  std::vector<double> w(kGateFrame);
  for (std::size_t i = 0; i < kGateFrame; ++i) w[i] = std::sqrt(hann[i]);

  const std::size_t n_frames = (padded_len - kGateFrame) / kGateHop + 1;
  const std::size_t n_bins = kGateFrame / 2 + 1;
  std::vector<std::vector<std::complex<double>>> spec(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    auto& buf = spec[f];
    buf.resize(kGateFrame);
    for (std::size_t i = 0; i < kGateFrame; ++i) buf[i] = x[f * kGateHop + i] * w[i];
    dsp::fft(buf);
  }

  // Noise floor from the quietest tenth of the frames lying entirely
  // inside the signal.
  std::vector<std::size_t> interior;
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t s = f * kGateHop;
    if (s >= pad && s + kGateFrame <= pad + n) interior.push_back(f);
  }
  if (interior.empty()) {
    for (std::size_t f = 0; f < n_frames; ++f) interior.push_back(f);
  }
  std::vector<std::pair<double, std::size_t>> energy;
  energy.reserve(interior.size());
  for (std::size_t f : interior) {
    double e = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k) e += std::norm(spec[f][k]);
    energy.emplace_back(e, f);
  }
  std::sort(energy.begin(), energy.end());
  const std::size_t quiet = std::max<std::size_t>(1, energy.size() / 10);
  std::vector<double> floor(n_bins, 0.0);
  for (std::size_t i = 0; i < quiet; ++i) {
    for (std::size_t k = 0; k < n_bins; ++k) floor[k] += std::norm(spec[energy[i].second][k]);
  }
  for (double& v : floor) v /= static_cast<double>(quiet);

  std::vector<double> y(padded_len, 0.0);
  for (std::size_t f = 0; f < n_frames; ++f) {
    auto& buf = spec[f];
    for (std::size_t k = 0; k < n_bins; ++k) {
      if (std::norm(buf[k]) < kGateFloorFactor * floor[k]) {
        buf[k] *= kGateAttenuation;
        if (k > 0 && k < kGateFrame / 2) buf[kGateFrame - k] *= kGateAttenuation;
      }
    }
    dsp::fft(buf, true);
    for (std::size_t i = 0; i < kGateFrame; ++i) {
      y[f * kGateHop + i] += buf[i].real() / static_cast<double>(kGateFrame) * w[i];
    }
  }
  std::copy(y.begin() + static_cast<std::ptrdiff_t>(pad),
            y.begin() + static_cast<std::ptrdiff_t>(pad + n), out.samples.begin());
  return out;
}

std::vector<double> logmel_embedding(const Audio& in) {
  std::vector<double> out(kBuiltinEmbeddingDim, 0.0);
  const auto spec = dsp::FrameSpec::from_seconds(0.025, 0.010, in.sample_rate,
                                                 dsp::Window::kHann);
  std::vector<double> samples = in.samples;
  if (samples.size() < spec.frame_length) samples.resize(spec.frame_length, 0.0);
  const Matrix mel = dsp::log_compress(
      dsp::mel_spectrogram(samples, spec, kBuiltinMelBands, in.sample_rate));
  const Matrix framed = dsp::frame_signal(samples, spec);
  std::vector<double> power(framed.rows());
  double loudest = 0.0;
  for (std::size_t t = 0; t < framed.rows(); ++t) {
    const double r = dsp::rms(framed.row(t));
    power[t] = r * r;
    loudest = std::max(loudest, power[t]);
  }
  std::vector<std::size_t> active;
  for (std::size_t t = 0; t < power.size() && t < mel.rows(); ++t) {
    if (loudest > 0.0 && power[t] >= loudest * kActiveFrameRatio) active.push_back(t);
  }
  const auto frames = static_cast<double>(active.size());
  for (std::size_t b = 0; b < kBuiltinMelBands && !active.empty(); ++b) {
    double mean = 0.0;
    for (std::size_t t : active) mean += mel(t, b);
    mean /= frames;
    double var = 0.0;
    for (std::size_t t : active) var += (mel(t, b) - mean) * (mel(t, b) - mean);
    out[b] = mean;
    out[kBuiltinMelBands + b] = std::sqrt(var / frames);
  }
  double center = 0.0;
  for (std::size_t b = 0; b < kBuiltinMelBands; ++b) center += out[b];
  center /= static_cast<double>(kBuiltinMelBands);
  for (std::size_t b = 0; b < kBuiltinMelBands; ++b) out[b] -= center;
  double norm = 0.0;
  for (double v : out) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    // Featureless input (digital silence).
    out[0] = 1.0;
    return out;
  }
  for (double& v : out) v /= norm;
  return out;
}

BuiltinProvider::BuiltinProvider() {
  handshake_.capabilities = {Capability::kEnhance, Capability::kVad,
                             Capability::kEmbed, Capability::kTranscribe,
                             Capability::kMos};
  handshake_.embedding_dim = static_cast<int>(kBuiltinEmbeddingDim);
  handshake_.vad_frame_shift = kBuiltinVadShift;
}

Audio BuiltinProvider::enhance(const Audio& in) { return spectral_gate(in); }

VadResult BuiltinProvider::vad(const Audio& in) {
  const auto track = seg::energy_vad(in.samples, in.sample_rate,
                                     seg::default_vad_frames(in.sample_rate),
                                     vad_threshold_db);
  return {track.frame_shift, track.decisions};
}

std::vector<double> BuiltinProvider::embed(const Audio& in) {
  return logmel_embedding(in);
}

TranscribeResult BuiltinProvider::transcribe(const Audio& in) {
  return {kSyntheticTranscript, confidence_from_snr(snr_proxy_db(in))};
}

double BuiltinProvider::mos(const Audio& in) {
  return mos_from_snr(snr_proxy_db(in));
}

}  // namespace redforge::bridge
