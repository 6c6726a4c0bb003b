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

#include "redforge/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "redforge/error.hpp"

namespace redforge::dsp {

void FrameSpec::validate() const {
  if (frame_shift == 0 || frame_shift > frame_length) {
    throw InvariantError("frame spec requires 0 < frame_shift <= frame_length");
  }
}

FrameSpec FrameSpec::from_seconds(double length_s, double shift_s,
                                  int sample_rate, Window window) {
  FrameSpec spec;
  spec.frame_length =
      static_cast<std::size_t>(std::llround(length_s * sample_rate));
  spec.frame_shift = static_cast<std::size_t>(std::llround(shift_s * sample_rate));
  spec.window = window;
  spec.validate();
  return spec;
}

std::vector<double> make_window(Window window, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (window == Window::kHann) {
    for (std::size_t n = 0; n < length; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
    }
  }
  return w;
}

std::size_t frame_count(std::size_t num_samples, const FrameSpec& spec) {
  if (num_samples < spec.frame_length) return 0;
  return (num_samples - spec.frame_length) / spec.frame_shift + 1;
}

Matrix frame_signal(std::span<const double> samples, const FrameSpec& spec) {
  spec.validate();
  if (samples.size() < spec.frame_length) {
    throw InvariantError("signal of " + std::to_string(samples.size()) +
                         " samples is shorter than one frame (" +
                         std::to_string(spec.frame_length) + ")");
  }
  const std::size_t n = frame_count(samples.size(), spec);
  const auto window = make_window(spec.window, spec.frame_length);
  Matrix frames(n, spec.frame_length);
  for (std::size_t f = 0; f < n; ++f) {
    auto row = frames.row(f);
    const std::size_t offset = f * spec.frame_shift;
    for (std::size_t i = 0; i < spec.frame_length; ++i) {
      row[i] = samples[offset + i] * window[i];
    }
  }
  return frames;
}

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft(std::vector<std::complex<double>>& data, bool inverse) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) {
    throw InvariantError("fft size " + std::to_string(n) +
                         " is not a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      const std::complex<double> w =
          std::polar(1.0, sign * 2.0 * std::numbers::pi * k / len);
      for (std::size_t i = k; i < n; i += len) {
        const std::complex<double> u = data[i];
        const std::complex<double> v = data[i + half] * w;
        data[i] = u + v;
        data[i + half] = u - v;
      }
    }
  }
}

double spectrum_energy(const PowerSpectrum& ps) {
  if (ps.bins.empty()) return 0.0;
  double total = ps.bins.front() + (ps.bins.size() > 1 ? ps.bins.back() : 0.0);
  for (std::size_t k = 1; k + 1 < ps.bins.size(); ++k) total += 2.0 * ps.bins[k];
  return total;
}

std::vector<PowerSpectrum> power_spectrum(const Matrix& frames,
                                          std::size_t fft_size,
                                          int sample_rate) {
  if (!is_power_of_two(fft_size)) {
    throw InvariantError("fft size " + std::to_string(fft_size) +
                         " is not a power of two");
  }
  if (frames.cols() > fft_size) {
    throw InvariantError("fft size smaller than the frame length");
  }
  std::vector<PowerSpectrum> out(frames.rows());
  std::vector<std::complex<double>> buf(fft_size);
  for (std::size_t f = 0; f < frames.rows(); ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    const auto row = frames.row(f);
    std::copy(row.begin(), row.end(), buf.begin());
    fft(buf);
    PowerSpectrum& ps = out[f];
    ps.sample_rate = sample_rate;
    ps.bin_hz = static_cast<double>(sample_rate) / fft_size;
    ps.bins.resize(fft_size / 2 + 1);
    for (std::size_t k = 0; k < ps.bins.size(); ++k) {
      ps.bins[k] = std::norm(buf[k]) / static_cast<double>(fft_size);
    }
  }
  return out;
}

PowerSpectrum average_spectrum(std::span<const PowerSpectrum> spectra) {
  if (spectra.empty()) throw InvariantError("cannot average zero spectra");
  PowerSpectrum avg;
  avg.sample_rate = spectra.front().sample_rate;
  avg.bin_hz = spectra.front().bin_hz;
  avg.bins.assign(spectra.front().bins.size(), 0.0);
  for (const auto& s : spectra) {
    if (s.bins.size() != avg.bins.size()) {
      throw InvariantError("spectra with different sizes");
    }
    for (std::size_t k = 0; k < avg.bins.size(); ++k) avg.bins[k] += s.bins[k];
  }
  for (double& b : avg.bins) b /= static_cast<double>(spectra.size());
  return avg;
}

PowerSpectrum welch_spectrum(std::span<const double> samples, int sample_rate,
                             std::size_t fft_size, std::size_t hop) {
  FrameSpec spec{fft_size, hop, Window::kHann};
  Matrix frames;
  if (samples.size() < fft_size) {
    std::vector<double> padded(fft_size, 0.0);
    std::copy(samples.begin(), samples.end(), padded.begin());
    frames = frame_signal(padded, spec);
  } else {
    frames = frame_signal(samples, spec);
  }
  const auto spectra = power_spectrum(frames, fft_size, sample_rate);
  return average_spectrum(spectra);
}

namespace {
double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}
}  // namespace

Matrix mel_filterbank(std::size_t n_mels, std::size_t fft_size,
                      int sample_rate, double fmin_hz, double fmax_hz) {
  if (n_mels == 0) throw InvariantError("n_mels must be at least 1");
  if (fmax_hz <= 0.0) fmax_hz = sample_rate / 2.0;
  const std::size_t n_bins = fft_size / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  const double mel_lo = hz_to_mel(fmin_hz);
  const double mel_hi = hz_to_mel(fmax_hz);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }
  Matrix fb(n_mels, n_bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      fb(m, k) = w;
    }
  }
  return fb;
}

Matrix mel_spectrogram(std::span<const double> samples, const FrameSpec& spec,
                       std::size_t n_mels, int sample_rate) {
  if (n_mels == 0) throw InvariantError("n_mels must be at least 1");
  if (sample_rate <= 0) throw InvariantError("sample rate must be positive");
  const Matrix frames = frame_signal(samples, spec);
  const std::size_t fft_size = next_power_of_two(spec.frame_length);
  const auto spectra = power_spectrum(frames, fft_size, sample_rate);
  const Matrix fb = mel_filterbank(n_mels, fft_size, sample_rate);
  Matrix mel(spectra.size(), n_mels);
  for (std::size_t f = 0; f < spectra.size(); ++f) {
    for (std::size_t m = 0; m < n_mels; ++m) {
      const auto w = fb.row(m);
      double acc = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * spectra[f].bins[k];
      mel(f, m) = acc;
    }
  }
  return mel;
}

Matrix log_compress(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v = std::log(std::max(v, kLogFloor));
  return out;
}

double rolloff_frequency(const PowerSpectrum& avg_spectrum,
                         double energy_fraction) {
  if (!(energy_fraction > 0.0 && energy_fraction <= 1.0)) {
    throw InvariantError("energy fraction must lie in (0, 1]");
  }
  double total = 0.0;
  for (double b : avg_spectrum.bins) total += b;
  if (!(total > 0.0)) {
    throw InvariantError("roll-off undefined for zero total energy");
  }
  const double target = energy_fraction * total;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < avg_spectrum.bins.size(); ++k) {
    cumulative += avg_spectrum.bins[k];
    if (cumulative >= target) return avg_spectrum.frequency(k);
  }
  // Rounding can leave the running sum a hair below the total.
  return avg_spectrum.frequency(avg_spectrum.bins.size() - 1);
}

std::size_t rolloff_fft_size(int sample_rate) {
  if (sample_rate <= 0) throw InvariantError("sample rate must be positive");
  const auto scaled = static_cast<std::size_t>(std::ceil(1024.0 * sample_rate / 16000.0));
  return next_power_of_two(std::max<std::size_t>(scaled, 16));
}

double signal_rolloff(std::span<const double> samples, int sample_rate,
                      double energy_fraction) {
  const std::size_t fft = rolloff_fft_size(sample_rate);
  const auto ps = welch_spectrum(samples, sample_rate, fft, fft / 4);
  if (!(spectrum_energy(ps) > 0.0)) return 0.0;
  return rolloff_frequency(ps, energy_fraction);
}

double rms(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double x : samples) acc += x * x;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

}  // namespace redforge::dsp
