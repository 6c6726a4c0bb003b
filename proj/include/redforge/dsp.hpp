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

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "redforge/matrix.hpp"

namespace redforge::dsp {

enum class Window { kHann, kRectangular };

struct FrameSpec {
  std::size_t frame_length = 400;
  std::size_t frame_shift = 400;
  Window window = Window::kRectangular;

  // Throws InvariantError unless 0 < frame_shift <= frame_length.
  void validate() const;
  static FrameSpec from_seconds(double length_s, double shift_s,
                                int sample_rate,
                                Window window = Window::kRectangular);
};

// Periodic window of the given length.
std::vector<double> make_window(Window window, std::size_t length);

std::size_t frame_count(std::size_t num_samples, const FrameSpec& spec);

// One windowed frame per row. Throws InvariantError when the signal is
// shorter than one frame.
Matrix frame_signal(std::span<const double> samples, const FrameSpec& spec);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

// In-place iterative radix-2 FFT; size must be a power of two. The inverse
// is unscaled.
void fft(std::vector<std::complex<double>>& data, bool inverse = false);

// One-sided power spectrum: bins[k] = |X_k|^2 / fft_size for k in
// [0, fft_size/2]. A unit impulse therefore yields a flat spectrum, and
// Parseval holds with interior bins counted twice (see spectrum_energy).
struct PowerSpectrum {
  std::vector<double> bins;
  double bin_hz = 0.0;
  int sample_rate = 0;

  std::size_t fft_size() const { return bins.empty() ? 0 : 2 * (bins.size() - 1); }
  double frequency(std::size_t k) const { return static_cast<double>(k) * bin_hz; }
};

// Frame energy recovered from the one-sided bins.
double spectrum_energy(const PowerSpectrum& ps);

std::vector<PowerSpectrum> power_spectrum(const Matrix& frames,
                                          std::size_t fft_size,
                                          int sample_rate);

PowerSpectrum average_spectrum(std::span<const PowerSpectrum> spectra);

// Mean of hann-windowed per-frame power spectra. Signals shorter than one
// frame are zero-padded into a single frame.
PowerSpectrum welch_spectrum(std::span<const double> samples, int sample_rate,
                             std::size_t fft_size = 1024,
                             std::size_t hop = 256);

// HTK-style triangular mel filters, one per row, over fft_size/2+1 bins.
Matrix mel_filterbank(std::size_t n_mels, std::size_t fft_size,
                      int sample_rate, double fmin_hz = 0.0,
                      double fmax_hz = -1.0);

// Mel band power per frame [frames x n_mels]. FFT size is the next power of
// two at or above the frame length.
Matrix mel_spectrogram(std::span<const double> samples, const FrameSpec& spec,
                       std::size_t n_mels, int sample_rate);

inline constexpr double kLogFloor = 1e-10;
// Natural log with a floor of kLogFloor.
Matrix log_compress(const Matrix& m);

// Center frequency of the lowest bin whose cumulative energy reaches
// energy_fraction of the total. Throws InvariantError on silent input or a
// fraction outside (0, 1].
double rolloff_frequency(const PowerSpectrum& avg_spectrum,
                         double energy_fraction = 0.995);

// Roll-off of a whole signal from its Welch spectrum. The FFT size is the
// power of two at or above 1024 * sample_rate / 16000 (hop a quarter of
// that), so bins stay near 15.6 Hz at any rate. Silence gives 0.
double signal_rolloff(std::span<const double> samples, int sample_rate,
                      double energy_fraction = 0.995);
std::size_t rolloff_fft_size(int sample_rate);

double rms(std::span<const double> samples);

}  // namespace redforge::dsp
