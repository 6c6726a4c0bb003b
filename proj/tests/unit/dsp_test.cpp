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

#include <complex>

#include "redforge/dsp.hpp"
#include "redforge/error.hpp"
#include "test_util.hpp"

namespace redforge::dsp {
namespace {

using test::noise;
using test::tone;

std::vector<std::complex<double>> brute_dft(const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

TEST(Fft, MatchesBruteForceDft) {
  Rng rng(11);
  for (std::size_t n = 1; n <= 512; n *= 2) {
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {rng.normal(), rng.normal()};
    auto y = x;
    fft(y);
    const auto ref = brute_dft(x);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(y[k].real(), ref[k].real(), 1e-9 * static_cast<double>(n)) << n << " " << k;
      EXPECT_NEAR(y[k].imag(), ref[k].imag(), 1e-9 * static_cast<double>(n)) << n << " " << k;
    }
  }
}

TEST(Fft, InverseIsUnscaled) {
  Rng rng(3);
  std::vector<std::complex<double>> x(64);
  for (auto& v : x) v = {rng.normal(), 0.0};
  auto y = x;
  fft(y);
  fft(y, true);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i].real() / 64.0, x[i].real(), 1e-12);
}

TEST(Fft, RejectsNonPowerOfTwo) {
  std::vector<std::complex<double>> x(12);
  EXPECT_THROW(fft(x), InvariantError);
}

TEST(Framing, FrameCountExamples) {
  EXPECT_EQ(frame_count(1024, {1024, 256}), 1u);
  EXPECT_EQ(frame_count(2048, {1024, 512}), 3u);
  const std::vector<double> shortsig(100, 0.0);
  EXPECT_THROW(frame_signal(shortsig, {1024, 256}), InvariantError);
}

TEST(Framing, FramesAreWindowedCopies) {
  const auto x = noise(3000, 1.0, 5);
  const FrameSpec spec{512, 128, Window::kHann};
  const Matrix frames = frame_signal(x, spec);
  const auto w = make_window(Window::kHann, 512);
  ASSERT_EQ(frames.rows(), (3000 - 512) / 128 + 1);
  for (std::size_t f = 0; f < frames.rows(); f += 7) {
    for (std::size_t i = 0; i < 512; ++i) EXPECT_DOUBLE_EQ(frames(f, i), x[f * 128 + i] * w[i]);
  }
}

TEST(Framing, InvalidSpec) {
  EXPECT_THROW((FrameSpec{256, 0}.validate()), InvariantError);
  EXPECT_THROW((FrameSpec{256, 512}.validate()), InvariantError);
  EXPECT_EQ(FrameSpec::from_seconds(0.025, 0.025, 16000).frame_shift, 400u);
}

TEST(PowerSpectrum, ParsevalRectangular) {
  const auto x = noise(1024, 0.3, 9);
  Matrix frames(1, 1024, x);
  const auto ps = power_spectrum(frames, 1024, 16000);
  double energy = 0.0;
  for (double v : x) energy += v * v;
  EXPECT_NEAR(spectrum_energy(ps[0]), energy, 1e-6 * energy);
  EXPECT_EQ(ps[0].bins.size(), 513u);
  EXPECT_DOUBLE_EQ(ps[0].bin_hz, 15.625);
}

TEST(PowerSpectrum, ImpulseIsFlatAndZeroIsZero) {
  Matrix impulse(1, 256, 0.0);
  impulse(0, 0) = 1.0;
  const auto ps = power_spectrum(impulse, 256, 8000)[0];
  for (double b : ps.bins) EXPECT_NEAR(b, ps.bins[0], 1e-9);
  const auto zero = power_spectrum(Matrix(1, 256, 0.0), 256, 8000)[0];
  for (double b : zero.bins) EXPECT_EQ(b, 0.0);
}

TEST(PowerSpectrum, ToneConcentratesInItsBin) {
  const auto x = tone(1000.0, 1024.0 / 16000.0, 16000);
  const Matrix frames = frame_signal(x, {1024, 1024, Window::kHann});
  const auto ps = power_spectrum(frames, 1024, 16000)[0];
  std::size_t peak = 0;
  for (std::size_t k = 0; k < ps.bins.size(); ++k) {
    if (ps.bins[k] > ps.bins[peak]) peak = k;
  }
  EXPECT_EQ(peak, 64u);
  double near = 0.0;
  for (std::size_t k = 63; k <= 65; ++k) near += ps.bins[k];
  double total = 0.0;
  for (double b : ps.bins) total += b;
  EXPECT_GT(near / total, 0.999);
}

TEST(PowerSpectrum, ScalesWithAmplitudeSquared) {
  const auto x = noise(4096, 0.2, 17);
  std::vector<double> y = x;
  for (double& v : y) v *= 3.0;
  const auto a = welch_spectrum(x, 16000);
  const auto b = welch_spectrum(y, 16000);
  for (std::size_t k = 0; k < a.bins.size(); ++k) EXPECT_NEAR(b.bins[k], 9.0 * a.bins[k], 1e-6 * b.bins[k] + 1e-18);
}

TEST(PowerSpectrum, RejectsBadFftSize) {
  EXPECT_THROW(power_spectrum(Matrix(1, 256, 0.0), 300, 16000), InvariantError);
  EXPECT_THROW(power_spectrum(Matrix(1, 256, 0.0), 128, 16000), InvariantError);
}

TEST(Rolloff, MatchesLinearScanOnRandomSpectra) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    PowerSpectrum ps;
    ps.bins.resize(1 + (rng.below(200) + 1));
    ps.sample_rate = 16000;
    ps.bin_hz = 16000.0 / static_cast<double>(ps.fft_size());
    for (double& b : ps.bins) b = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    ps.bins[rng.below(ps.bins.size())] += 0.1;
    const double frac = rng.uniform(0.05, 1.0);
    double total = 0.0;
    for (double b : ps.bins) total += b;
    double acc = 0.0;
    std::size_t expect = ps.bins.size() - 1;
    for (std::size_t k = 0; k < ps.bins.size(); ++k) {
      acc += ps.bins[k];
      if (acc >= frac * total) {
        expect = k;
        break;
      }
    }
    EXPECT_DOUBLE_EQ(rolloff_frequency(ps, frac), ps.frequency(expect));
    EXPECT_LE(rolloff_frequency(ps, std::min(frac, 0.9)), rolloff_frequency(ps, 0.995));
  }
}

TEST(Rolloff, ToneAndThreshold) {
  const auto ps = welch_spectrum(tone(1000.0, 1.0, 16000), 16000);
  EXPECT_NEAR(rolloff_frequency(ps), 1000.0, ps.bin_hz);
  const auto low = welch_spectrum(tone(6500.0, 1.0, 16000), 16000);
  EXPECT_LE(rolloff_frequency(low), 7000.0);
}

TEST(Rolloff, BandLimitedNoiseStaysUnderTheBand) {
  for (double band : {2000.0, 4000.0, 6000.0}) {
    const std::size_t n = 1 << 16;
    auto x = noise(n, 1.0, static_cast<std::uint64_t>(band));
    std::vector<std::complex<double>> spec(x.begin(), x.end());
    fft(spec);
    for (std::size_t k = 0; k < n; ++k) {
      const double f = static_cast<double>(std::min(k, n - k)) * 16000.0 / static_cast<double>(n);
      if (f > band) spec[k] = 0.0;
    }
    fft(spec, true);
    for (std::size_t i = 0; i < n; ++i) x[i] = spec[i].real() / static_cast<double>(n);
    const auto ps = welch_spectrum(x, 16000);
    EXPECT_LE(rolloff_frequency(ps), band + 2.0 * ps.bin_hz) << band;
  }
}

TEST(Rolloff, Errors) {
  PowerSpectrum silent{std::vector<double>(513, 0.0), 15.625, 16000};
  EXPECT_THROW(rolloff_frequency(silent), InvariantError);
  PowerSpectrum ps{std::vector<double>(513, 1.0), 15.625, 16000};
  EXPECT_THROW(rolloff_frequency(ps, 0.0), InvariantError);
  EXPECT_THROW(rolloff_frequency(ps, 1.5), InvariantError);
  EXPECT_DOUBLE_EQ(rolloff_frequency(ps, 1.0), 8000.0);
}

TEST(Welch, ShortSignalIsZeroPadded) {
  const auto ps = welch_spectrum(tone(1000.0, 0.01, 16000), 16000);
  EXPECT_EQ(ps.bins.size(), 513u);
  EXPECT_GT(spectrum_energy(ps), 0.0);
}

TEST(Mel, SilenceAndShape) {
  const std::vector<double> silence(16000, 0.0);
  const auto spec = FrameSpec::from_seconds(0.025, 0.010, 16000, Window::kHann);
  const Matrix mel = mel_spectrogram(silence, spec, 40, 16000);
  EXPECT_EQ(mel.rows(), frame_count(silence.size(), spec));
  EXPECT_EQ(mel.cols(), 40u);
  for (double v : mel.data()) EXPECT_EQ(v, 0.0);
  const Matrix logged = log_compress(mel);
  for (double v : logged.data()) EXPECT_DOUBLE_EQ(v, std::log(kLogFloor));
}

TEST(Mel, NoiseIsFlatterThanSine) {
  const auto spec = FrameSpec::from_seconds(0.025, 0.010, 16000, Window::kHann);
  const auto flatness_spread = [&](const std::vector<double>& x) {
    const Matrix m = log_compress(mel_spectrogram(x, spec, 40, 16000));
    double mean = 0.0;
    for (std::size_t b = 0; b < 40; ++b) mean += m(5, b);
    mean /= 40.0;
    double var = 0.0;
    for (std::size_t b = 0; b < 40; ++b) var += (m(5, b) - mean) * (m(5, b) - mean);
    return var / 40.0;
  };
  EXPECT_LT(flatness_spread(noise(16000, 0.1, 4)), flatness_spread(tone(1000.0, 1.0, 16000)));
}

TEST(Mel, FilterbankIsNonNegative) {
  const Matrix fb = mel_filterbank(40, 512, 16000);
  EXPECT_EQ(fb.rows(), 40u);
  EXPECT_EQ(fb.cols(), 257u);
  for (std::size_t r = 0; r < fb.rows(); ++r) {
    double sum = 0.0;
    for (double v : fb.row(r)) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_GT(sum, 0.0) << r;
  }
}

TEST(Misc, PowersOfTwoAndRms) {
  EXPECT_TRUE(is_power_of_two(1024));
  EXPECT_FALSE(is_power_of_two(1000));
  EXPECT_EQ(next_power_of_two(1000), 1024u);
  EXPECT_EQ(next_power_of_two(1024), 1024u);
  const std::vector<double> x{3.0, -4.0};
  EXPECT_DOUBLE_EQ(rms(x), std::sqrt(12.5));
}

}  // namespace
}  // namespace redforge::dsp
