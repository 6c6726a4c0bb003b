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
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "redforge/matrix.hpp"

namespace redforge::kern {

// ---------------------------------------------------------------------------
// Vector quantization

inline constexpr int kDefaultCodebookSize = 16384;
inline constexpr double kSemanticFrameShift = 0.040;
inline constexpr double kAcousticFrameShift = 0.020;

struct Codebook {
  Matrix codewords;  // [n_codes x dim]
  double frame_shift = kSemanticFrameShift;

  std::size_t n_codes() const { return codewords.rows(); }
  std::size_t dim() const { return codewords.cols(); }
  void validate() const;
};

struct VqResult {
  std::vector<std::int32_t> indices;
  Matrix quantized;
  double loss = 0.0;  // mean squared error over all elements
};

// Nearest codeword by Euclidean distance, lowest index on ties.
VqResult vq_quantize(const Matrix& inputs, const Codebook& codebook);

struct LossWeights {
  double vq = 1.0;
  double ssl = 1000.0;
  double acoustic = 1.0;
};

struct LossBreakdown {
  double vq = 0.0;
  double ssl = 0.0;
  double acoustic = 0.0;
  double composite = 0.0;
};

// composite = w.vq * vq + w.ssl * ssl + w.acoustic * acoustic.
LossBreakdown composite_loss(double vq, double ssl, double acoustic,
                             const LossWeights& weights = {});

// ---------------------------------------------------------------------------
// Clip&Shuffle

struct ClipShuffleOptions {
  // Fraction of the utterance to keep, in [0.25, 0.75]. Drawn uniformly from
  // that range with the seed when unset.
  std::optional<double> fraction;
  double slice_len = 1.0;  // seconds
  std::uint64_t seed = 0;
};

struct ClipShuffleResult {
  Matrix output;
  double fraction = 0.0;
  std::size_t span_start = 0;   // frames
  std::size_t span_frames = 0;
  std::size_t slice_frames = 0;
  // order[i] is the index (within the span) of the slice emitted i-th.
  std::vector<std::size_t> order;
};

inline constexpr double kClipFractionMin = 0.25;
inline constexpr double kClipFractionMax = 0.75;

// Selects a contiguous span, cuts it into slice_len slices (the final slice
// may be partial) and emits the slices in a seeded random order.
ClipShuffleResult clip_and_shuffle(const Matrix& frames, double frame_rate,
                                   const ClipShuffleOptions& options);

// ---------------------------------------------------------------------------
// Multi-stream delay pattern

using Streams = std::vector<std::vector<std::int32_t>>;

struct TokenGrid {
  std::size_t n_streams = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> tokens;  // row-major [n_streams x width]
  std::vector<int> delays;
  std::int32_t pad_id = kDefaultCodebookSize;
  std::int32_t n_codes = kDefaultCodebookSize;

  std::int32_t at(std::size_t stream, std::size_t t) const {
    return tokens[stream * width + t];
  }
  int max_delay() const;
  bool operator==(const TokenGrid&) const = default;
};

// (0, 1, ..., n-1).
std::vector<int> canonical_delays(std::size_t n_streams);

// out[k][t] = in[k][t - delays[k]] where defined, pad_id (= n_codes)
// elsewhere. Width is T + max(delays).
TokenGrid delay_encode(const Streams& streams, std::span<const int> delays,
                       std::int32_t n_codes = kDefaultCodebookSize);

// Exact inverse of delay_encode. Throws InvariantError naming
// (stream, position) when a mandated pad cell holds a token or a token cell
// holds the pad id.
Streams delay_decode(const TokenGrid& grid);

// ---------------------------------------------------------------------------
// Lookahead alignment of semantic and acoustic streams

struct LookaheadEntry {
  std::size_t acoustic_index = 0;
  // Semantic frame added at this acoustic position; kBeginSource marks the
  // dedicated begin embedding used before d frames have elapsed.
  std::int64_t semantic_index = 0;

  static constexpr std::int64_t kBeginSource = -1;
  bool is_padding() const { return semantic_index == kBeginSource; }
  bool operator==(const LookaheadEntry&) const = default;
};

inline constexpr int kDefaultLookahead = 4;

// Entry i pairs acoustic position i with semantic frame floor((i - d) / r),
// or the begin source when i < d. Requires d >= 0, r >= 1 and
// acoustic_len <= semantic_len * r.
std::vector<LookaheadEntry> lookahead_align(std::size_t semantic_len,
                                            std::size_t acoustic_len,
                                            int lookahead, int upsample);

// ---------------------------------------------------------------------------
// Flow matching with the optimal-transport path

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);
  static Tensor zeros(std::vector<std::size_t> shape_);
  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor vector(std::vector<double> v);

  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool operator==(const Tensor&) const = default;
};

struct FlowKernelParams {
  double sigma = 1e-4;
  double cfg_alpha = 0.7;
  // Probability of dropping the condition during training. Recorded with
  // the kernel parameters; nothing here consumes it.
  double cond_drop_prob = 0.2;

  void validate() const;
};

// phi_t = (1 - (1 - sigma) t) x0 + t x1, evaluated so that phi_0 == x0 and
// phi_1 == sigma x0 + x1 hold exactly.
Tensor ot_path(const Tensor& x0, const Tensor& x1, double t, double sigma);

// d/dt phi_t = x1 - (1 - sigma) x0, constant in t.
Tensor ot_field(const Tensor& x0, const Tensor& x1, double sigma);

// Per-element mean of squared differences.
double fm_loss(const Tensor& v_pred, const Tensor& v_target);

// (1 + alpha) v_cond - alpha v_uncond.
Tensor cfg_combine(const Tensor& v_cond, const Tensor& v_uncond, double alpha);

// Vector field estimate at (x, t); a null condition requests the
// unconditional prediction.
using FieldFn =
    std::function<Tensor(const Tensor& x, double t, const Tensor* condition)>;

// Wraps an estimator so that every evaluation uses the guided combination.
FieldFn guided_field(FieldFn estimator, double alpha);

// Explicit Euler from t = 0 to t = 1 with n_steps uniform steps. Throws
// InvariantError with the step index when the field is non-finite.
Tensor integrate_ode(const FieldFn& field, const Tensor& x0, int n_steps,
                     const Tensor* condition = nullptr);

// The condition must have one row per target spectrogram frame.
void check_condition(const Matrix& condition, std::size_t target_frames);

}  // namespace redforge::kern
