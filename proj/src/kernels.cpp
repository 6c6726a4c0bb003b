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

#include "redforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "redforge/error.hpp"
#include "redforge/hash.hpp"

namespace redforge::kern {

void Codebook::validate() const {
  if (codewords.rows() == 0) throw InvariantError("empty codebook");
  for (double v : codewords.data()) {
    if (!std::isfinite(v)) throw InvariantError("codebook has non-finite entries");
  }
}

VqResult vq_quantize(const Matrix& inputs, const Codebook& codebook) {
  codebook.validate();
  if (inputs.cols() != codebook.dim()) {
    throw InvariantError("input dim " + std::to_string(inputs.cols()) +
                         " does not match codebook dim " +
                         std::to_string(codebook.dim()));
  }
  VqResult result;
  result.indices.resize(inputs.rows());
  result.quantized = Matrix(inputs.rows(), inputs.cols());
  double sq_error = 0.0;
  const std::size_t dim = codebook.dim();
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    const auto x = inputs.row(r);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < codebook.n_codes(); ++k) {
      const auto c = codebook.codewords.row(k);
      double d = 0.0;
      // Partial sums only grow, so abandoning once past `best` cannot change
      // the argmin.
      for (std::size_t i = 0; i < dim && d <= best; ++i) {
        const double diff = x[i] - c[i];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        best_k = k;
      }
    }
    result.indices[r] = static_cast<std::int32_t>(best_k);
    const auto c = codebook.codewords.row(best_k);
    std::copy(c.begin(), c.end(), result.quantized.row(r).begin());
    sq_error += best;
  }
  const std::size_t n = inputs.rows() * dim;
  result.loss = n > 0 ? sq_error / static_cast<double>(n) : 0.0;
  return result;
}

LossBreakdown composite_loss(double vq, double ssl, double acoustic,
                             const LossWeights& weights) {
  if (vq < 0.0 || ssl < 0.0 || acoustic < 0.0) {
    throw InvariantError("component losses must be non-negative");
  }
  if (weights.vq < 0.0 || weights.ssl < 0.0 || weights.acoustic < 0.0) {
    throw InvariantError("loss weights must be non-negative");
  }
  LossBreakdown b{vq, ssl, acoustic, 0.0};
  b.composite = weights.vq * vq + weights.ssl * ssl + weights.acoustic * acoustic;
  return b;
}

// ---------------------------------------------------------------------------

ClipShuffleResult clip_and_shuffle(const Matrix& frames, double frame_rate,
                                   const ClipShuffleOptions& options) {
  if (!(frame_rate > 0.0)) throw InvariantError("frame rate must be positive");
  if (!(options.slice_len > 0.0)) throw InvariantError("slice length must be positive");
  const auto slice_frames = static_cast<std::size_t>(
      std::llround(options.slice_len * frame_rate));
  if (slice_frames == 0) throw InvariantError("slice shorter than one frame");
  const std::size_t total = frames.rows();
  if (total < slice_frames) {
    throw InvariantError("utterance of " + std::to_string(total) +
                         " frames is shorter than one slice (" +
                         std::to_string(slice_frames) + ")");
  }
  Rng rng(options.seed);
  ClipShuffleResult res;
  res.fraction = options.fraction
                     ? *options.fraction
                     : rng.uniform(kClipFractionMin, kClipFractionMax);
  if (!(res.fraction >= kClipFractionMin && res.fraction <= kClipFractionMax)) {
    throw InvariantError("clip fraction must lie in [0.25, 0.75]");
  }
  res.slice_frames = slice_frames;
  res.span_frames = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(res.fraction * total)));
  res.span_start = static_cast<std::size_t>(rng.below(total - res.span_frames + 1));

  const std::size_t n_slices = (res.span_frames + slice_frames - 1) / slice_frames;
  res.order.resize(n_slices);
  std::iota(res.order.begin(), res.order.end(), 0);
  for (std::size_t i = n_slices; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(res.order[i - 1], res.order[j]);
  }
  res.output = Matrix(res.span_frames, frames.cols());
  std::size_t out_row = 0;
  for (std::size_t s : res.order) {
    const std::size_t begin = res.span_start + s * slice_frames;
    const std::size_t end =
        std::min(begin + slice_frames, res.span_start + res.span_frames);
    for (std::size_t r = begin; r < end; ++r, ++out_row) {
      const auto src = frames.row(r);
      std::copy(src.begin(), src.end(), res.output.row(out_row).begin());
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

int TokenGrid::max_delay() const {
  return delays.empty() ? 0 : *std::max_element(delays.begin(), delays.end());
}

std::vector<int> canonical_delays(std::size_t n_streams) {
  std::vector<int> d(n_streams);
  std::iota(d.begin(), d.end(), 0);
  return d;
}

TokenGrid delay_encode(const Streams& streams, std::span<const int> delays,
                       std::int32_t n_codes) {
  if (n_codes < 1) throw InvariantError("n_codes must be at least 1");
  if (delays.size() != streams.size()) {
    throw InvariantError("one delay per stream required");
  }
  for (int d : delays) {
    if (d < 0) throw InvariantError("negative delay " + std::to_string(d));
  }
  const std::size_t t_len = streams.empty() ? 0 : streams.front().size();
  for (std::size_t k = 0; k < streams.size(); ++k) {
    if (streams[k].size() != t_len) {
      throw InvariantError("stream " + std::to_string(k) +
                           " length differs; input must be rectangular");
    }
    for (std::int32_t v : streams[k]) {
      if (v < 0 || v >= n_codes) {
        throw InvariantError("token " + std::to_string(v) + " in stream " +
                             std::to_string(k) + " outside [0, n_codes)");
      }
    }
  }
  TokenGrid grid;
  grid.n_streams = streams.size();
  grid.delays.assign(delays.begin(), delays.end());
  grid.n_codes = n_codes;
  grid.pad_id = n_codes;
  grid.width = t_len + static_cast<std::size_t>(grid.max_delay());
  grid.tokens.assign(grid.n_streams * grid.width, grid.pad_id);
  for (std::size_t k = 0; k < streams.size(); ++k) {
    const auto d = static_cast<std::size_t>(delays[k]);
    for (std::size_t t = 0; t < t_len; ++t) {
      grid.tokens[k * grid.width + t + d] = streams[k][t];
    }
  }
  return grid;
}

Streams delay_decode(const TokenGrid& grid) {
  if (grid.delays.size() != grid.n_streams) {
    throw InvariantError("grid has " + std::to_string(grid.delays.size()) +
                         " delays for " + std::to_string(grid.n_streams) +
                         " streams");
  }
  if (grid.tokens.size() != grid.n_streams * grid.width) {
    throw InvariantError("grid token count does not match its shape");
  }
  const int max_d = grid.max_delay();
  if (static_cast<std::size_t>(max_d) > grid.width) {
    throw InvariantError("grid narrower than its maximum delay");
  }
  for (int d : grid.delays) {
    if (d < 0) throw InvariantError("negative delay " + std::to_string(d));
  }
  const std::size_t t_len = grid.width - static_cast<std::size_t>(max_d);
  Streams out(grid.n_streams, std::vector<std::int32_t>(t_len));
  for (std::size_t k = 0; k < grid.n_streams; ++k) {
    const auto d = static_cast<std::size_t>(grid.delays[k]);
    for (std::size_t pos = 0; pos < grid.width; ++pos) {
      const std::int32_t v = grid.at(k, pos);
      const bool token_cell = pos >= d && pos < d + t_len;
      const std::string where =
          "(stream " + std::to_string(k) + ", position " + std::to_string(pos) + ")";
      if (!token_cell) {
        if (v != grid.pad_id) {
          throw InvariantError("corrupt grid: token " + std::to_string(v) +
                               " in pad cell " + where);
        }
        continue;
      }
      if (v == grid.pad_id || v < 0 || v >= grid.n_codes) {
        throw InvariantError("corrupt grid: invalid token " + std::to_string(v) +
                             " at " + where);
      }
      out[k][pos - d] = v;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<LookaheadEntry> lookahead_align(std::size_t semantic_len,
                                            std::size_t acoustic_len,
                                            int lookahead, int upsample) {
  if (lookahead < 0) throw InvariantError("lookahead must be non-negative");
  if (upsample < 1) throw InvariantError("upsample factor must be >= 1");
  if (acoustic_len > semantic_len * static_cast<std::size_t>(upsample)) {
    throw InvariantError("acoustic length " + std::to_string(acoustic_len) +
                         " exceeds upsampled semantic coverage " +
                         std::to_string(semantic_len * upsample));
  }
  std::vector<LookaheadEntry> plan(acoustic_len);
  for (std::size_t i = 0; i < acoustic_len; ++i) {
    plan[i].acoustic_index = i;
    const auto shifted = static_cast<std::int64_t>(i) - lookahead;
    plan[i].semantic_index =
        shifted < 0 ? LookaheadEntry::kBeginSource : shifted / upsample;
  }
  return plan;
}

// ---------------------------------------------------------------------------

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(),
                                        std::size_t{1}, std::multiplies<>());
  if (n != data.size()) throw InvariantError("tensor data does not match shape");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape_) {
  const std::size_t n = std::accumulate(shape_.begin(), shape_.end(),
                                        std::size_t{1}, std::multiplies<>());
  return Tensor(std::move(shape_), std::vector<double>(n, 0.0));
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

void FlowKernelParams::validate() const {
  if (!(sigma >= 0.0 && sigma < 1.0)) throw ConfigError("sigma must lie in [0, 1)");
  if (!(cfg_alpha >= 0.0)) throw ConfigError("cfg alpha must be non-negative");
  if (!(cond_drop_prob >= 0.0 && cond_drop_prob <= 1.0)) {
    throw ConfigError("condition drop probability must lie in [0, 1]");
  }
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw InvariantError(std::string(op) + ": shape mismatch");
  }
}
}  // namespace

Tensor ot_path(const Tensor& x0, const Tensor& x1, double t, double sigma) {
  require_same_shape(x0, x1, "ot_path");
  if (!(t >= 0.0 && t <= 1.0)) throw InvariantError("ot_path: t outside [0, 1]");
  const double a = (1.0 - t) + t * sigma;
  Tensor out = x0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = a * x0.data[i] + t * x1.data[i];
  }
  return out;
}

Tensor ot_field(const Tensor& x0, const Tensor& x1, double sigma) {
  require_same_shape(x0, x1, "ot_field");
  Tensor out = x1;
  const double c = 1.0 - sigma;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = x1.data[i] - c * x0.data[i];
  }
  return out;
}

double fm_loss(const Tensor& v_pred, const Tensor& v_target) {
  require_same_shape(v_pred, v_target, "fm_loss");
  if (v_pred.size() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < v_pred.size(); ++i) {
    const double d = v_pred.data[i] - v_target.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(v_pred.size());
}

Tensor cfg_combine(const Tensor& v_cond, const Tensor& v_uncond, double alpha) {
  require_same_shape(v_cond, v_uncond, "cfg_combine");
  if (!(alpha >= 0.0)) throw InvariantError("cfg_combine: alpha must be >= 0");
  Tensor out = v_cond;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = (1.0 + alpha) * v_cond.data[i] - alpha * v_uncond.data[i];
  }
  return out;
}

FieldFn guided_field(FieldFn estimator, double alpha) {
  return [estimator = std::move(estimator), alpha](
             const Tensor& x, double t, const Tensor* condition) {
    return cfg_combine(estimator(x, t, condition), estimator(x, t, nullptr),
                       alpha);
  };
}

Tensor integrate_ode(const FieldFn& field, const Tensor& x0, int n_steps,
                     const Tensor* condition) {
  if (n_steps < 1) throw InvariantError("integrate_ode: n_steps must be >= 1");
  const double dt = 1.0 / n_steps;
  Tensor x = x0;
  for (int step = 0; step < n_steps; ++step) {
    const double t = step * dt;
    const Tensor v = field(x, t, condition);
    if (!v.same_shape(x)) {
      throw InvariantError("integrate_ode: field shape mismatch at step " +
                           std::to_string(step));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(v.data[i])) {
        throw InvariantError("integrate_ode: non-finite field at step " +
                             std::to_string(step));
      }
      x.data[i] += dt * v.data[i];
    }
  }
  return x;
}

void check_condition(const Matrix& condition, std::size_t target_frames) {
  if (condition.rows() != target_frames) {
    throw InvariantError("condition has " + std::to_string(condition.rows()) +
                         " frames, target has " + std::to_string(target_frames));
  }
}

}  // namespace redforge::kern
