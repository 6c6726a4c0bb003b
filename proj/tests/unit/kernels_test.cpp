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
#include <set>

#include "../oracles.hpp"
#include "redforge/error.hpp"
#include "redforge/kernels.hpp"
#include "test_util.hpp"

namespace redforge::kern {
namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

Tensor random_tensor(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return Tensor::vector(std::move(v));
}

TEST(Vq, DocumentedExamples) {
  const Codebook two{Matrix::from_rows({{0, 0}, {1, 1}})};
  EXPECT_EQ(vq_quantize(Matrix::from_rows({{0.9, 0.8}}), two).indices[0], 1);

  Rng rng(1);
  Codebook cb{random_matrix(rng, 8, 3)};
  const auto exact = vq_quantize(Matrix::from_rows({cb.codewords.to_rows()[5]}), cb);
  EXPECT_EQ(exact.indices[0], 5);
  EXPECT_EQ(exact.loss, 0.0);

  const Codebook ring{Matrix::from_rows({{1, 0}, {0, 1}, {-1, 0}, {0, -1}})};
  EXPECT_EQ(vq_quantize(Matrix::from_rows({{0, 0}}), ring).indices[0], 0);
}

TEST(Vq, MatchesScanAndLoss) {
  Rng rng(2);
  const Codebook cb{random_matrix(rng, 256, 16)};
  const Matrix x = random_matrix(rng, 100, 16);
  const auto r = vq_quantize(x, cb);
  EXPECT_EQ(r.indices, oracle::vq_scan(x, cb.codewords));
  double se = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < 16; ++j) {
      EXPECT_EQ(r.quantized(i, j), cb.codewords(r.indices[i], j));
      se += std::pow(x(i, j) - r.quantized(i, j), 2);
    }
  }
  EXPECT_NEAR(r.loss, se / (100.0 * 16.0), 1e-12);
}

TEST(Vq, Errors) {
  EXPECT_THROW(vq_quantize(Matrix(1, 2), Codebook{}), InvariantError);
  EXPECT_THROW(vq_quantize(Matrix(1, 3), Codebook{Matrix(4, 2)}), InvariantError);
}

TEST(CompositeLoss, WeightedSum) {
  EXPECT_DOUBLE_EQ(composite_loss(0.5, 0.001, 0.2).composite, 1.7);
  EXPECT_EQ(composite_loss(0, 0, 0).composite, 0.0);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double c[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    const LossWeights w{rng.uniform(0, 10), rng.uniform(0, 2000), rng.uniform(0, 10)};
    const double wv[3] = {w.vq, w.ssl, w.acoustic};
    double dot = 0.0;
    for (int k = 2; k >= 0; --k) dot += wv[k] * c[k];
    EXPECT_NEAR(composite_loss(c[0], c[1], c[2], w).composite, dot, 1e-9);
  }
  EXPECT_THROW(composite_loss(-1, 0, 0), InvariantError);
}

std::multiset<std::vector<double>> slices_of(const Matrix& m, std::size_t begin, std::size_t frames,
                                             std::size_t slice) {
  std::multiset<std::vector<double>> out;
  for (std::size_t s = 0; s < frames; s += slice) {
    std::vector<double> flat;
    for (std::size_t r = begin + s; r < begin + std::min(frames, s + slice); ++r) {
      flat.insert(flat.end(), m.row(r).begin(), m.row(r).end());
    }
    out.insert(flat);
  }
  return out;
}

TEST(ClipShuffle, PermutesSlicesOfSpan) {
  Rng rng(4);
  const Matrix frames = random_matrix(rng, 500, 2);  // 10 s at 50 fps
  const auto r = clip_and_shuffle(frames, 50.0, {0.5, 1.0, 17});
  EXPECT_EQ(r.span_frames, 250u);
  EXPECT_EQ(r.order.size(), 5u);
  EXPECT_EQ(r.output.rows(), 250u);
  // Output slices are the span's slices in r.order.
  std::multiset<std::vector<double>> out_slices;
  std::size_t row = 0;
  for (std::size_t s : r.order) {
    const std::size_t len = std::min<std::size_t>(r.slice_frames, r.span_frames - s * r.slice_frames);
    for (std::size_t k = 0; k < len; ++k, ++row) {
      for (std::size_t c = 0; c < 2; ++c) {
        EXPECT_EQ(r.output(row, c), frames(r.span_start + s * r.slice_frames + k, c));
      }
    }
  }
  EXPECT_EQ(clip_and_shuffle(frames, 50.0, {0.25, 1.0, 3}).span_frames, 125u);
  const Matrix eight = random_matrix(rng, 400, 1);
  EXPECT_EQ(clip_and_shuffle(eight, 50.0, {0.25, 1.0, 3}).span_frames, 100u);
}

TEST(ClipShuffle, PartialFinalSliceAndSeeds) {
  Rng rng(5);
  const Matrix frames = random_matrix(rng, 730, 3);
  std::set<std::vector<std::size_t>> orders;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto r = clip_and_shuffle(frames, 50.0, {0.6, 1.0, seed});
    EXPECT_EQ(r.span_frames, 438u);
    std::multiset<std::vector<double>> out;
    std::size_t row = 0;
    for (std::size_t idx : r.order) {
      const std::size_t len = std::min<std::size_t>(50, r.span_frames - idx * 50);
      out.insert(*slices_of(r.output, row, len, len).begin());
      row += len;
    }
    EXPECT_EQ(out, slices_of(frames, r.span_start, r.span_frames, 50));
    orders.insert(r.order);
    const auto again = clip_and_shuffle(frames, 50.0, {0.6, 1.0, seed});
    EXPECT_EQ(again.output, r.output);
  }
  EXPECT_GE(orders.size(), 90u);
}

TEST(ClipShuffle, Errors) {
  const Matrix short_utt(40, 1);
  EXPECT_THROW(clip_and_shuffle(short_utt, 50.0, {0.5, 1.0, 0}), InvariantError);
  const Matrix ok(100, 1);
  EXPECT_THROW(clip_and_shuffle(ok, 50.0, {0.8, 1.0, 0}), InvariantError);
  EXPECT_THROW(clip_and_shuffle(ok, 50.0, {0.2, 1.0, 0}), InvariantError);
  EXPECT_NO_THROW(clip_and_shuffle(ok, 50.0, {std::nullopt, 1.0, 0}));
}

TEST(Delay, DocumentedExample) {
  const Streams in{{10, 11}, {20, 21}};
  const std::vector<int> delays{0, 1};
  const TokenGrid g = delay_encode(in, delays, 100);
  ASSERT_EQ(g.width, 3u);
  EXPECT_EQ(g.tokens, (std::vector<std::int32_t>{10, 11, 100, 100, 20, 21}));
  EXPECT_EQ(delay_decode(g), in);

  const std::vector<int> zero{0, 0};
  EXPECT_EQ(delay_encode(in, zero, 100).tokens, (std::vector<std::int32_t>{10, 11, 20, 21}));
  EXPECT_EQ(canonical_delays(4), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(delay_encode(in, canonical_delays(2)).pad_id, kDefaultCodebookSize);
}

TEST(Delay, CorruptionNamesCell) {
  const Streams in{{1, 2, 3}, {4, 5, 6}};
  TokenGrid g = delay_encode(in, canonical_delays(2), 8);
  g.tokens[1 * g.width + 0] = 3;
  try {
    delay_decode(g);
    FAIL();
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("(stream 1, position 0)"), std::string::npos) << e.what();
  }
  g = delay_encode(in, canonical_delays(2), 8);
  g.tokens[0 * g.width + 1] = g.pad_id;
  EXPECT_THROW(delay_decode(g), InvariantError);
  const std::vector<int> neg{0, -1};
  EXPECT_THROW(delay_encode(in, neg, 8), InvariantError);
  EXPECT_THROW(delay_encode(Streams{{1}, {1, 2}}, canonical_delays(2), 8), InvariantError);
}

TEST(Delay, RandomRoundTrip) {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng.below(8), t = 1 + rng.below(64);
    Streams s(n, std::vector<std::int32_t>(t));
    for (auto& row : s) {
      for (auto& v : row) v = static_cast<std::int32_t>(rng.below(1024));
    }
    std::vector<int> d(n);
    for (int& v : d) v = static_cast<int>(rng.below(6));
    EXPECT_EQ(delay_decode(delay_encode(s, d, 1024)), s);
  }
}

TEST(Lookahead, IndicesAndErrors) {
  const auto id = lookahead_align(8, 8, 0, 1);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(id[i].semantic_index, static_cast<std::int64_t>(i));
  const auto p = lookahead_align(8, 16, 2, 2);
  EXPECT_EQ(p[5].semantic_index, 1);
  EXPECT_TRUE(p[1].is_padding());
  EXPECT_FALSE(p[2].is_padding());
  EXPECT_THROW(lookahead_align(8, 17, 2, 2), InvariantError);
  EXPECT_THROW(lookahead_align(8, 8, -1, 1), InvariantError);
  EXPECT_THROW(lookahead_align(8, 8, 1, 0), InvariantError);
}

TEST(Flow, PathEndpointsAndMidpoint) {
  Rng rng(7);
  const Tensor x0 = random_tensor(rng, 32), x1 = random_tensor(rng, 32);
  const double sigma = 1e-4;
  EXPECT_EQ(ot_path(x0, x1, 0.0, sigma), x0);
  const Tensor p1 = ot_path(x0, x1, 1.0, sigma);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(p1.data[i], sigma * x0.data[i] + x1.data[i]);
  const Tensor mid = ot_path(x0, x1, 0.5, 0.0);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_DOUBLE_EQ(mid.data[i], (x0.data[i] + x1.data[i]) / 2.0);
  EXPECT_THROW(ot_path(x0, random_tensor(rng, 3), 0.5, sigma), InvariantError);
  EXPECT_THROW(ot_path(x0, x1, 1.5, sigma), InvariantError);
}

TEST(Flow, FieldAndFiniteDifference) {
  Rng rng(8);
  const Tensor x1 = random_tensor(rng, 16);
  EXPECT_EQ(ot_field(Tensor::zeros({16}), x1, 1e-4), x1);
  EXPECT_EQ(ot_field(random_tensor(rng, 16), x1, 1.0), x1);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor a = random_tensor(rng, 16), b = random_tensor(rng, 16);
    const double t = rng.uniform(0.0, 0.99), eps = 1e-6;
    const Tensor lo = ot_path(a, b, t, 1e-4), hi = ot_path(a, b, t + eps, 1e-4);
    const Tensor v = ot_field(a, b, 1e-4);
    for (std::size_t i = 0; i < 16; ++i) {
      EXPECT_NEAR((hi.data[i] - lo.data[i]) / eps, v.data[i], 1e-6 * std::max(1.0, std::abs(v.data[i])));
    }
  }
}

TEST(Flow, LossAndCfg) {
  EXPECT_EQ(fm_loss(Tensor::scalar(2), Tensor::scalar(1)), 1.0);
  Rng rng(9);
  const Tensor a = random_tensor(rng, 50), b = random_tensor(rng, 50);
  EXPECT_EQ(fm_loss(a, a), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < 50; ++i) sum += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  EXPECT_NEAR(fm_loss(a, b), sum / 50.0, 1e-12);

  EXPECT_EQ(cfg_combine(Tensor::scalar(2), Tensor::scalar(1), 0.7).data[0], 2.7);
  EXPECT_EQ(cfg_combine(a, b, 0.0), a);
  const Tensor same = cfg_combine(a, a, 3.0);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_NEAR(same.data[i], a.data[i], 1e-12);
  EXPECT_THROW(cfg_combine(a, b, -0.1), InvariantError);
}

TEST(Flow, EulerIntegration) {
  Rng rng(10);
  const Tensor x0 = random_tensor(rng, 8), x1 = random_tensor(rng, 8);
  const FieldFn ot = [&](const Tensor&, double, const Tensor*) { return ot_field(x0, x1, 0.0); };
  for (int steps : {1, 7, 100}) {
    const Tensor r = integrate_ode(ot, x0, steps);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(r.data[i], x1.data[i], 1e-9);
  }
  const FieldFn decay = [](const Tensor& x, double, const Tensor*) {
    Tensor v = x;
    for (double& e : v.data) e = -e;
    return v;
  };
  const Tensor one = Tensor::scalar(1.0);
  double prev_err = std::abs(integrate_ode(decay, one, 50).data[0] - std::exp(-1.0));
  for (int steps = 100; steps <= 1600; steps *= 2) {
    const double err = std::abs(integrate_ode(decay, one, steps).data[0] - std::exp(-1.0));
    EXPECT_NEAR(prev_err / err, 2.0, 0.05);
    prev_err = err;
  }
  const FieldFn blowup = [](const Tensor& x, double t, const Tensor*) {
    Tensor v = x;
    for (double& e : v.data) e = t > 0.5 ? NAN : 0.0;
    return v;
  };
  try {
    integrate_ode(blowup, one, 10);
    FAIL();
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("step 6"), std::string::npos) << e.what();
  }
  EXPECT_THROW(integrate_ode(decay, one, 0), InvariantError);
}

TEST(Flow, GuidedFieldUsesBothBranches) {
  const FieldFn est = [](const Tensor&, double, const Tensor* c) { return Tensor::scalar(c ? 2.0 : 1.0); };
  const Tensor cond = Tensor::scalar(0.0);
  EXPECT_EQ(guided_field(est, 0.7)(Tensor::scalar(0), 0.0, &cond).data[0], 2.7);
  EXPECT_NEAR(integrate_ode(guided_field(est, 0.7), Tensor::scalar(0), 10, &cond).data[0], 2.7, 1e-12);
}

TEST(Flow, ParamsAndCondition) {
  EXPECT_NO_THROW(FlowKernelParams{}.validate());
  EXPECT_THROW((FlowKernelParams{1.0, 0.7, 0.2}.validate()), ConfigError);
  EXPECT_THROW((FlowKernelParams{1e-4, 0.7, 1.5}.validate()), ConfigError);
  EXPECT_NO_THROW(check_condition(Matrix(10, 4), 10));
  EXPECT_THROW(check_condition(Matrix(9, 4), 10), InvariantError);
  EXPECT_THROW(Tensor({2, 2}, {1.0}), InvariantError);
}

}  // namespace
}  // namespace redforge::kern
