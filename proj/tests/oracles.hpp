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

// Brute-force reference implementations used by the unit and acceptance
// tests. They follow the written definitions directly and trade speed for
// obviousness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "redforge/annotation.hpp"
#include "redforge/cluster.hpp"
#include "redforge/hash.hpp"
#include "redforge/kernels.hpp"
#include "redforge/segmenter.hpp"

namespace redforge::oracle {

// Random VAD track: alternating speech and silence runs of random lengths.
inline seg::VadTrack random_track(Rng& rng) {
  static constexpr double kShifts[] = {0.01, 0.02, 0.025, 0.03};
  seg::VadTrack t;
  t.frame_shift = kShifts[rng.below(4)];
  const std::size_t n = 1 + rng.below(3000);
  bool speech = rng.uniform() < 0.5;
  while (t.decisions.size() < n) {
    // Mix of short blips, gaps around the merge threshold, and long runs.
    const double scale = rng.uniform() < 0.3 ? 0.2 : (rng.uniform() < 0.5 ? 1.2 : 8.0);
    const auto len = 1 + static_cast<std::size_t>(rng.uniform() * scale / t.frame_shift);
    for (std::size_t i = 0; i < len && t.decisions.size() < n; ++i) t.decisions.push_back(speech);
    speech = !speech;
  }
  const double full = static_cast<double>(n) * t.frame_shift;
  // Some assets end part-way through the last frame.
  t.asset_duration = rng.uniform() < 0.3 ? full - rng.uniform() * t.frame_shift * 0.9 : full;
  return t;
}

// Merge, extend, fuse and filter by repeated pairwise search until nothing
// changes, directly from the definitions.
inline seg::DurationSplit segmentation_fixpoint(const seg::VadTrack& track,
                                                const seg::SegmentationPolicy& p) {
  std::vector<seg::Interval> iv;
  for (std::size_t f = 0; f < track.decisions.size(); ++f) {
    if (!track.decisions[f]) continue;
    const double s = static_cast<double>(f) * track.frame_shift;
    const double e = std::min(static_cast<double>(f + 1) * track.frame_shift, track.asset_duration);
    if (s < e) iv.push_back({s, e});
  }
  // Per-frame intervals touch exactly; fuse runs first (gap 0 < any merge gap
  // unless merge_gap is 0, where touching runs still form one VAD run).
  const auto fuse_until_stable = [](std::vector<seg::Interval>& v, auto should_join) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < v.size() && !changed; ++i) {
        for (std::size_t j = 0; j < v.size() && !changed; ++j) {
          if (i == j) continue;
          const auto& a = v[i];
          const auto& b = v[j];
          if (a.start <= b.start && should_join(a, b)) {
            v[i] = {a.start, std::max(a.end, b.end)};
            v.erase(v.begin() + static_cast<std::ptrdiff_t>(j));
            changed = true;
          }
        }
      }
    }
    std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) { return x.start < y.start; });
  };
  fuse_until_stable(iv, [](const seg::Interval& a, const seg::Interval& b) {
    return b.start <= a.end;
  });
  fuse_until_stable(iv, [&](const seg::Interval& a, const seg::Interval& b) {
    return b.start - a.end < p.merge_gap;
  });
  for (auto& x : iv) {
    x = {std::max(0.0, x.start - p.boundary_pad), std::min(track.asset_duration, x.end + p.boundary_pad)};
  }
  fuse_until_stable(iv, [](const seg::Interval& a, const seg::Interval& b) {
    return b.start <= a.end;
  });
  seg::DurationSplit out;
  for (const auto& x : iv) {
    const double len = x.end - x.start;
    const bool keep = len >= p.min_dur - seg::kDurationSlack && len <= p.max_dur + seg::kDurationSlack;
    (keep ? out.kept : out.rejected).push_back(x);
  }
  return out;
}

// Agglomerative merging over the k-means partition: at each step merge the
// most similar pair of live clusters (centroid = normalized
// assignment-weighted mean), ties to the lowest (id_a, id_b), while the
// similarity is strictly above the threshold. Returns point -> cluster id.
inline std::vector<int> agglomerative_partition(const cluster::ClusterModel& start,
                                                double threshold) {
  std::map<int, std::vector<double>> centroid;
  std::map<int, double> weight;
  for (const auto& c : start.centroids) {
    centroid[c.id] = c.vector;
    weight[c.id] = static_cast<double>(start.count(c.id));
  }
  std::vector<int> assign = start.assignments;
  for (;;) {
    double best = -std::numeric_limits<double>::infinity();
    int ba = -1, bb = -1;
    for (const auto& [ia, va] : centroid) {
      for (const auto& [ib, vb] : centroid) {
        if (ib <= ia) continue;
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t d = 0; d < va.size(); ++d) {
          dot += va[d] * vb[d];
          na += va[d] * va[d];
          nb += vb[d] * vb[d];
        }
        const double s = dot / std::sqrt(na * nb);
        if (s > best) {
          best = s;
          ba = ia;
          bb = ib;
        }
      }
    }
    if (ba < 0 || !(best > threshold)) break;
    std::vector<double> merged(centroid[ba].size());
    const double wa = weight[ba], wb = weight[bb];
    double norm = 0.0;
    for (std::size_t d = 0; d < merged.size(); ++d) {
      merged[d] = wa * centroid[ba][d] + wb * centroid[bb][d];
      norm += merged[d] * merged[d];
    }
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (double& v : merged) v /= norm;
    } else {
      merged = centroid[ba];
    }
    centroid[ba] = merged;
    weight[ba] = wa + wb;
    centroid.erase(bb);
    weight.erase(bb);
    for (int& a : assign) {
      if (a == bb) a = ba;
    }
  }
  return assign;
}

// Canonical relabeling: clusters numbered by first appearance.
inline std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    const auto it = remap.emplace(l, static_cast<int>(remap.size())).first;
    out.push_back(it->second);
  }
  return out;
}

// Exhaustive nearest-codeword scan, lowest index on ties.
inline std::vector<std::int32_t> vq_scan(const Matrix& inputs, const Matrix& codebook) {
  std::vector<std::int32_t> out(inputs.rows());
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < codebook.rows(); ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < inputs.cols(); ++j) {
        const double diff = inputs(i, j) - codebook(c, j);
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        out[i] = static_cast<std::int32_t>(c);
      }
    }
  }
  return out;
}

// Random plan in canonical form: tokens, labeled single units and unlabeled
// runs of words and CJK characters, never two unlabeled runs in a row.
inline annot::PromptPlan random_plan(Rng& rng) {
  using annot::Behavior;
  using annot::Unit;
  static const char* kCjk[] = {"我", "你", "好", "棒", "是", "就", "哈", "嗯"};
  static const char* kWords[] = {"ok", "yes", "well", "hello", "so", "really", "x1"};
  const auto piece = [&]() -> std::string {
    return rng.uniform() < 0.5 ? kCjk[rng.below(8)] : kWords[rng.below(7)];
  };
  annot::PromptPlan p;
  p.emotion = static_cast<annot::Emotion>(rng.below(4));
  const std::size_t n = rng.below(12);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = rng.uniform();
    if (r < 0.3) {
      p.units.push_back(Unit::make_token(static_cast<Behavior>(rng.below(7))));
    } else if (r < 0.6) {
      p.units.push_back(Unit::make_text(piece(), static_cast<Behavior>(7 + rng.below(6))));
    } else {
      if (!p.units.empty() && p.units.back().kind == Unit::Kind::kText && !p.units.back().label) continue;
      std::string text = piece();
      for (std::size_t k = rng.below(4); k > 0; --k) {
        const std::string next = piece();
        const bool join = static_cast<unsigned char>(text.back()) >= 0x80 &&
                          static_cast<unsigned char>(next.front()) >= 0x80;
        text += (join ? "" : " ") + next;
      }
      p.units.push_back(Unit::make_text(text));
    }
  }
  return p;
}

}  // namespace redforge::oracle
