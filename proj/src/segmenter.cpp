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

#include "redforge/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "redforge/error.hpp"

namespace redforge::seg {

void SegmentationPolicy::validate() const {
  if (merge_gap < 0.0 || boundary_pad < 0.0 || min_dur < 0.0 || max_dur < 0.0) {
    throw ConfigError("segmentation parameters must be non-negative");
  }
  if (!(min_dur < max_dur)) {
    throw ConfigError("segmentation requires min_dur < max_dur");
  }
}

std::vector<Interval> decisions_to_intervals(const VadTrack& track) {
  std::vector<Interval> out;
  const auto& d = track.decisions;
  std::size_t i = 0;
  while (i < d.size()) {
    if (!d[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < d.size() && d[j]) ++j;
    Interval iv{static_cast<double>(i) * track.frame_shift,
                static_cast<double>(j) * track.frame_shift};
    if (track.asset_duration > 0.0) {
      iv.end = std::min(iv.end, track.asset_duration);
    }
    if (iv.start < iv.end) out.push_back(iv);
    i = j;
  }
  return out;
}

namespace {

void require_sorted(std::span<const Interval> intervals) {
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (!(intervals[i].start <= intervals[i].end)) {
      throw InvariantError("interval " + std::to_string(i) +
                           " has end before start");
    }
    if (i > 0 && intervals[i].start < intervals[i - 1].end) {
      throw InvariantError("intervals are not sorted and disjoint at index " +
                           std::to_string(i));
    }
  }
}

}  // namespace

std::vector<Interval> merge_adjacent(std::span<const Interval> intervals,
                                     double merge_gap) {
  require_sorted(intervals);
  std::vector<Interval> out;
  for (const Interval& iv : intervals) {
    if (!out.empty() && iv.start - out.back().end < merge_gap) {
      out.back().end = std::max(out.back().end, iv.end);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

std::vector<Interval> extend_boundaries(std::span<const Interval> intervals,
                                        double pad, double asset_duration) {
  std::vector<Interval> out;
  for (const Interval& iv : intervals) {
    Interval grown{std::max(0.0, iv.start - pad),
                   std::min(asset_duration, iv.end + pad)};
    if (!out.empty() && grown.start <= out.back().end) {
      out.back().end = std::max(out.back().end, grown.end);
    } else {
      out.push_back(grown);
    }
  }
  return out;
}

DurationSplit filter_duration(std::span<const Interval> intervals,
                              const SegmentationPolicy& policy) {
  DurationSplit split;
  for (const Interval& iv : intervals) {
    const double len = iv.length();
    if (len >= policy.min_dur - kDurationSlack &&
        len <= policy.max_dur + kDurationSlack) {
      split.kept.push_back(iv);
    } else {
      split.rejected.push_back(iv);
    }
  }
  return split;
}

DurationSplit segment_track(const VadTrack& track,
                            const SegmentationPolicy& policy) {
  policy.validate();
  const auto raw = decisions_to_intervals(track);
  const auto merged = merge_adjacent(raw, policy.merge_gap);
  const auto extended =
      extend_boundaries(merged, policy.boundary_pad, track.asset_duration);
  return filter_duration(extended, policy);
}

dsp::FrameSpec default_vad_frames(int sample_rate) {
  return dsp::FrameSpec::from_seconds(0.025, 0.025, sample_rate);
}

VadTrack energy_vad(std::span<const double> samples, int sample_rate,
                    const dsp::FrameSpec& spec, double threshold_db) {
  if (samples.empty()) throw InvariantError("energy_vad: empty signal");
  spec.validate();
  VadTrack track;
  track.frame_shift = static_cast<double>(spec.frame_shift) / sample_rate;
  track.asset_duration = static_cast<double>(samples.size()) / sample_rate;
  if (samples.size() < spec.frame_length) {
    track.decisions.assign(1, 0);
    if (threshold_db == -std::numeric_limits<double>::infinity()) {
      track.decisions[0] = 1;
    }
    return track;
  }
  const Matrix frames = dsp::frame_signal(samples, spec);
  std::vector<double> level_db(frames.rows());
  for (std::size_t f = 0; f < frames.rows(); ++f) {
    const double r = dsp::rms(frames.row(f));
    // 1e-20 keeps digital silence finite at -200 dB.
    level_db[f] = 10.0 * std::log10(r * r + 1e-20);
  }
  std::vector<double> sorted = level_db;
  const std::size_t idx = sorted.size() / 10;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(idx),
                   sorted.end());
  const double floor_db = sorted[idx];
  track.decisions.resize(level_db.size());
  for (std::size_t f = 0; f < level_db.size(); ++f) {
    track.decisions[f] = level_db[f] > floor_db + threshold_db ? 1 : 0;
  }
  return track;
}

}  // namespace redforge::seg
