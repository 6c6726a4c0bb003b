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
#include <span>
#include <vector>

#include "redforge/dsp.hpp"

namespace redforge::seg {

struct Interval {
  double start = 0.0;
  double end = 0.0;
  double length() const { return end - start; }
  bool operator==(const Interval&) const = default;
};

struct VadTrack {
  std::vector<std::uint8_t> decisions;  // 1 = speech
  double frame_shift = 0.025;
  double asset_duration = 0.0;
};

struct SegmentationPolicy {
  double merge_gap = 1.0;
  double boundary_pad = 0.3;
  double min_dur = 2.0;
  double max_dur = 20.0;

  void validate() const;
};

// Slack applied to the inclusive duration bounds so that lengths computed
// from 6-decimal times are not rejected by rounding.
inline constexpr double kDurationSlack = 1e-9;

// Maximal runs of speech frames as [first * shift, (last + 1) * shift],
// clamped to the asset duration.
std::vector<Interval> decisions_to_intervals(const VadTrack& track);

// Coalesces consecutive intervals whose gap is strictly below merge_gap.
// Throws InvariantError when the input is not sorted and disjoint.
std::vector<Interval> merge_adjacent(std::span<const Interval> intervals,
                                     double merge_gap);

// Grows each interval by pad on both sides, clamps to [0, asset_duration],
// and fuses intervals that now overlap or touch.
std::vector<Interval> extend_boundaries(std::span<const Interval> intervals,
                                        double pad, double asset_duration);

struct DurationSplit {
  std::vector<Interval> kept;
  std::vector<Interval> rejected;
};

// Keeps min_dur <= length <= max_dur (inclusive).
DurationSplit filter_duration(std::span<const Interval> intervals,
                              const SegmentationPolicy& policy);

// merge -> extend (with re-merge) -> duration filter.
DurationSplit segment_track(const VadTrack& track,
                            const SegmentationPolicy& policy);

// Built-in energy detector: a frame is speech iff its level in dB exceeds the
// 10th-percentile frame level plus threshold_db.
inline constexpr double kDefaultVadThresholdDb = 12.0;
VadTrack energy_vad(std::span<const double> samples, int sample_rate,
                    const dsp::FrameSpec& spec,
                    double threshold_db = kDefaultVadThresholdDb);

// 25 ms non-overlapping frames.
dsp::FrameSpec default_vad_frames(int sample_rate);

}  // namespace redforge::seg
