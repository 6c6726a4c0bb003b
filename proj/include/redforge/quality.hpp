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

#include <map>
#include <span>
#include <string>
#include <vector>

#include "redforge/corpus.hpp"

namespace redforge::quality {

struct FilterThresholds {
  double mos_min = 3.3;
  double rolloff_min_hz = 7000.0;
  double asr_conf_min = 0.8;

  void validate() const;
};

struct FilterResult {
  std::vector<SegmentRecord> kept;
  std::vector<SegmentRecord> rejected;
  // Every failing check counted, not only the recorded first reason.
  std::map<std::string, std::int64_t> all_failures;
};

// Keeps a record iff mos_score > mos_min, rolloff_hz > rolloff_min_hz and
// asr_confidence >= asr_conf_min. Rejected records carry the first failing
// reason in the order quality, bandwidth, confidence. Records that are
// already rejected are passed through to `rejected` unchanged. Throws
// InvariantError naming the segment when a metric is missing.
FilterResult apply_filters(std::span<const SegmentRecord> records,
                           const FilterThresholds& thresholds);

// Stage entry tally with hours and count conservation and a per-reason
// breakdown of `rejected`.
StageTally summarize(std::string stage_name,
                     std::span<const SegmentRecord> kept,
                     std::span<const SegmentRecord> rejected);

double total_hours(std::span<const SegmentRecord> records);

}  // namespace redforge::quality
