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

#include "redforge/quality.hpp"

#include "redforge/error.hpp"

namespace redforge::quality {

void FilterThresholds::validate() const {
  if (!(mos_min >= 1.0 && mos_min <= 5.0)) {
    throw ConfigError("mos_min must lie in [1, 5]");
  }
  if (!(rolloff_min_hz > 0.0)) {
    throw ConfigError("rolloff_min_hz must be positive");
  }
  if (!(asr_conf_min >= 0.0 && asr_conf_min <= 1.0)) {
    throw ConfigError("asr_conf_min must lie in [0, 1]");
  }
}

FilterResult apply_filters(std::span<const SegmentRecord> records,
                           const FilterThresholds& thresholds) {
  thresholds.validate();
  FilterResult result;
  for (const auto& r : records) {
    if (r.rejected()) {
      result.rejected.push_back(r);
      continue;
    }
    if (!r.mos_score || !r.rolloff_hz || !r.asr_confidence) {
      throw InvariantError("segment " + r.segment_id +
                           " is missing a filter metric (mos_score, "
                           "rolloff_hz, asr_confidence)");
    }
    const bool quality_ok = *r.mos_score > thresholds.mos_min;
    const bool bandwidth_ok = *r.rolloff_hz > thresholds.rolloff_min_hz;
    const bool confidence_ok = *r.asr_confidence >= thresholds.asr_conf_min;
    if (!quality_ok) ++result.all_failures["quality"];
    if (!bandwidth_ok) ++result.all_failures["bandwidth"];
    if (!confidence_ok) ++result.all_failures["confidence"];
    if (quality_ok && bandwidth_ok && confidence_ok) {
      result.kept.push_back(r);
      continue;
    }
    SegmentRecord out = r;
    out.reject_reason = !quality_ok     ? RejectReason::kQuality
                        : !bandwidth_ok ? RejectReason::kBandwidth
                                        : RejectReason::kConfidence;
    result.rejected.push_back(std::move(out));
  }
  return result;
}

double total_hours(std::span<const SegmentRecord> records) {
  double seconds = 0.0;
  for (const auto& r : records) seconds += r.length();
  return seconds / 3600.0;
}

StageTally summarize(std::string stage_name,
                     std::span<const SegmentRecord> kept,
                     std::span<const SegmentRecord> rejected) {
  StageTally t;
  t.stage_name = std::move(stage_name);
  const double kept_hours = total_hours(kept);
  t.removed_hours = total_hours(rejected);
  t.input_hours = kept_hours + t.removed_hours;
  t.input_count = static_cast<std::int64_t>(kept.size() + rejected.size());
  t.removed_count = static_cast<std::int64_t>(rejected.size());
  for (const auto& r : rejected) {
    const std::string key =
        r.reject_reason ? to_string(*r.reject_reason) : "unspecified";
    auto& tally = t.reasons[key];
    ++tally.count;
    tally.hours += r.length() / 3600.0;
  }
  return t;
}

}  // namespace redforge::quality
