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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace redforge {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Pipeline progress of an asset. Transitions are monotone in this order.
enum class StageState {
  kIngested,
  kEnhanced,
  kSegmented,
  kClustered,
  kTranscribed,
  kFiltered,
};

enum class RejectReason {
  kDuration,
  kMultiSpeaker,
  kCentroidOutlier,
  kQuality,
  kBandwidth,
  kConfidence,
  // A plugin call failed twice on this segment.
  kPluginFailure,
};

std::string to_string(StageState s);
StageState parse_stage_state(const std::string& s);
std::string to_string(RejectReason r);
RejectReason parse_reject_reason(const std::string& s);

struct AudioAsset {
  std::string asset_id;
  std::filesystem::path path;
  int sample_rate = 0;
  std::uint64_t num_samples = 0;
  int channel_count = 1;
  StageState stage_state = StageState::kIngested;
  // Unknown manifest keys, kept verbatim.
  Json extra = Json::object();

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(num_samples) / sample_rate
                           : 0.0;
  }
  // Throws InvariantError when `next` would move the state backwards.
  void advance(StageState next);
  void validate() const;

  bool operator==(const AudioAsset&) const = default;
};

struct SegmentRecord {
  std::string segment_id;
  std::string asset_id;
  double start = 0.0;
  double end = 0.0;
  std::optional<int> speaker_id;
  bool multi_speaker = false;
  std::optional<std::string> transcript;
  std::optional<double> asr_confidence;
  std::optional<double> mos_score;
  std::optional<double> rolloff_hz;
  std::optional<RejectReason> reject_reason;
  Json extra = Json::object();

  double length() const { return end - start; }
  bool rejected() const { return reject_reason.has_value(); }
  // Throws InvariantError naming the segment. A negative parent_duration
  // skips the upper bound check.
  void validate(double parent_duration = -1.0) const;

  bool operator==(const SegmentRecord&) const = default;
};

// Times are serialized with 6 decimal places.
double quantize_time(double seconds);

// Content-derived ids: re-running over the same inputs yields the same ids.
std::string make_asset_id(const std::string& path, std::uint64_t byte_length);
std::string make_segment_id(const std::string& asset_id, double start,
                            double end);

OrderedJson to_json(const SegmentRecord& r);
SegmentRecord segment_from_json(const Json& j);
OrderedJson to_json(const AudioAsset& a);
AudioAsset asset_from_json(const Json& j);

// Line-delimited JSON manifests. Writes go to a temporary file that is
// renamed into place, so a reader never sees a half-written manifest.
std::size_t write_manifest(std::span<const SegmentRecord> records,
                           const std::filesystem::path& destination);
std::vector<SegmentRecord> read_manifest(const std::filesystem::path& source);

std::size_t write_asset_manifest(std::span<const AudioAsset> assets,
                                 const std::filesystem::path& destination);
std::vector<AudioAsset> read_asset_manifest(
    const std::filesystem::path& source);

// Records without a reject reason, i.e. the inputs of the next stage.
std::vector<SegmentRecord> accepted(std::span<const SegmentRecord> records);

// ---------------------------------------------------------------------------
// Funnel accounting

struct ReasonTally {
  std::int64_t count = 0;
  double hours = 0.0;
  bool operator==(const ReasonTally&) const = default;
};

// What a stage reports about itself: how much came in, how much it removed.
struct StageTally {
  std::string stage_name;
  double input_hours = 0.0;
  double removed_hours = 0.0;
  std::int64_t input_count = 0;
  std::int64_t removed_count = 0;
  std::map<std::string, ReasonTally> reasons;
};

struct StageEntry {
  std::string stage_name;
  double input_hours = 0.0;
  double kept_hours = 0.0;
  double removed_hours = 0.0;
  std::int64_t input_count = 0;
  std::int64_t kept_count = 0;
  std::int64_t removed_count = 0;
  std::map<std::string, ReasonTally> reasons;

  double keep_rate() const {
    return input_hours > 0.0 ? kept_hours / input_hours : 0.0;
  }
  bool operator==(const StageEntry&) const = default;
};

struct FunnelReport {
  std::vector<StageEntry> stages;

  // final kept hours / first input hours.
  double overall_keep_rate() const;
  OrderedJson to_json() const;
  static FunnelReport from_json(const Json& j);
  // Aligned-column table, hours to 3 decimals.
  std::string to_table() const;

  bool operator==(const FunnelReport&) const = default;
};

inline constexpr double kFunnelHoursTolerance = 1e-6;

// Chains stage tallies into a report. Throws InvariantError when a stage's
// input differs from the previous stage's kept total, or a tally removes more
// than it received.
FunnelReport build_funnel(std::span<const StageTally> stage_logs);

}  // namespace redforge
