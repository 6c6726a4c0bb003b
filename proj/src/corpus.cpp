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

#include "redforge/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "redforge/error.hpp"
#include "redforge/hash.hpp"

namespace redforge {

namespace {

constexpr std::array<const char*, 6> kStageNames = {
    "ingested", "enhanced", "segmented", "clustered", "transcribed", "filtered"};

constexpr std::array<const char*, 7> kReasonNames = {
    "duration", "multi_speaker", "centroid_outlier", "quality",
    "bandwidth", "confidence",    "plugin_failure"};

constexpr std::array<const char*, 11> kSegmentKeys = {
    "segment_id",  "asset_id",       "start",     "end",
    "speaker_id",  "multi_speaker",  "transcript", "asr_confidence",
    "mos_score",   "rolloff_hz",     "reject_reason"};

constexpr std::array<const char*, 7> kAssetKeys = {
    "asset_id",    "path",          "sample_rate", "num_samples",
    "duration",    "channel_count", "stage_state"};

template <std::size_t N>
bool is_known(const std::array<const char*, N>& keys, const std::string& k) {
  return std::any_of(keys.begin(), keys.end(),
                     [&](const char* s) { return k == s; });
}

void append_extra(OrderedJson& out, const Json& extra) {
  // nlohmann::json objects iterate in sorted key order.
  for (auto it = extra.begin(); it != extra.end(); ++it) {
    out[it.key()] = it.value();
  }
}

Json collect_extra(const Json& j, bool (*known)(const std::string&)) {
  Json extra = Json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known(it.key())) extra[it.key()] = it.value();
  }
  return extra;
}

bool known_segment_key(const std::string& k) { return is_known(kSegmentKeys, k); }
bool known_asset_key(const std::string& k) { return is_known(kAssetKeys, k); }

template <typename T>
T required(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw InvariantError(std::string("missing required key '") + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw InvariantError(std::string("key '") + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_key(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) return std::nullopt;
  if (it->is_null()) {
    throw InvariantError(std::string("key '") + key +
                         "' is null; optional keys must be omitted");
  }
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw InvariantError(std::string("key '") + key + "' has the wrong type");
  }
}

double required_number(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw InvariantError(std::string("missing required key '") + key + "'");
  }
  if (!it->is_number()) {
    throw InvariantError(std::string("key '") + key + "' is not numeric");
  }
  return it->get<double>();
}

void write_lines(const std::vector<std::string>& lines,
                 const std::filesystem::path& destination) {
  const auto parent = destination.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw Error("destination directory does not exist: " + parent.string());
  }
  auto tmp = destination;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write manifest: " + destination.string());
    for (const auto& line : lines) out << line << '\n';
    out.flush();
    if (!out) throw Error("write failed: " + destination.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, destination, ec);
  if (ec) {
    throw Error("cannot move manifest into place: " + destination.string() +
                ": " + ec.message());
  }
}

template <typename Fn>
void for_each_line(const std::filesystem::path& source, Fn&& fn) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw ManifestError("cannot open manifest " + source.string(), 0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ManifestError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) {
      throw ManifestError("record is not a JSON object", line_no);
    }
    try {
      fn(j);
    } catch (const InvariantError& e) {
      throw ManifestError(e.what(), line_no);
    }
  }
}

std::string format_fixed(double v, int decimals) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << v;
  return os.str();
}

}  // namespace

std::string to_string(StageState s) {
  return kStageNames[static_cast<std::size_t>(s)];
}

StageState parse_stage_state(const std::string& s) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (s == kStageNames[i]) return static_cast<StageState>(i);
  }
  throw InvariantError("unknown stage_state '" + s + "'");
}

std::string to_string(RejectReason r) {
  return kReasonNames[static_cast<std::size_t>(r)];
}

RejectReason parse_reject_reason(const std::string& s) {
  for (std::size_t i = 0; i < kReasonNames.size(); ++i) {
    if (s == kReasonNames[i]) return static_cast<RejectReason>(i);
  }
  throw InvariantError("unknown reject_reason '" + s + "'");
}

void AudioAsset::advance(StageState next) {
  if (static_cast<int>(next) < static_cast<int>(stage_state)) {
    throw InvariantError("asset " + asset_id + ": cannot move from " +
                         to_string(stage_state) + " back to " +
                         to_string(next));
  }
  stage_state = next;
}

void AudioAsset::validate() const {
  if (asset_id.empty()) throw InvariantError("asset with empty asset_id");
  if (sample_rate <= 0) {
    throw InvariantError("asset " + asset_id + ": sample_rate must be positive");
  }
  if (channel_count != 1) {
    throw InvariantError("asset " + asset_id + ": channel_count must be 1");
  }
}

void SegmentRecord::validate(double parent_duration) const {
  auto fail = [&](const std::string& what) {
    throw InvariantError("segment " + segment_id + ": " + what);
  };
  if (segment_id.empty()) throw InvariantError("segment with empty segment_id");
  if (!std::isfinite(start) || !std::isfinite(end)) fail("non-finite time");
  if (start < 0.0) fail("start < 0");
  if (!(start < end)) fail("end must be greater than start");
  if (parent_duration >= 0.0 && end > parent_duration + 1e-6) {
    fail("end exceeds parent duration");
  }
  if (asr_confidence &&
      !(*asr_confidence >= 0.0 && *asr_confidence <= 1.0)) {
    fail("asr_confidence outside [0,1]");
  }
  if (mos_score && !(*mos_score >= 1.0 && *mos_score <= 5.0)) {
    fail("mos_score outside [1,5]");
  }
  if (rolloff_hz && !(std::isfinite(*rolloff_hz) && *rolloff_hz >= 0.0)) {
    fail("rolloff_hz must be a non-negative frequency");
  }
  if (!extra.is_object()) fail("extra fields must be an object");
}

double quantize_time(double seconds) {
  return std::round(seconds * 1e6) / 1e6;
}

std::string make_asset_id(const std::string& path, std::uint64_t byte_length) {
  return to_hex(fnv1a(path + '\0' + std::to_string(byte_length)));
}

std::string make_segment_id(const std::string& asset_id, double start,
                            double end) {
  const auto us = [](double t) {
    return std::to_string(std::llround(t * 1e6));
  };
  return asset_id + "-" + us(start) + "-" + us(end);
}

OrderedJson to_json(const SegmentRecord& r) {
  OrderedJson j;
  j["segment_id"] = r.segment_id;
  j["asset_id"] = r.asset_id;
  j["start"] = quantize_time(r.start);
  j["end"] = quantize_time(r.end);
  if (r.speaker_id) j["speaker_id"] = *r.speaker_id;
  j["multi_speaker"] = r.multi_speaker;
  if (r.transcript) j["transcript"] = *r.transcript;
  if (r.asr_confidence) j["asr_confidence"] = *r.asr_confidence;
  if (r.mos_score) j["mos_score"] = *r.mos_score;
  if (r.rolloff_hz) j["rolloff_hz"] = *r.rolloff_hz;
  if (r.reject_reason) j["reject_reason"] = to_string(*r.reject_reason);
  append_extra(j, r.extra);
  return j;
}

SegmentRecord segment_from_json(const Json& j) {
  SegmentRecord r;
  r.segment_id = required<std::string>(j, "segment_id");
  r.asset_id = required<std::string>(j, "asset_id");
  r.start = required_number(j, "start");
  r.end = required_number(j, "end");
  r.speaker_id = optional_key<int>(j, "speaker_id");
  r.multi_speaker = required<bool>(j, "multi_speaker");
  r.transcript = optional_key<std::string>(j, "transcript");
  r.asr_confidence = optional_key<double>(j, "asr_confidence");
  r.mos_score = optional_key<double>(j, "mos_score");
  r.rolloff_hz = optional_key<double>(j, "rolloff_hz");
  if (auto reason = optional_key<std::string>(j, "reject_reason")) {
    r.reject_reason = parse_reject_reason(*reason);
  }
  r.extra = collect_extra(j, known_segment_key);
  r.validate();
  return r;
}

OrderedJson to_json(const AudioAsset& a) {
  OrderedJson j;
  j["asset_id"] = a.asset_id;
  j["path"] = a.path.string();
  j["sample_rate"] = a.sample_rate;
  j["num_samples"] = a.num_samples;
  j["duration"] = a.duration();
  j["channel_count"] = a.channel_count;
  j["stage_state"] = to_string(a.stage_state);
  append_extra(j, a.extra);
  return j;
}

AudioAsset asset_from_json(const Json& j) {
  AudioAsset a;
  a.asset_id = required<std::string>(j, "asset_id");
  a.path = required<std::string>(j, "path");
  a.sample_rate = required<int>(j, "sample_rate");
  a.num_samples = required<std::uint64_t>(j, "num_samples");
  a.channel_count = required<int>(j, "channel_count");
  a.stage_state = parse_stage_state(required<std::string>(j, "stage_state"));
  a.extra = collect_extra(j, known_asset_key);
  a.validate();
  const double stated = required_number(j, "duration");
  if (std::abs(stated - a.duration()) > 1e-9 * std::max(1.0, a.duration())) {
    throw InvariantError("asset " + a.asset_id +
                         ": duration disagrees with num_samples/sample_rate");
  }
  return a;
}

std::size_t write_manifest(std::span<const SegmentRecord> records,
                           const std::filesystem::path& destination) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) {
    r.validate();
    lines.push_back(to_json(r).dump());
  }
  write_lines(lines, destination);
  return lines.size();
}

std::vector<SegmentRecord> read_manifest(const std::filesystem::path& source) {
  std::vector<SegmentRecord> out;
  for_each_line(source,
                [&](const Json& j) { out.push_back(segment_from_json(j)); });
  return out;
}

std::size_t write_asset_manifest(std::span<const AudioAsset> assets,
                                 const std::filesystem::path& destination) {
  std::vector<std::string> lines;
  lines.reserve(assets.size());
  for (const auto& a : assets) {
    a.validate();
    lines.push_back(to_json(a).dump());
  }
  write_lines(lines, destination);
  return lines.size();
}

std::vector<AudioAsset> read_asset_manifest(
    const std::filesystem::path& source) {
  std::vector<AudioAsset> out;
  for_each_line(source,
                [&](const Json& j) { out.push_back(asset_from_json(j)); });
  return out;
}

std::vector<SegmentRecord> accepted(std::span<const SegmentRecord> records) {
  std::vector<SegmentRecord> out;
  for (const auto& r : records) {
    if (!r.rejected()) out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------

double FunnelReport::overall_keep_rate() const {
  if (stages.empty() || stages.front().input_hours <= 0.0) return 0.0;
  return stages.back().kept_hours / stages.front().input_hours;
}

OrderedJson FunnelReport::to_json() const {
  OrderedJson doc;
  doc["stages"] = OrderedJson::array();
  for (const auto& s : stages) {
    OrderedJson e;
    e["stage_name"] = s.stage_name;
    e["input_hours"] = s.input_hours;
    e["kept_hours"] = s.kept_hours;
    e["removed_hours"] = s.removed_hours;
    e["input_count"] = s.input_count;
    e["kept_count"] = s.kept_count;
    e["removed_count"] = s.removed_count;
    e["keep_rate"] = s.keep_rate();
    OrderedJson reasons = OrderedJson::object();
    for (const auto& [name, t] : s.reasons) {
      reasons[name] = {{"count", t.count}, {"hours", t.hours}};
    }
    e["reasons"] = reasons;
    doc["stages"].push_back(e);
  }
  doc["overall_keep_rate"] = overall_keep_rate();
  return doc;
}

FunnelReport FunnelReport::from_json(const Json& j) {
  FunnelReport report;
  for (const auto& e : j.at("stages")) {
    StageEntry s;
    s.stage_name = e.at("stage_name").get<std::string>();
    s.input_hours = e.at("input_hours").get<double>();
    s.kept_hours = e.at("kept_hours").get<double>();
    s.removed_hours = e.at("removed_hours").get<double>();
    s.input_count = e.at("input_count").get<std::int64_t>();
    s.kept_count = e.at("kept_count").get<std::int64_t>();
    s.removed_count = e.at("removed_count").get<std::int64_t>();
    if (auto it = e.find("reasons"); it != e.end()) {
      for (auto r = it->begin(); r != it->end(); ++r) {
        s.reasons[r.key()] = {r.value().at("count").get<std::int64_t>(),
                              r.value().at("hours").get<double>()};
      }
    }
    report.stages.push_back(std::move(s));
  }
  return report;
}

std::string FunnelReport::to_table() const {
  const std::vector<std::string> header = {
      "stage", "input_h", "kept_h", "removed_h", "keep_rate",
      "input_n", "kept_n", "removed_n"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : stages) {
    rows.push_back({s.stage_name, format_fixed(s.input_hours, 3),
                    format_fixed(s.kept_hours, 3),
                    format_fixed(s.removed_hours, 3),
                    format_fixed(s.keep_rate(), 6),
                    std::to_string(s.input_count),
                    std::to_string(s.kept_count),
                    std::to_string(s.removed_count)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
      } else {
        os << "  " << std::right << std::setw(static_cast<int>(width[c]))
           << cells[c];
      }
    }
    os << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  for (const auto& s : stages) {
    if (s.reasons.empty()) continue;
    os << s.stage_name << " removed by reason:";
    for (const auto& [name, t] : s.reasons) {
      os << ' ' << name << '=' << t.count << " (" << format_fixed(t.hours, 3)
         << " h)";
    }
    os << '\n';
  }
  return os.str();
}

FunnelReport build_funnel(std::span<const StageTally> stage_logs) {
  FunnelReport report;
  for (std::size_t i = 0; i < stage_logs.size(); ++i) {
    const StageTally& t = stage_logs[i];
    if (t.input_hours < 0.0 || t.removed_hours < -kFunnelHoursTolerance ||
        t.removed_hours > t.input_hours + kFunnelHoursTolerance) {
      throw InvariantError("stage '" + t.stage_name +
                           "': removed hours outside [0, input]");
    }
    if (t.removed_count < 0 || t.removed_count > t.input_count) {
      throw InvariantError("stage '" + t.stage_name +
                           "': removed count outside [0, input]");
    }
    if (i > 0) {
      const StageEntry& prev = report.stages.back();
      if (std::abs(t.input_hours - prev.kept_hours) > kFunnelHoursTolerance) {
        throw InvariantError(
            "stage '" + t.stage_name + "' input " +
            format_fixed(t.input_hours, 6) + " h does not match stage '" +
            prev.stage_name + "' kept " + format_fixed(prev.kept_hours, 6) +
            " h");
      }
    }
    StageEntry e;
    e.stage_name = t.stage_name;
    e.input_hours = t.input_hours;
    e.removed_hours = std::clamp(t.removed_hours, 0.0, t.input_hours);
    e.kept_hours = t.input_hours - e.removed_hours;
    e.input_count = t.input_count;
    e.removed_count = t.removed_count;
    e.kept_count = t.input_count - t.removed_count;
    e.reasons = t.reasons;
    report.stages.push_back(std::move(e));
  }
  return report;
}

}  // namespace redforge
