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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "redforge/bridge.hpp"
#include "redforge/cluster.hpp"
#include "redforge/corpus.hpp"
#include "redforge/quality.hpp"
#include "redforge/segmenter.hpp"

namespace redforge::pipeline {

// Rate for VAD, embeddings, transcription and MOS. Enhancement and roll-off
// run at the asset's own rate.
inline constexpr int kAnalysisRate = 16000;

enum class Stage { kIngest, kEnhance, kSegment, kCluster, kTranscribe, kFilter };
inline constexpr Stage kStages[] = {Stage::kIngest,  Stage::kEnhance,
                                    Stage::kSegment, Stage::kCluster,
                                    Stage::kTranscribe, Stage::kFilter};
std::string to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view name);

enum class VadBackend { kEnergy, kPlugin };
enum class RolloffSource { kEnhanced, kOriginal };

struct PluginConfig {
  std::string cmd;
  double timeout_s = bridge::kDefaultCallTimeout;
};

struct PipelineConfig {
  std::vector<std::string> inputs;  // glob patterns
  std::filesystem::path workspace;
  int workers = 1;
  std::uint64_t seed = 0;

  seg::SegmentationPolicy segmentation;
  VadBackend vad_backend = VadBackend::kEnergy;
  double vad_threshold_db = seg::kDefaultVadThresholdDb;

  cluster::ClusterParams cluster;  // cluster.seed is derived from seed
  double chunk_len = 3.0;
  double chunk_hop = 1.5;

  quality::FilterThresholds filter;
  RolloffSource rolloff_source = RolloffSource::kEnhanced;

  std::map<bridge::Capability, PluginConfig> plugins;

  // Throws ConfigError.
  void validate() const;
  OrderedJson to_json() const;
  // Unknown keys are rejected; absent keys keep their defaults.
  static PipelineConfig from_json(const Json& j);
};

PipelineConfig load_config(const std::filesystem::path& path);

// REDFORGE_WORKERS when set (must be a positive integer), else configured.
int resolve_workers(int configured);

// Sorted, de-duplicated matches of every pattern. A pattern with no glob
// metacharacters must name an existing file.
std::vector<std::string> expand_inputs(const std::vector<std::string>& patterns);

// Workspace layout.
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path manifest(Stage s) const;
  std::filesystem::path done_marker(Stage s) const;
  std::filesystem::path stats(Stage s) const;
  std::filesystem::path enhanced_dir() const { return root / "enhanced"; }
  std::filesystem::path enhanced_audio(const std::string& asset_id) const;
  std::filesystem::path cluster_model() const { return root / "cluster_model.json"; }
  std::filesystem::path embeddings() const { return root / "embeddings.bin"; }
  std::filesystem::path final_manifest() const { return root / "final.manifest.jsonl"; }
  std::filesystem::path funnel_json() const { return root / "funnel.json"; }
  std::filesystem::path funnel_table() const { return root / "funnel.txt"; }
  std::filesystem::path scratch() const { return root / "tmp"; }

  bool completed(Stage s) const;
  std::optional<std::string> done_fingerprint(Stage s) const;
};

// Stage fingerprint: covers the config keys the stage reads and the
// fingerprint of the stage before it, so upstream changes invalidate
// downstream checkpoints.
std::string stage_fingerprint(const PipelineConfig& config, Stage s);

struct StageResult {
  Stage stage = Stage::kIngest;
  bool resumed = false;  // skipped because a matching checkpoint existed
  StageTally tally;
};

using ProgressFn = std::function<void(const std::string&)>;

// Runs one stage, reusing its checkpoint when the fingerprint matches.
// Inputs come from the previous stage's manifest, which must be complete.
StageResult run_stage(const PipelineConfig& config, Stage s,
                      const ProgressFn& progress = {});

struct RunResult {
  std::vector<StageResult> stages;
  FunnelReport funnel;
  std::filesystem::path final_manifest;
};

// Every stage in order, then the funnel report.
RunResult run_pipeline(const PipelineConfig& config,
                       const ProgressFn& progress = {});

// Funnel from the completed stages' stats files (pipeline order). Throws
// Error when no stage after ingest has completed.
FunnelReport stats(const std::filesystem::path& workspace);

// Reason key for non-speech audio dropped by segmentation.
inline constexpr const char* kNonSpeechReason = "non_speech";

OrderedJson tally_to_json(const StageTally& t);
StageTally tally_from_json(const Json& j);

}  // namespace redforge::pipeline
