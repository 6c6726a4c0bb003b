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

#include "redforge/pipeline.hpp"

#include <glob.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "redforge/dsp.hpp"
#include "redforge/error.hpp"
#include "redforge/hash.hpp"
#include "redforge/pool.hpp"
#include "redforge/wav.hpp"

namespace redforge::pipeline {

namespace fs = std::filesystem;
using bridge::Capability;

namespace {

constexpr const char* kStageNames[] = {"ingest",  "enhance",    "segment",
                                       "cluster", "transcribe", "filter"};

// ---------------------------------------------------------------------------
// Config parsing helpers

void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown config key '" + where + "." + key + "'");
  }
}

double get_number(const Json& j, const char* key, double fallback,
                  const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) {
    throw ConfigError("config key '" + where + "." + key + "' must be a number");
  }
  return j[key].get<double>();
}

std::int64_t get_integer(const Json& j, const char* key, std::int64_t fallback,
                         const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) {
    throw ConfigError("config key '" + where + "." + key + "' must be an integer");
  }
  return j[key].get<std::int64_t>();
}

std::string get_string(const Json& j, const char* key, const std::string& fallback,
                       const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) {
    throw ConfigError("config key '" + where + "." + key + "' must be a string");
  }
  return j[key].get<std::string>();
}

// ---------------------------------------------------------------------------
// Files

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + tmp.string());
    f << text;
    if (!f) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_done(const Workspace& ws, Stage s, const std::string& fingerprint) {
  OrderedJson j;
  j["stage"] = to_string(s);
  j["fingerprint"] = fingerprint;
  write_text_atomic(ws.done_marker(s), j.dump() + "\n");
}

void write_stats(const Workspace& ws, Stage s, const StageTally& t,
                 const OrderedJson& extra = OrderedJson::object()) {
  OrderedJson j = tally_to_json(t);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_text_atomic(ws.stats(s), j.dump(2) + "\n");
}

StageTally read_stats(const Workspace& ws, Stage s) {
  try {
    return tally_from_json(Json::parse(read_text(ws.stats(s))));
  } catch (const Json::exception& e) {
    throw Error("malformed stats file " + ws.stats(s).string() + ": " + e.what());
  }
}

Audio to_analysis(const Audio& a) {
  return a.sample_rate == kAnalysisRate ? a : resample(a, kAnalysisRate);
}

double hours(double seconds) { return seconds / 3600.0; }

double asset_hours(const std::vector<AudioAsset>& assets) {
  double s = 0.0;
  for (const auto& a : assets) s += a.duration();
  return hours(s);
}

std::map<std::string, AudioAsset> index_assets(const std::vector<AudioAsset>& assets) {
  std::map<std::string, AudioAsset> m;
  for (const auto& a : assets) m.emplace(a.asset_id, a);
  return m;
}

const AudioAsset& lookup(const std::map<std::string, AudioAsset>& m,
                         const std::string& id, const char* stage) {
  const auto it = m.find(id);
  if (it == m.end()) {
    throw StageError(stage, id, "segment refers to an asset missing from the enhance manifest");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Providers, one set per worker

class Providers {
 public:
  Providers(const PipelineConfig& config, const Workspace& ws, int workers)
      : config_(config), ws_(ws), slots_(static_cast<std::size_t>(std::max(1, workers))) {}

  bridge::Provider& get(int worker, Capability cap) {
    Slot& slot = slots_[static_cast<std::size_t>(worker)];
    const bool plugin = cap == Capability::kVad
                            ? config_.vad_backend == VadBackend::kPlugin
                            : config_.plugins.count(cap) > 0;
    if (!plugin) {
      if (!slot.builtin) {
        slot.builtin = std::make_unique<bridge::BuiltinProvider>();
        slot.builtin->vad_threshold_db = config_.vad_threshold_db;
      }
      return *slot.builtin;
    }
    auto& p = slot.plugins[cap];
    if (!p) {
      const PluginConfig& pc = config_.plugins.at(cap);
      bridge::PluginSpec spec;
      spec.cmd = pc.cmd;
      spec.timeout_s = pc.timeout_s;
      spec.scratch_dir = ws_.scratch() / ("w" + std::to_string(worker));
      p = std::make_unique<bridge::PluginProvider>(spec);
      if (!p->handshake().has(cap)) {
        throw ProtocolError("plugin '" + pc.cmd + "' configured for " + bridge::to_string(cap) +
                            " does not declare it");
      }
    }
    return *p;
  }

 private:
  struct Slot {
    std::unique_ptr<bridge::BuiltinProvider> builtin;
    std::map<Capability, std::unique_ptr<bridge::PluginProvider>> plugins;
  };
  const PipelineConfig& config_;
  const Workspace& ws_;
  std::vector<Slot> slots_;
};

// Enhanced asset audio at the native rate and the analysis rate, one asset
// per worker at a time.
struct AssetAudio {
  std::string asset_id;
  Audio native;
  Audio analysis;
  std::optional<Audio> original;
};

SegmentRecord failed(SegmentRecord r, const std::string& code) {
  r.reject_reason = RejectReason::kPluginFailure;
  r.extra["plugin_error"] = code;
  return r;
}

// ---------------------------------------------------------------------------
// Stages

struct Context {
  const PipelineConfig& config;
  Workspace ws;
  int workers;
  std::string fingerprint;
  const ProgressFn& progress;
  // Extra keys for the stage's stats file.
  mutable OrderedJson stats_extra = OrderedJson::object();

  void say(const std::string& msg) const {
    if (progress) progress(msg);
  }
};

StageTally run_ingest(const Context& ctx) {
  const auto files = expand_inputs(ctx.config.inputs);
  std::vector<AudioAsset> assets;
  assets.reserve(files.size());
  for (const auto& path : files) {
    AudioAsset a;
    WavInfo info;
    std::uint64_t size = 0;
    try {
      info = read_wav_info(path);
      size = fs::file_size(path);
    } catch (const std::exception& e) {
      throw StageError("ingest", path, e.what());
    }
    a.asset_id = make_asset_id(path, size);
    a.path = path;
    a.sample_rate = info.sample_rate;
    a.num_samples = info.num_frames;
    a.channel_count = 1;
    if (info.channels != 1) a.extra["source_channels"] = info.channels;
    a.validate();
    assets.push_back(std::move(a));
  }
  write_asset_manifest(assets, ctx.ws.manifest(Stage::kIngest));
  StageTally t;
  t.stage_name = "ingest";
  t.input_hours = asset_hours(assets);
  t.input_count = static_cast<std::int64_t>(assets.size());
  ctx.say("ingest: " + std::to_string(assets.size()) + " assets");
  return t;
}

StageTally run_enhance(const Context& ctx) {
  const auto assets = read_asset_manifest(ctx.ws.manifest(Stage::kIngest));
  fs::create_directories(ctx.ws.enhanced_dir());
  Providers providers(ctx.config, ctx.ws, ctx.workers);
  struct Outcome {
    bool ok = true;
    std::string code;
  };
  const auto outcomes = parallel_map<Outcome>(
      assets.size(), ctx.workers, [&](std::size_t i, int w) -> Outcome {
        const AudioAsset& a = assets[i];
        const fs::path out = ctx.ws.enhanced_audio(a.asset_id);
        const fs::path fp_file = out.string() + ".fp";
        if (fs::exists(out) && fs::exists(fp_file) && read_text(fp_file) == ctx.fingerprint) {
          return {};
        }
        Audio in;
        try {
          in = read_wav(a.path);
        } catch (const std::exception& e) {
          throw StageError("enhance", a.asset_id, e.what());
        }
        if (in.samples.size() != a.num_samples || in.sample_rate != a.sample_rate) {
          throw StageError("enhance", a.asset_id, "audio changed since ingest");
        }
        Audio enhanced;
        try {
          enhanced = providers.get(w, Capability::kEnhance).enhance(in);
          bridge::check_enhance(in, enhanced);
        } catch (const bridge::CallError& e) {
          return {false, e.code()};
        }
        const fs::path tmp = out.string() + ".tmp";
        write_wav(tmp, enhanced, SampleFormat::kFloat32);
        fs::rename(tmp, out);
        write_text_atomic(fp_file, ctx.fingerprint);
        return {};
      });

  std::vector<AudioAsset> kept;
  StageTally t;
  t.stage_name = "enhance";
  t.input_hours = asset_hours(assets);
  t.input_count = static_cast<std::int64_t>(assets.size());
  for (std::size_t i = 0; i < assets.size(); ++i) {
    if (outcomes[i].ok) {
      AudioAsset a = assets[i];
      a.advance(StageState::kEnhanced);
      kept.push_back(std::move(a));
      continue;
    }
    auto& r = t.reasons[to_string(RejectReason::kPluginFailure)];
    ++r.count;
    r.hours += hours(assets[i].duration());
    ++t.removed_count;
    t.removed_hours += hours(assets[i].duration());
  }
  write_asset_manifest(kept, ctx.ws.manifest(Stage::kEnhance));
  ctx.say("enhance: " + std::to_string(kept.size()) + " of " + std::to_string(assets.size()) +
          " assets enhanced");
  return t;
}

StageTally run_segment(const Context& ctx) {
  const auto assets = read_asset_manifest(ctx.ws.manifest(Stage::kEnhance));
  Providers providers(ctx.config, ctx.ws, ctx.workers);
  struct Outcome {
    bool ok = true;
    std::vector<SegmentRecord> records;
  };
  const auto outcomes = parallel_map<Outcome>(
      assets.size(), ctx.workers, [&](std::size_t i, int w) -> Outcome {
        const AudioAsset& a = assets[i];
        if (a.num_samples == 0) return {};
        Audio analysis;
        try {
          analysis = to_analysis(read_wav(ctx.ws.enhanced_audio(a.asset_id)));
        } catch (const std::exception& e) {
          throw StageError("segment", a.asset_id, e.what());
        }
        bridge::VadResult vad;
        try {
          auto& p = providers.get(w, Capability::kVad);
          vad = p.vad(analysis);
          bridge::check_vad(analysis, vad, p.handshake().vad_frame_shift);
        } catch (const bridge::CallError&) {
          return {false, {}};
        }
        seg::VadTrack track{std::move(vad.decisions), vad.frame_shift, a.duration()};
        const auto split = seg::segment_track(track, ctx.config.segmentation);
        Outcome out;
        const auto emit = [&](const seg::Interval& iv, bool rejected) {
          SegmentRecord r;
          r.asset_id = a.asset_id;
          r.start = quantize_time(iv.start);
          r.end = quantize_time(iv.end);
          r.segment_id = make_segment_id(a.asset_id, r.start, r.end);
          if (rejected) r.reject_reason = RejectReason::kDuration;
          r.validate(a.duration());
          out.records.push_back(std::move(r));
        };
        for (const auto& iv : split.kept) emit(iv, false);
        for (const auto& iv : split.rejected) emit(iv, true);
        std::sort(out.records.begin(), out.records.end(),
                  [](const SegmentRecord& x, const SegmentRecord& y) { return x.start < y.start; });
        return out;
      });

  std::vector<SegmentRecord> all;
  StageTally t;
  t.stage_name = "segment";
  t.input_hours = asset_hours(assets);
  double kept_hours = 0.0;
  ReasonTally duration;
  ReasonTally plugin;
  for (std::size_t i = 0; i < assets.size(); ++i) {
    if (!outcomes[i].ok) {
      ++plugin.count;
      plugin.hours += hours(assets[i].duration());
      continue;
    }
    for (const auto& r : outcomes[i].records) {
      if (r.rejected()) {
        ++duration.count;
        duration.hours += hours(r.length());
      } else {
        kept_hours += hours(r.length());
      }
      all.push_back(r);
    }
  }
  t.input_count = static_cast<std::int64_t>(all.size()) + plugin.count;
  t.removed_count = duration.count + plugin.count;
  t.removed_hours = t.input_hours - kept_hours;
  t.reasons[to_string(RejectReason::kDuration)] = duration;
  if (plugin.count > 0) t.reasons[to_string(RejectReason::kPluginFailure)] = plugin;
  t.reasons[kNonSpeechReason] = {0, std::max(0.0, t.removed_hours - duration.hours - plugin.hours)};
  write_manifest(all, ctx.ws.manifest(Stage::kSegment));
  ctx.say("segment: " + std::to_string(all.size() - static_cast<std::size_t>(duration.count)) +
          " segments kept, " + std::to_string(duration.count) + " outside the duration bounds");
  return t;
}

StageTally run_cluster(const Context& ctx) {
  const auto records = accepted(read_manifest(ctx.ws.manifest(Stage::kSegment)));
  const auto assets = index_assets(read_asset_manifest(ctx.ws.manifest(Stage::kEnhance)));
  const auto chunks = cluster::chunk_segments(records, ctx.config.chunk_len, ctx.config.chunk_hop);
  Providers providers(ctx.config, ctx.ws, ctx.workers);

  // Chunks grouped by asset, in manifest order.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::map<std::string, std::size_t> record_index;
  for (std::size_t i = 0; i < records.size(); ++i) record_index[records[i].segment_id] = i;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const auto& id = records[record_index.at(chunks[c].segment_id)].asset_id;
    if (groups.empty() || groups.back().first != id) groups.push_back({id, {}});
    groups.back().second.push_back(c);
  }

  struct ChunkOutcome {
    std::vector<double> embedding;
    std::string error;  // plugin error code when the call failed
  };
  const auto grouped = parallel_map<std::vector<ChunkOutcome>>(
      groups.size(), ctx.workers, [&](std::size_t g, int w) {
        const AudioAsset& a = lookup(assets, groups[g].first, "cluster");
        Audio analysis;
        try {
          analysis = to_analysis(read_wav(ctx.ws.enhanced_audio(a.asset_id)));
        } catch (const std::exception& e) {
          throw StageError("cluster", a.asset_id, e.what());
        }
        std::vector<ChunkOutcome> out;
        for (std::size_t c : groups[g].second) {
          ChunkOutcome o;
          try {
            auto& p = providers.get(w, Capability::kEmbed);
            o.embedding = p.embed(slice(analysis, chunks[c].start, chunks[c].end));
            bridge::check_embed(o.embedding, static_cast<std::size_t>(*p.handshake().embedding_dim));
            // Rounded to the cache precision so fresh and cached runs agree.
            for (double& v : o.embedding) v = static_cast<double>(static_cast<float>(v));
          } catch (const bridge::CallError& e) {
            o.embedding.clear();
            o.error = e.code();
          }
          out.push_back(std::move(o));
        }
        return out;
      });

  std::vector<ChunkOutcome> per_chunk(chunks.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t k = 0; k < groups[g].second.size(); ++k) {
      per_chunk[groups[g].second[k]] = grouped[g][k];
    }
  }
  std::map<std::string, std::string> failed_segments;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    if (!per_chunk[c].error.empty()) failed_segments.emplace(chunks[c].segment_id, per_chunk[c].error);
  }

  std::vector<cluster::Chunk> good_chunks;
  std::vector<std::string> keys;
  std::vector<std::vector<double>> rows;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    if (failed_segments.count(chunks[c].segment_id)) continue;
    good_chunks.push_back(chunks[c]);
    keys.push_back(chunks[c].chunk_id());
    rows.push_back(per_chunk[c].embedding);
  }
  const Matrix embeddings = rows.empty() ? Matrix() : Matrix::from_rows(rows);
  cluster::write_embedding_cache(ctx.ws.embeddings(), keys, embeddings);

  std::vector<SegmentRecord> good;
  std::vector<SegmentRecord> plugin_failed;
  for (const auto& r : records) {
    const auto it = failed_segments.find(r.segment_id);
    if (it == failed_segments.end()) {
      good.push_back(r);
    } else {
      plugin_failed.push_back(failed(r, it->second));
    }
  }

  cluster::ClusterModel model;
  model.params = ctx.config.cluster;
  model.params.seed = mix_seed(ctx.config.seed, "cluster");
  std::vector<SegmentRecord> kept;
  std::vector<SegmentRecord> rejected;
  if (embeddings.rows() > 0) {
    const std::size_t n = embeddings.rows();
    const int k = model.params.k_init > 0
                      ? static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(model.params.k_init)))
                      : cluster::default_k(n);
    model = cluster::kmeans(embeddings, k, model.params);
    model = cluster::merge_clusters(std::move(model), model.params.merge_threshold);
    model.validate();
    const auto decisions = cluster::attribute_speakers(model, good_chunks);
    cluster::apply_decisions(decisions, good);
    auto split = cluster::filter_outliers(model, good, good_chunks, embeddings,
                                          model.params.outlier_threshold);
    kept = std::move(split.kept);
    rejected = std::move(split.rejected);
  }
  write_text_atomic(ctx.ws.cluster_model(), model.to_json().dump(2) + "\n");
  rejected.insert(rejected.end(), plugin_failed.begin(), plugin_failed.end());

  std::vector<SegmentRecord> all = kept;
  all.insert(all.end(), rejected.begin(), rejected.end());
  std::sort(all.begin(), all.end(), [&](const SegmentRecord& x, const SegmentRecord& y) {
    return record_index.at(x.segment_id) < record_index.at(y.segment_id);
  });
  write_manifest(all, ctx.ws.manifest(Stage::kCluster));
  ctx.say("cluster: " + std::to_string(model.centroids.size()) + " speakers, " +
          std::to_string(kept.size()) + " of " + std::to_string(records.size()) + " segments kept");
  return quality::summarize("cluster", kept, rejected);
}

StageTally run_transcribe(const Context& ctx) {
  const auto records = accepted(read_manifest(ctx.ws.manifest(Stage::kCluster)));
  const auto assets = index_assets(read_asset_manifest(ctx.ws.manifest(Stage::kEnhance)));
  Providers providers(ctx.config, ctx.ws, ctx.workers);
  std::vector<AssetAudio> cache(static_cast<std::size_t>(std::max(1, ctx.workers)));
  const bool from_original = ctx.config.rolloff_source == RolloffSource::kOriginal;

  const auto out = parallel_map<SegmentRecord>(
      records.size(), ctx.workers, [&](std::size_t i, int w) {
        SegmentRecord r = records[i];
        const AudioAsset& a = lookup(assets, r.asset_id, "transcribe");
        AssetAudio& c = cache[static_cast<std::size_t>(w)];
        if (c.asset_id != a.asset_id) {
          try {
            c.native = read_wav(ctx.ws.enhanced_audio(a.asset_id));
            c.analysis = to_analysis(c.native);
            c.original = from_original ? std::optional<Audio>(read_wav(a.path)) : std::nullopt;
          } catch (const std::exception& e) {
            c.asset_id.clear();
            throw StageError("transcribe", a.asset_id, e.what());
          }
          c.asset_id = a.asset_id;
        }
        const Audio segment = slice(c.analysis, r.start, r.end);
        try {
          const auto tr = providers.get(w, Capability::kTranscribe).transcribe(segment);
          bridge::check_transcribe(tr);
          const double mos = providers.get(w, Capability::kMos).mos(segment);
          bridge::check_mos(mos);
          r.transcript = tr.text;
          r.asr_confidence = tr.confidence;
          r.mos_score = mos;
        } catch (const bridge::CallError& e) {
          return failed(std::move(r), e.code());
        }
        const Audio seg = slice(from_original ? *c.original : c.native, r.start, r.end);
        r.rolloff_hz = dsp::signal_rolloff(seg.samples, seg.sample_rate);
        return r;
      });

  std::vector<SegmentRecord> kept;
  std::vector<SegmentRecord> rejected;
  for (const auto& r : out) (r.rejected() ? rejected : kept).push_back(r);
  write_manifest(out, ctx.ws.manifest(Stage::kTranscribe));
  ctx.say("transcribe: " + std::to_string(kept.size()) + " segments annotated");
  return quality::summarize("transcribe", kept, rejected);
}

StageTally run_filter(const Context& ctx) {
  const auto records = accepted(read_manifest(ctx.ws.manifest(Stage::kTranscribe)));
  const auto result = quality::apply_filters(records, ctx.config.filter);
  std::set<std::string> kept_ids;
  for (const auto& r : result.kept) kept_ids.insert(r.segment_id);
  std::map<std::string, const SegmentRecord*> rejected_by_id;
  for (const auto& r : result.rejected) rejected_by_id[r.segment_id] = &r;
  std::vector<SegmentRecord> all;
  all.reserve(records.size());
  for (const auto& r : records) {
    all.push_back(kept_ids.count(r.segment_id) ? r : *rejected_by_id.at(r.segment_id));
  }
  write_manifest(all, ctx.ws.manifest(Stage::kFilter));
  write_manifest(result.kept, ctx.ws.final_manifest());
  ctx.stats_extra["all_failures"] = OrderedJson(result.all_failures);
  ctx.say("filter: " + std::to_string(result.kept.size()) + " of " +
          std::to_string(records.size()) + " segments kept");
  return quality::summarize("filter", result.kept, result.rejected);
}

void write_funnel(const Workspace& ws) {
  const FunnelReport report = stats(ws.root);
  write_text_atomic(ws.funnel_json(), report.to_json().dump(2) + "\n");
  write_text_atomic(ws.funnel_table(), report.to_table());
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Stage s) { return kStageNames[static_cast<std::size_t>(s)]; }

std::optional<Stage> parse_stage(std::string_view name) {
  for (Stage s : kStages) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

void PipelineConfig::validate() const {
  if (workspace.empty()) throw ConfigError("workspace is required");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  segmentation.validate();
  filter.validate();
  if (cluster.k_init < 0) throw ConfigError("cluster.k_init must be >= 0");
  if (!(cluster.merge_threshold >= -1.0 && cluster.merge_threshold <= 1.0)) {
    throw ConfigError("cluster.merge_threshold must lie in [-1, 1]");
  }
  if (!(cluster.outlier_threshold >= -1.0 && cluster.outlier_threshold <= 1.0)) {
    throw ConfigError("cluster.outlier_threshold must lie in [-1, 1]");
  }
  if (cluster.max_iters < 1) throw ConfigError("cluster.max_iters must be >= 1");
  if (!(cluster.tol >= 0.0)) throw ConfigError("cluster.tol must be >= 0");
  if (!(chunk_len > 0.0)) throw ConfigError("cluster.chunk_len must be positive");
  if (!(chunk_hop > 0.0)) throw ConfigError("cluster.chunk_hop must be positive");
  if (vad_backend == VadBackend::kPlugin && !plugins.count(Capability::kVad)) {
    throw ConfigError("vad.backend 'plugin' requires plugins.vad.cmd");
  }
  for (const auto& [cap, p] : plugins) {
    if (p.cmd.empty()) throw ConfigError("plugins." + bridge::to_string(cap) + ".cmd is empty");
    if (!(p.timeout_s > 0.0)) {
      throw ConfigError("plugins." + bridge::to_string(cap) + ".timeout_s must be positive");
    }
  }
}

OrderedJson PipelineConfig::to_json() const {
  OrderedJson j;
  j["inputs"] = inputs;
  j["workspace"] = workspace.string();
  j["workers"] = workers;
  j["seed"] = seed;
  j["segmentation"] = {{"merge_gap", segmentation.merge_gap},
                       {"boundary_pad", segmentation.boundary_pad},
                       {"min_dur", segmentation.min_dur},
                       {"max_dur", segmentation.max_dur}};
  j["vad"] = {{"backend", vad_backend == VadBackend::kEnergy ? "energy" : "plugin"},
              {"threshold_db", vad_threshold_db}};
  j["cluster"] = {{"k_init", cluster.k_init},
                  {"merge_threshold", cluster.merge_threshold},
                  {"outlier_threshold", cluster.outlier_threshold},
                  {"max_iters", cluster.max_iters},
                  {"tol", cluster.tol},
                  {"chunk_len", chunk_len},
                  {"chunk_hop", chunk_hop}};
  j["filter"] = {{"mos_min", filter.mos_min},
                 {"rolloff_min_hz", filter.rolloff_min_hz},
                 {"asr_conf_min", filter.asr_conf_min},
                 {"rolloff_source",
                  rolloff_source == RolloffSource::kEnhanced ? "enhanced" : "original"}};
  j["plugins"] = OrderedJson::object();
  for (const auto& [cap, p] : plugins) {
    j["plugins"][bridge::to_string(cap)] = {{"cmd", p.cmd}, {"timeout_s", p.timeout_s}};
  }
  return j;
}

PipelineConfig PipelineConfig::from_json(const Json& j) {
  check_keys(j, {"inputs", "workspace", "workers", "seed", "segmentation", "vad", "cluster",
                 "filter", "plugins"},
             "config");
  PipelineConfig c;
  if (j.contains("inputs")) {
    const Json& in = j["inputs"];
    if (in.is_string()) {
      c.inputs.push_back(in.get<std::string>());
    } else if (in.is_array()) {
      for (const auto& p : in) {
        if (!p.is_string()) throw ConfigError("config key 'inputs' must hold strings");
        c.inputs.push_back(p.get<std::string>());
      }
    } else {
      throw ConfigError("config key 'inputs' must be a string or an array of strings");
    }
  }
  c.workspace = get_string(j, "workspace", "", "config");
  c.workers = static_cast<int>(get_integer(j, "workers", 1, "config"));
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) {
      throw ConfigError("config key 'seed' must be a non-negative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("segmentation")) {
    const Json& s = j["segmentation"];
    check_keys(s, {"merge_gap", "boundary_pad", "min_dur", "max_dur"}, "segmentation");
    c.segmentation.merge_gap = get_number(s, "merge_gap", c.segmentation.merge_gap, "segmentation");
    c.segmentation.boundary_pad =
        get_number(s, "boundary_pad", c.segmentation.boundary_pad, "segmentation");
    c.segmentation.min_dur = get_number(s, "min_dur", c.segmentation.min_dur, "segmentation");
    c.segmentation.max_dur = get_number(s, "max_dur", c.segmentation.max_dur, "segmentation");
  }
  if (j.contains("vad")) {
    const Json& v = j["vad"];
    check_keys(v, {"backend", "threshold_db"}, "vad");
    const std::string backend = get_string(v, "backend", "energy", "vad");
    if (backend == "energy") {
      c.vad_backend = VadBackend::kEnergy;
    } else if (backend == "plugin") {
      c.vad_backend = VadBackend::kPlugin;
    } else {
      throw ConfigError("vad.backend must be 'energy' or 'plugin'");
    }
    c.vad_threshold_db = get_number(v, "threshold_db", c.vad_threshold_db, "vad");
  }
  if (j.contains("cluster")) {
    const Json& k = j["cluster"];
    check_keys(k, {"k_init", "merge_threshold", "outlier_threshold", "max_iters", "tol",
                   "chunk_len", "chunk_hop"},
               "cluster");
    c.cluster.k_init = static_cast<int>(get_integer(k, "k_init", c.cluster.k_init, "cluster"));
    c.cluster.merge_threshold =
        get_number(k, "merge_threshold", c.cluster.merge_threshold, "cluster");
    c.cluster.outlier_threshold =
        get_number(k, "outlier_threshold", c.cluster.outlier_threshold, "cluster");
    c.cluster.max_iters =
        static_cast<int>(get_integer(k, "max_iters", c.cluster.max_iters, "cluster"));
    c.cluster.tol = get_number(k, "tol", c.cluster.tol, "cluster");
    c.chunk_len = get_number(k, "chunk_len", c.chunk_len, "cluster");
    c.chunk_hop = get_number(k, "chunk_hop", c.chunk_hop, "cluster");
  }
  if (j.contains("filter")) {
    const Json& f = j["filter"];
    check_keys(f, {"mos_min", "rolloff_min_hz", "asr_conf_min", "rolloff_source"}, "filter");
    c.filter.mos_min = get_number(f, "mos_min", c.filter.mos_min, "filter");
    c.filter.rolloff_min_hz = get_number(f, "rolloff_min_hz", c.filter.rolloff_min_hz, "filter");
    c.filter.asr_conf_min = get_number(f, "asr_conf_min", c.filter.asr_conf_min, "filter");
    const std::string src = get_string(f, "rolloff_source", "enhanced", "filter");
    if (src == "enhanced") {
      c.rolloff_source = RolloffSource::kEnhanced;
    } else if (src == "original") {
      c.rolloff_source = RolloffSource::kOriginal;
    } else {
      throw ConfigError("filter.rolloff_source must be 'enhanced' or 'original'");
    }
  }
  if (j.contains("plugins")) {
    const Json& p = j["plugins"];
    if (!p.is_object()) throw ConfigError("config key 'plugins' must be an object");
    for (const auto& [name, spec] : p.items()) {
      const auto cap = bridge::parse_capability(name);
      if (!cap) throw ConfigError("unknown plugin capability 'plugins." + name + "'");
      check_keys(spec, {"cmd", "timeout_s"}, "plugins." + name);
      PluginConfig pc;
      pc.cmd = get_string(spec, "cmd", "", "plugins." + name);
      pc.timeout_s = get_number(spec, "timeout_s", pc.timeout_s, "plugins." + name);
      c.plugins[*cap] = pc;
    }
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  Json j;
  try {
    j = Json::parse(f);
  } catch (const Json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return PipelineConfig::from_json(j);
}

int resolve_workers(int configured) {
  const char* env = std::getenv("REDFORGE_WORKERS");
  if (!env || !*env) return configured;
  int v = 0;
  const char* end = env + std::strlen(env);
  const auto [ptr, ec] = std::from_chars(env, end, v);
  if (ec != std::errc() || ptr != end || v < 1) {
    throw ConfigError(std::string("REDFORGE_WORKERS must be a positive integer, got '") + env + "'");
  }
  return v;
}

std::vector<std::string> expand_inputs(const std::vector<std::string>& patterns) {
  std::set<std::string> files;
  for (const auto& pattern : patterns) {
    if (pattern.find_first_of("*?[") == std::string::npos) {
      if (!fs::is_regular_file(pattern)) throw ConfigError("input file not found: " + pattern);
      files.insert(fs::absolute(pattern).lexically_normal().string());
      continue;
    }
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) {
        if (fs::is_regular_file(g.gl_pathv[i])) {
          files.insert(fs::absolute(g.gl_pathv[i]).lexically_normal().string());
        }
      }
    }
    ::globfree(&g);
    if (rc != 0 && rc != GLOB_NOMATCH) throw ConfigError("cannot expand input pattern " + pattern);
  }
  return {files.begin(), files.end()};
}

fs::path Workspace::manifest(Stage s) const {
  return root / (to_string(s) + ".manifest.jsonl");
}
fs::path Workspace::done_marker(Stage s) const { return root / (to_string(s) + ".done"); }
fs::path Workspace::stats(Stage s) const { return root / (to_string(s) + ".stats.json"); }
fs::path Workspace::enhanced_audio(const std::string& asset_id) const {
  return enhanced_dir() / (asset_id + ".wav");
}

std::optional<std::string> Workspace::done_fingerprint(Stage s) const {
  if (!fs::exists(done_marker(s))) return std::nullopt;
  try {
    const Json j = Json::parse(read_text(done_marker(s)));
    return j.at("fingerprint").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool Workspace::completed(Stage s) const {
  return done_fingerprint(s).has_value() && fs::exists(manifest(s)) && fs::exists(stats(s));
}

std::string stage_fingerprint(const PipelineConfig& config, Stage s) {
  const OrderedJson c = config.to_json();
  std::string prev;
  std::uint64_t h = kFnvOffset;
  for (Stage cur : kStages) {
    OrderedJson part;
    part["stage"] = to_string(cur);
    part["prev"] = prev;
    const auto plugin = [&](Capability cap) -> OrderedJson {
      const auto it = config.plugins.find(cap);
      return it == config.plugins.end() ? OrderedJson() : OrderedJson(it->second.cmd);
    };
    switch (cur) {
      case Stage::kIngest: {
        OrderedJson files = OrderedJson::array();
        for (const auto& f : expand_inputs(config.inputs)) {
          files.push_back({f, fs::file_size(f)});
        }
        part["inputs"] = files;
        break;
      }
      case Stage::kEnhance:
        part["plugin"] = plugin(Capability::kEnhance);
        break;
      case Stage::kSegment:
        part["segmentation"] = c["segmentation"];
        part["vad"] = c["vad"];
        part["plugin"] = config.vad_backend == VadBackend::kPlugin ? plugin(Capability::kVad)
                                                                   : OrderedJson();
        break;
      case Stage::kCluster:
        part["cluster"] = c["cluster"];
        part["seed"] = config.seed;
        part["plugin"] = plugin(Capability::kEmbed);
        break;
      case Stage::kTranscribe:
        part["plugins"] = {plugin(Capability::kTranscribe), plugin(Capability::kMos)};
        part["rolloff_source"] = c["filter"]["rolloff_source"];
        break;
      case Stage::kFilter:
        part["filter"] = c["filter"];
        break;
    }
    h = fnv1a(part.dump(), kFnvOffset);
    prev = to_hex(h);
    if (cur == s) return prev;
  }
  return prev;
}

StageResult run_stage(const PipelineConfig& config, Stage s, const ProgressFn& progress) {
  config.validate();
  const Workspace ws{config.workspace};
  fs::create_directories(ws.root);
  const std::string fp = stage_fingerprint(config, s);
  StageResult result;
  result.stage = s;
  if (ws.completed(s) && ws.done_fingerprint(s) == fp) {
    result.resumed = true;
    result.tally = read_stats(ws, s);
    if (progress) progress(to_string(s) + ": up to date");
    if (s == Stage::kFilter && !fs::exists(ws.funnel_json())) write_funnel(ws);
    return result;
  }
  if (s != Stage::kIngest) {
    const Stage prev = static_cast<Stage>(static_cast<int>(s) - 1);
    if (!ws.completed(prev)) {
      throw Error("stage '" + to_string(s) + "' needs a completed '" + to_string(prev) +
                  "' stage in " + ws.root.string());
    }
    if (ws.done_fingerprint(prev) != stage_fingerprint(config, prev)) {
      throw Error("stage '" + to_string(prev) +
                  "' checkpoint was produced with a different configuration; rerun it first");
    }
  }
  std::error_code ec;
  fs::remove(ws.done_marker(s), ec);
  const Context ctx{config, ws, resolve_workers(config.workers), fp, progress};
  switch (s) {
    case Stage::kIngest: result.tally = run_ingest(ctx); break;
    case Stage::kEnhance: result.tally = run_enhance(ctx); break;
    case Stage::kSegment: result.tally = run_segment(ctx); break;
    case Stage::kCluster: result.tally = run_cluster(ctx); break;
    case Stage::kTranscribe: result.tally = run_transcribe(ctx); break;
    case Stage::kFilter: result.tally = run_filter(ctx); break;
  }
  write_stats(ws, s, result.tally, ctx.stats_extra);
  write_done(ws, s, fp);
  if (s == Stage::kFilter) write_funnel(ws);
  return result;
}

RunResult run_pipeline(const PipelineConfig& config, const ProgressFn& progress) {
  RunResult r;
  for (Stage s : kStages) r.stages.push_back(run_stage(config, s, progress));
  r.funnel = stats(config.workspace);
  r.final_manifest = Workspace{config.workspace}.final_manifest();
  return r;
}

FunnelReport stats(const fs::path& workspace) {
  const Workspace ws{workspace};
  std::vector<StageTally> tallies;
  for (Stage s : kStages) {
    if (s == Stage::kIngest) continue;
    if (!ws.completed(s)) break;
    tallies.push_back(read_stats(ws, s));
  }
  if (tallies.empty()) {
    throw Error("no completed stages in " + workspace.string() + " (run at least 'enhance')");
  }
  return build_funnel(tallies);
}

OrderedJson tally_to_json(const StageTally& t) {
  OrderedJson j;
  j["stage_name"] = t.stage_name;
  j["input_hours"] = t.input_hours;
  j["removed_hours"] = t.removed_hours;
  j["input_count"] = t.input_count;
  j["removed_count"] = t.removed_count;
  j["reasons"] = OrderedJson::object();
  for (const auto& [k, v] : t.reasons) j["reasons"][k] = {{"count", v.count}, {"hours", v.hours}};
  return j;
}

StageTally tally_from_json(const Json& j) {
  StageTally t;
  t.stage_name = j.at("stage_name").get<std::string>();
  t.input_hours = j.at("input_hours").get<double>();
  t.removed_hours = j.at("removed_hours").get<double>();
  t.input_count = j.at("input_count").get<std::int64_t>();
  t.removed_count = j.at("removed_count").get<std::int64_t>();
  for (const auto& [k, v] : j.at("reasons").items()) {
    t.reasons[k] = {v.at("count").get<std::int64_t>(), v.at("hours").get<double>()};
  }
  return t;
}

}  // namespace redforge::pipeline
