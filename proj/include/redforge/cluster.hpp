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

#include "redforge/corpus.hpp"
#include "redforge/matrix.hpp"

namespace redforge::cluster {

struct Chunk {
  std::string segment_id;
  int chunk_index = 0;
  double start = 0.0;
  double end = 0.0;

  std::string chunk_id() const {
    return segment_id + "#" + std::to_string(chunk_index);
  }
  bool operator==(const Chunk&) const = default;
};

// Each segment yields ceil(max(0, len - chunk_len) / chunk_hop) + 1 chunks
// covering it; the last chunk is clipped to the segment end.
std::vector<Chunk> chunk_segments(std::span<const SegmentRecord> segments,
                                  double chunk_len, double chunk_hop);

struct ClusterParams {
  // 0 selects max(2, round(n / 20)), capped at n.
  int k_init = 0;
  double merge_threshold = 0.8;
  double outlier_threshold = 0.6;
  int max_iters = 100;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

int default_k(std::size_t n_points);

struct Centroid {
  int id = 0;
  std::vector<double> vector;  // unit norm
  bool operator==(const Centroid&) const = default;
};

struct MergeStep {
  int id_a = 0;  // survivor (lower id)
  int id_b = 0;  // absorbed
  double similarity = 0.0;
  bool operator==(const MergeStep&) const = default;
};

struct ClusterModel {
  std::vector<Centroid> centroids;              // sorted by id
  std::vector<int> assignments;                 // point index -> cluster id
  std::vector<MergeStep> merge_log;
  std::vector<double> distortion_history;       // per k-means iteration
  ClusterParams params;

  const Centroid* find(int id) const;
  std::size_t count(int id) const;
  // Max cosine similarity over all centroid pairs, -1 with < 2 centroids.
  double max_pairwise_similarity() const;
  // Throws InvariantError when an assignment points at a dead cluster or a
  // centroid is not unit norm.
  void validate() const;

  OrderedJson to_json() const;
  bool operator==(const ClusterModel&) const = default;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);
std::vector<double> normalized(std::span<const double> v);

// Rows are unit-normalized and clustered with spherical k-means (k-means++
// seeding from `seed`). Deterministic for a given (points, params).
ClusterModel kmeans(const Matrix& embeddings, int k, const ClusterParams& params);

// Repeatedly merges the most similar centroid pair while its similarity is
// strictly above merge_threshold. Ties go to the lowest (id_a, id_b) pair.
// The survivor keeps the lower id and becomes the normalized
// assignment-count-weighted mean of the two centroids.
ClusterModel merge_clusters(ClusterModel model, double merge_threshold);

struct SpeakerDecision {
  std::string segment_id;
  std::optional<int> speaker_id;
  bool multi_speaker = false;
  bool operator==(const SpeakerDecision&) const = default;
};

// chunks[i] is assigned to model.assignments[i]. Output is ordered by first
// appearance of each segment id.
std::vector<SpeakerDecision> attribute_speakers(const ClusterModel& model,
                                                std::span<const Chunk> chunks);

// Copies decisions onto records; multi-speaker segments are rejected.
void apply_decisions(std::span<const SpeakerDecision> decisions,
                     std::vector<SegmentRecord>& records);

struct OutlierSplit {
  std::vector<SegmentRecord> kept;
  std::vector<SegmentRecord> rejected;
};

// A segment is rejected iff the cosine similarity between the mean of its
// unit-normalized chunk embeddings and its speaker centroid is below
// outlier_threshold. Segments that are already rejected pass through
// untouched in `rejected`.
OutlierSplit filter_outliers(const ClusterModel& model,
                             std::span<const SegmentRecord> segments,
                             std::span<const Chunk> chunks,
                             const Matrix& chunk_embeddings,
                             double outlier_threshold);

// Binary embedding cache: little-endian uint32 dimension, uint32 count,
// then count rows of dimension float32. Row keys (chunk ids) are stored one
// per line in a sidecar file "<path>.keys".
void write_embedding_cache(const std::filesystem::path& path,
                           std::span<const std::string> keys,
                           const Matrix& embeddings);
std::pair<std::vector<std::string>, Matrix> read_embedding_cache(
    const std::filesystem::path& path);

}  // namespace redforge::cluster
