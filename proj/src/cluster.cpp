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

#include "redforge/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "redforge/error.hpp"
#include "redforge/hash.hpp"

namespace redforge::cluster {

std::vector<Chunk> chunk_segments(std::span<const SegmentRecord> segments,
                                  double chunk_len, double chunk_hop) {
  if (!(chunk_len > 0.0)) throw InvariantError("chunk_len must be positive");
  if (!(chunk_hop > 0.0)) throw InvariantError("chunk_hop must be positive");
  std::vector<Chunk> out;
  for (const auto& s : segments) {
    const double len = s.length();
    const double excess = std::max(0.0, len - chunk_len);
    // The epsilon keeps exact multiples of the hop from rounding up.
    const auto n = static_cast<int>(std::ceil(excess / chunk_hop - 1e-9)) + 1;
    for (int i = 0; i < n; ++i) {
      Chunk c;
      c.segment_id = s.segment_id;
      c.chunk_index = i;
      c.start = s.start + i * chunk_hop;
      c.end = std::min(c.start + chunk_len, s.end);
      if (i == n - 1) c.end = s.end;
      out.push_back(std::move(c));
    }
  }
  return out;
}

int default_k(std::size_t n_points) {
  if (n_points == 0) return 0;
  const int k = std::max(2, static_cast<int>(std::lround(n_points / 20.0)));
  return std::min(k, static_cast<int>(n_points));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvariantError("dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  if (!(denom > 0.0)) return 0.0;
  return dot / denom;
}

std::vector<double> normalized(std::span<const double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  std::vector<double> out(v.begin(), v.end());
  if (n > 0.0) {
    for (double& x : out) x /= n;
  }
  return out;
}

const Centroid* ClusterModel::find(int id) const {
  auto it = std::lower_bound(
      centroids.begin(), centroids.end(), id,
      [](const Centroid& c, int v) { return c.id < v; });
  return it != centroids.end() && it->id == id ? &*it : nullptr;
}

std::size_t ClusterModel::count(int id) const {
  return static_cast<std::size_t>(
      std::count(assignments.begin(), assignments.end(), id));
}

double ClusterModel::max_pairwise_similarity() const {
  double best = -1.0;
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    for (std::size_t j = i + 1; j < centroids.size(); ++j) {
      best = std::max(best, cosine_similarity(centroids[i].vector,
                                              centroids[j].vector));
    }
  }
  return best;
}

void ClusterModel::validate() const {
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    if (i > 0 && centroids[i].id <= centroids[i - 1].id) {
      throw InvariantError("centroids not sorted by unique id");
    }
    double n = 0.0;
    for (double x : centroids[i].vector) n += x * x;
    if (std::abs(std::sqrt(n) - 1.0) > 1e-6) {
      throw InvariantError("centroid " + std::to_string(centroids[i].id) +
                           " is not unit norm");
    }
  }
  for (std::size_t p = 0; p < assignments.size(); ++p) {
    if (!find(assignments[p])) {
      throw InvariantError("point " + std::to_string(p) +
                           " assigned to dead cluster " +
                           std::to_string(assignments[p]));
    }
  }
}

OrderedJson ClusterModel::to_json() const {
  OrderedJson j;
  j["params"] = {{"k_init", params.k_init},
                 {"merge_threshold", params.merge_threshold},
                 {"outlier_threshold", params.outlier_threshold},
                 {"max_iters", params.max_iters},
                 {"tol", params.tol},
                 {"seed", params.seed}};
  j["centroids"] = OrderedJson::array();
  for (const auto& c : centroids) {
    j["centroids"].push_back({{"id", c.id}, {"vector", c.vector}});
  }
  j["assignments"] = assignments;
  j["merge_log"] = OrderedJson::array();
  for (const auto& m : merge_log) {
    j["merge_log"].push_back(
        {{"id_a", m.id_a}, {"id_b", m.id_b}, {"similarity", m.similarity}});
  }
  j["distortion_history"] = distortion_history;
  return j;
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double n = 0.0;
    for (double x : m.row(r)) {
      if (!std::isfinite(x)) {
        throw InvariantError("embedding " + std::to_string(r) +
                             " has non-finite entries");
      }
      n += x * x;
    }
    if (!(n > 0.0)) {
      throw InvariantError("embedding " + std::to_string(r) + " has zero norm");
    }
    n = std::sqrt(n);
    auto dst = out.row(r);
    auto src = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) dst[c] = src[c] / n;
  }
  return out;
}

// Returns total distortion.
double assign(const Matrix& x, const std::vector<std::vector<double>>& centers,
              std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t p = 0; p < x.rows(); ++p) {
    double best = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double d = squared_distance(x.row(p), centers[k]);
      if (d < best) {
        best = d;
        best_k = static_cast<int>(k);
      }
    }
    labels[p] = best_k;
    total += best;
  }
  return total;
}

}  // namespace

ClusterModel kmeans(const Matrix& embeddings, int k,
                    const ClusterParams& params) {
  if (k <= 0) throw InvariantError("kmeans requires k > 0");
  if (embeddings.rows() == 0) throw InvariantError("kmeans on empty input");
  if (static_cast<std::size_t>(k) > embeddings.rows()) {
    throw InvariantError("kmeans requires k <= number of embeddings");
  }
  const Matrix x = normalize_rows(embeddings);
  const std::size_t n = x.rows();
  Rng rng(params.seed);

  std::vector<std::vector<double>> centers;
  std::vector<bool> chosen(n, false);
  {
    const auto first = static_cast<std::size_t>(rng.below(n));
    chosen[first] = true;
    centers.emplace_back(x.row(first).begin(), x.row(first).end());
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (centers.size() < static_cast<std::size_t>(k)) {
      double total = 0.0;
      for (std::size_t p = 0; p < n; ++p) {
        d2[p] = std::min(d2[p], squared_distance(x.row(p), centers.back()));
        if (!chosen[p]) total += d2[p];
      }
      std::size_t pick = n;
      if (total > 0.0) {
        const double r = rng.uniform() * total;
        double acc = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
          if (chosen[p]) continue;
          acc += d2[p];
          if (acc > r && d2[p] > 0.0) {
            pick = p;
            break;
          }
        }
        if (pick == n) {
          for (std::size_t p = n; p-- > 0;) {
            if (!chosen[p] && d2[p] > 0.0) {
              pick = p;
              break;
            }
          }
        }
      } else {
        for (std::size_t p = 0; p < n; ++p) {
          if (!chosen[p]) {
            pick = p;
            break;
          }
        }
      }
      chosen[pick] = true;
      centers.emplace_back(x.row(pick).begin(), x.row(pick).end());
    }
  }

  ClusterModel model;
  model.params = params;
  std::vector<int> labels(n, 0);
  const std::size_t dim = x.cols();
  for (int iter = 0; iter < params.max_iters; ++iter) {
    model.distortion_history.push_back(assign(x, centers, labels));
    std::vector<std::vector<double>> sums(centers.size(),
                                          std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t p = 0; p < n; ++p) {
      const auto row = x.row(p);
      auto& s = sums[static_cast<std::size_t>(labels[p])];
      for (std::size_t c = 0; c < dim; ++c) s[c] += row[c];
      ++counts[static_cast<std::size_t>(labels[p])];
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      double norm = 0.0;
      for (double v : sums[c]) norm += v * v;
      if (!(norm > 0.0)) continue;
      auto updated = normalized(sums[c]);
      movement = std::max(movement, std::sqrt(squared_distance(updated, centers[c])));
      centers[c] = std::move(updated);
    }
    if (movement < params.tol) break;
  }
  model.distortion_history.push_back(assign(x, centers, labels));

  // Clusters that ended up empty do not become speakers.
  std::vector<int> remap(centers.size(), -1);
  for (int label : labels) remap[static_cast<std::size_t>(label)] = 0;
  int next_id = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (remap[c] < 0) continue;
    remap[c] = next_id;
    model.centroids.push_back({next_id, centers[c]});
    ++next_id;
  }
  model.assignments.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    model.assignments[p] = remap[static_cast<std::size_t>(labels[p])];
  }
  return model;
}

ClusterModel merge_clusters(ClusterModel model, double merge_threshold) {
  std::unordered_map<int, std::size_t> counts;
  for (int a : model.assignments) ++counts[a];
  auto& cs = model.centroids;
  // sim[i][j] for i < j, indices into cs.
  const auto build = [&]() {
    std::vector<std::vector<double>> sim(cs.size(), std::vector<double>(cs.size()));
    for (std::size_t i = 0; i < cs.size(); ++i) {
      for (std::size_t j = i + 1; j < cs.size(); ++j) {
        sim[i][j] = cosine_similarity(cs[i].vector, cs[j].vector);
      }
    }
    return sim;
  };
  auto sim = build();
  while (cs.size() >= 2) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      for (std::size_t j = i + 1; j < cs.size(); ++j) {
        if (sim[i][j] > best) {
          best = sim[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    if (!(best > merge_threshold)) break;
    const int id_a = cs[bi].id;
    const int id_b = cs[bj].id;
    const double wa = static_cast<double>(counts[id_a]);
    const double wb = static_cast<double>(counts[id_b]);
    std::vector<double> merged(cs[bi].vector.size());
    for (std::size_t c = 0; c < merged.size(); ++c) {
      merged[c] = wa * cs[bi].vector[c] + wb * cs[bj].vector[c];
    }
    if (wa + wb == 0.0) merged = cs[bi].vector;
    cs[bi].vector = normalized(merged);
    counts[id_a] += counts[id_b];
    counts.erase(id_b);
    for (int& a : model.assignments) {
      if (a == id_b) a = id_a;
    }
    model.merge_log.push_back({id_a, id_b, best});
    cs.erase(cs.begin() + static_cast<std::ptrdiff_t>(bj));
    sim.erase(sim.begin() + static_cast<std::ptrdiff_t>(bj));
    for (auto& row : sim) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
    for (std::size_t j = 0; j < cs.size(); ++j) {
      if (j == bi) continue;
      const double s = cosine_similarity(cs[bi].vector, cs[j].vector);
      if (j < bi) {
        sim[j][bi] = s;
      } else {
        sim[bi][j] = s;
      }
    }
  }
  return model;
}

std::vector<SpeakerDecision> attribute_speakers(const ClusterModel& model,
                                                std::span<const Chunk> chunks) {
  if (chunks.size() != model.assignments.size()) {
    throw InvariantError("every chunk must be assigned: " +
                         std::to_string(chunks.size()) + " chunks, " +
                         std::to_string(model.assignments.size()) +
                         " assignments");
  }
  std::vector<SpeakerDecision> out;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const int label = model.assignments[i];
    auto [it, inserted] = index.emplace(chunks[i].segment_id, out.size());
    if (inserted) {
      out.push_back({chunks[i].segment_id, label, false});
      continue;
    }
    SpeakerDecision& d = out[it->second];
    if (!d.multi_speaker && d.speaker_id && *d.speaker_id != label) {
      d.multi_speaker = true;
      d.speaker_id.reset();
    }
  }
  return out;
}

void apply_decisions(std::span<const SpeakerDecision> decisions,
                     std::vector<SegmentRecord>& records) {
  std::unordered_map<std::string, const SpeakerDecision*> by_id;
  for (const auto& d : decisions) by_id[d.segment_id] = &d;
  for (auto& r : records) {
    if (r.rejected()) continue;
    auto it = by_id.find(r.segment_id);
    if (it == by_id.end()) {
      throw InvariantError("segment " + r.segment_id + " has zero chunks");
    }
    r.multi_speaker = it->second->multi_speaker;
    r.speaker_id = it->second->speaker_id;
    if (r.multi_speaker) r.reject_reason = RejectReason::kMultiSpeaker;
  }
}

OutlierSplit filter_outliers(const ClusterModel& model,
                             std::span<const SegmentRecord> segments,
                             std::span<const Chunk> chunks,
                             const Matrix& chunk_embeddings,
                             double outlier_threshold) {
  if (chunks.size() != chunk_embeddings.rows()) {
    throw InvariantError("chunk and embedding counts differ");
  }
  std::unordered_map<std::string, std::vector<double>> sums;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    auto unit = normalized(chunk_embeddings.row(i));
    auto& acc = sums[chunks[i].segment_id];
    if (acc.empty()) acc.assign(unit.size(), 0.0);
    for (std::size_t c = 0; c < unit.size(); ++c) acc[c] += unit[c];
  }
  OutlierSplit split;
  for (const auto& s : segments) {
    if (s.rejected()) {
      split.rejected.push_back(s);
      continue;
    }
    if (!s.speaker_id) {
      throw InvariantError("segment " + s.segment_id + " has no speaker_id");
    }
    const Centroid* c = model.find(*s.speaker_id);
    if (!c) {
      throw InvariantError("segment " + s.segment_id +
                           " refers to unknown cluster " +
                           std::to_string(*s.speaker_id));
    }
    auto it = sums.find(s.segment_id);
    if (it == sums.end()) {
      throw InvariantError("segment " + s.segment_id + " has zero chunks");
    }
    const double sim = cosine_similarity(it->second, c->vector);
    if (sim < outlier_threshold) {
      SegmentRecord r = s;
      r.reject_reason = RejectReason::kCentroidOutlier;
      split.rejected.push_back(std::move(r));
    } else {
      split.kept.push_back(s);
    }
  }
  return split;
}

namespace {
void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}
std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw Error("truncated embedding cache");
  }
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void write_embedding_cache(const std::filesystem::path& path,
                           std::span<const std::string> keys,
                           const Matrix& embeddings) {
  if (keys.size() != embeddings.rows()) {
    throw InvariantError("one key per embedding row required");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write embedding cache " + path.string());
  put_u32(out, static_cast<std::uint32_t>(embeddings.cols()));
  put_u32(out, static_cast<std::uint32_t>(embeddings.rows()));
  for (double v : embeddings.data()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  auto key_path = path;
  key_path += ".keys";
  std::ofstream kout(key_path, std::ios::binary | std::ios::trunc);
  if (!kout) throw Error("cannot write embedding keys " + key_path.string());
  for (const auto& k : keys) kout << k << '\n';
}

std::pair<std::vector<std::string>, Matrix> read_embedding_cache(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding cache " + path.string());
  const std::uint32_t dim = get_u32(in);
  const std::uint32_t count = get_u32(in);
  Matrix m(count, dim);
  for (double& v : m.data()) {
    const std::uint32_t bits = get_u32(in);
    float f;
    std::memcpy(&f, &bits, 4);
    v = f;
  }
  auto key_path = path;
  key_path += ".keys";
  std::ifstream kin(key_path);
  std::vector<std::string> keys;
  std::string line;
  while (std::getline(kin, line)) keys.push_back(line);
  if (keys.size() != count) {
    throw Error("embedding cache key count mismatch in " + key_path.string());
  }
  return {std::move(keys), std::move(m)};
}

}  // namespace redforge::cluster
