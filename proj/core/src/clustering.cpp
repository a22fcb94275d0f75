#include "cmdsim/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

#include "cmdsim/error.hpp"

namespace cmdsim {

void DbscanParams::validate() const {
  if (!(eps > 0.0)) throw InvalidArgument("dbscan eps must be > 0");
  if (min_pts < 1) throw InvalidArgument("dbscan min_pts must be >= 1");
}

ClusterLabeling dbscan(std::span<const EmbeddingVector> vectors, const DbscanParams& params) {
  params.validate();
  const std::size_t n = vectors.size();
  ClusterLabeling out;
  if (n == 0) return out;
  for (const auto& v : vectors) {
    if (v.dim() != vectors.front().dim()) throw InvalidArgument("dbscan: vectors differ in dimension");
  }

  // Neighbourhoods (self included) from one pass over the upper triangle.
  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i) {
    neighbours[i].push_back(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (1.0 - dot(vectors[i].values(), vectors[j].values()) <= params.eps) {
        neighbours[i].push_back(j);
        neighbours[j].push_back(i);
      }
    }
  }
  for (auto& nb : neighbours) std::sort(nb.begin(), nb.end());

  constexpr int kUnvisited = -2;
  out.labels.assign(n, kUnvisited);
  for (std::size_t p = 0; p < n; ++p) {
    if (out.labels[p] != kUnvisited) continue;
    if (neighbours[p].size() < params.min_pts) {
      out.labels[p] = ClusterLabeling::kNoise;
      continue;
    }
    const int cluster = out.num_clusters++;
    out.labels[p] = cluster;
    std::deque<std::size_t> frontier(neighbours[p].begin(), neighbours[p].end());
    while (!frontier.empty()) {
      std::size_t q = frontier.front();
      frontier.pop_front();
      if (out.labels[q] == ClusterLabeling::kNoise) out.labels[q] = cluster;  // border point
      if (out.labels[q] != kUnvisited) continue;
      out.labels[q] = cluster;
      if (neighbours[q].size() >= params.min_pts) {
        for (auto r : neighbours[q]) {
          if (out.labels[r] == kUnvisited || out.labels[r] == ClusterLabeling::kNoise) frontier.push_back(r);
        }
      }
    }
  }
  return out;
}

std::vector<std::size_t> dedup_by_clusters(const ClusterLabeling& labeling, std::size_t keep_per_cluster) {
  std::vector<std::size_t> kept_in(static_cast<std::size_t>(labeling.num_clusters), 0);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labeling.labels.size(); ++i) {
    int label = labeling.labels[i];
    if (label == ClusterLabeling::kNoise) {
      out.push_back(i);
    } else if (kept_in.at(static_cast<std::size_t>(label))++ < keep_per_cluster) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<std::size_t> mine_negatives(std::size_t query_index, std::span<const EmbeddingVector> embeddings,
                                        std::size_t n, std::optional<std::size_t> positive_index) {
  if (query_index >= embeddings.size()) throw InvalidArgument("query index out of range");
  const auto& query = embeddings[query_index];
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(embeddings.size());
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (i == query_index || (positive_index && i == *positive_index)) continue;
    scored.emplace_back(dot(query.values(), embeddings[i].values()), i);
  }
  if (n > scored.size()) {
    throw InvalidArgument("requested " + std::to_string(n) + " negatives but only " + std::to_string(scored.size()) +
                          " candidates exist");
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end());
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(scored[i].second);
  return out;
}

ClusterCoverage cluster_coverage(const ClusterLabeling& labeling, std::span<const std::string> source_tags) {
  if (source_tags.size() != labeling.labels.size()) throw InvalidArgument("labels and source tags differ in length");
  ClusterCoverage out;
  out.num_clusters = static_cast<std::size_t>(labeling.num_clusters);
  std::map<std::string, std::set<int>> touched;
  std::set<int> any;
  for (const auto& tag : source_tags) touched[tag];
  for (std::size_t i = 0; i < source_tags.size(); ++i) {
    int label = labeling.labels[i];
    if (label == ClusterLabeling::kNoise) continue;
    touched[source_tags[i]].insert(label);
    any.insert(label);
  }
  auto rate = [&](std::size_t covered) {
    return out.num_clusters == 0 ? 0.0 : 100.0 * static_cast<double>(covered) / static_cast<double>(out.num_clusters);
  };
  for (const auto& [tag, clusters] : touched) out.per_source[tag] = rate(clusters.size());
  out.union_rate = rate(any.size());
  return out;
}

}  // namespace cmdsim
