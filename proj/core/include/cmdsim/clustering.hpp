#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmdsim/embedding.hpp"

namespace cmdsim {

// Cosine-distance DBSCAN parameters. min_pts counts the point itself.
struct DbscanParams {
  double eps = 0.08;
  std::size_t min_pts = 5;

  void validate() const;
};

struct ClusterLabeling {
  static constexpr int kNoise = -1;

  std::vector<int> labels;
  int num_clusters = 0;
};

// Classic DBSCAN with d(u, v) = 1 - u.v over unit vectors. Points are visited
// in index order, clusters are numbered in discovery order and a border point
// belongs to the first cluster that reaches it.
ClusterLabeling dbscan(std::span<const EmbeddingVector> vectors, const DbscanParams& params);

// First keep_per_cluster members of every cluster plus all noise points,
// returned in ascending index order.
std::vector<std::size_t> dedup_by_clusters(const ClusterLabeling& labeling, std::size_t keep_per_cluster = 2);

// The n candidates least similar to the query, ascending similarity, ties by
// smaller index. The query and its positive (if inside the corpus) are never
// returned. Throws when fewer than n candidates exist.
std::vector<std::size_t> mine_negatives(std::size_t query_index, std::span<const EmbeddingVector> embeddings,
                                        std::size_t n = 1000,
                                        std::optional<std::size_t> positive_index = std::nullopt);

struct ClusterCoverage {
  std::size_t num_clusters = 0;
  std::map<std::string, double> per_source;  // percent of clusters touched
  double union_rate = 0.0;                    // all sources together
};

ClusterCoverage cluster_coverage(const ClusterLabeling& labeling, std::span<const std::string> source_tags);

}  // namespace cmdsim
