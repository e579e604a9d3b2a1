#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "canopy/core.hpp"

namespace canopy {

struct DbscanParams {
  double epsilon = 0.8;           // meters
  std::size_t min_points = 1300;  // neighbor count that makes a core point, self included
};

struct SpectralParams {
  std::size_t max_cluster_size = 45000;
  std::size_t knn_k = 10;
  std::size_t embed_sample_cap = 5000;
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-6;
  std::uint64_t seed = 0;
};

struct TreeCluster {
  std::vector<std::uint32_t> point_indices;  // strictly ascending
  Point3 centroid{0.0, 0.0, 0.0};
  Provenance provenance = Provenance::dbscan;
  std::int32_t source_cluster_id = -1;  // dbscan cluster a split came from, -1 otherwise
  std::string note;                     // set when a fallback rule fired
};

struct DbscanResult {
  std::vector<TreeCluster> clusters;          // ordered by lowest member index
  std::vector<std::uint32_t> noise_indices;   // ascending
};

/// Density clustering. A point is core when at least min_points points
/// (itself included) lie within epsilon; clusters are the ε-connected
/// components of core points plus their border points. Border points
/// within reach of several clusters go to the cluster seeded earliest in
/// ascending index order. Empty cloud gives an empty result.
DbscanResult dbscan(const PointCloud& cloud, const DbscanParams& params);

/// Symmetrized unweighted kNN adjacency: edge {i,j} iff j is among i's k
/// nearest or i among j's k nearest. Distance ties resolve toward the lower
/// index. Neighbor lists are ascending, self-edges absent. Throws ParamError
/// unless cloud size >= k + 1.
std::vector<std::vector<std::uint32_t>> knn_graph(const PointCloud& cloud, std::size_t k);

/// ceil(cluster_size / max_cluster_size), and never less than 2 once
/// cluster_size exceeds max_cluster_size.
std::size_t subcluster_count(std::size_t cluster_size, std::size_t max_cluster_size);

/// Splits one oversized cluster into subcluster_count parts: spectral
/// embedding of a capped seeded sample (normalized Laplacian of the kNN
/// graph, m smallest eigenvectors, rows L2-normalized), seeded k-means++
/// over the embedding, nearest-centroid assignment of unsampled members.
/// When the sample's graph has more components than requested parts, the
/// components themselves become the subclusters and k-means is skipped
/// (noted in the outputs). source_cluster_id tags the result and salts the
/// per-cluster random stream. Throws ParamError unless the cluster is
/// larger than params.max_cluster_size.
std::vector<TreeCluster> spectral_split(const PointCloud& cloud, const TreeCluster& cluster,
                                        const SpectralParams& params,
                                        std::int32_t source_cluster_id = 0);

/// dbscan, then (when enable_split) spectral_split of every cluster above
/// max_cluster_size; final clusters ordered by lowest member index.
std::vector<TreeCluster> segment_trees(const PointCloud& cloud, const DbscanParams& dbscan_params,
                                       const SpectralParams& spectral_params, bool enable_split);

}  // namespace canopy
