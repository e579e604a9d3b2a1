#include "canopy/segment.hpp"

#include <algorithm>
#include <cstddef>

#include "canopy/error.hpp"
#include "canopy/threads.hpp"
#include "segment_internal.hpp"

namespace canopy {

namespace {

Point3 centroid_of(const PointCloud& cloud, const std::vector<std::uint32_t>& indices) {
  Point3 sum{0.0, 0.0, 0.0};
  for (const std::uint32_t i : indices) sum = sum + cloud[i];
  const double inv = 1.0 / static_cast<double>(indices.size());
  return sum * inv;
}

}  // namespace

DbscanResult dbscan(const PointCloud& cloud, const DbscanParams& params) {
  if (!(params.epsilon > 0.0)) throw ParamError("dbscan: epsilon must be positive");
  if (params.min_points < 1) throw ParamError("dbscan: min_points must be >= 1");

  DbscanResult out;
  if (cloud.empty()) return out;
  const std::size_t n = cloud.size();

  const UniformGridIndex index(cloud, params.epsilon);
  std::vector<char> core(n, 0);
  threads::parallel_for(n, [&](std::size_t i) {
    core[i] = index.radius_count_at_least(cloud[i], params.epsilon, params.min_points) ? 1 : 0;
  });

  // expand clusters from core seeds in ascending index order; the first
  // cluster to reach a point keeps it
  std::vector<std::int32_t> label(n, -1);
  std::int32_t cluster_count = 0;
  std::vector<std::uint32_t> stack, nbr;
  for (std::uint32_t s = 0; s < n; ++s) {
    if (label[s] != -1 || !core[s]) continue;
    const std::int32_t cid = cluster_count++;
    label[s] = cid;
    stack.assign(1, s);
    while (!stack.empty()) {
      const std::uint32_t q = stack.back();
      stack.pop_back();
      nbr.clear();
      index.radius_collect(cloud[q], params.epsilon, nbr);
      for (const std::uint32_t t : nbr) {
        if (label[t] != -1) continue;
        label[t] = cid;
        if (core[t]) stack.push_back(t);
      }
    }
  }

  out.clusters.resize(static_cast<std::size_t>(cluster_count));
  for (std::uint32_t i = 0; i < n; ++i) {
    if (label[i] < 0)
      out.noise_indices.push_back(i);
    else
      out.clusters[static_cast<std::size_t>(label[i])].point_indices.push_back(i);
  }
  std::sort(out.clusters.begin(), out.clusters.end(),
            [](const TreeCluster& a, const TreeCluster& b) {
              return a.point_indices.front() < b.point_indices.front();
            });
  for (TreeCluster& c : out.clusters) {
    c.centroid = centroid_of(cloud, c.point_indices);
    c.provenance = Provenance::dbscan;
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> knn_graph(const PointCloud& cloud, std::size_t k) {
  if (k < 1) throw ParamError("knn_graph: k must be >= 1");
  if (cloud.size() < k + 1)
    throw ParamError("knn_graph: cloud must have at least k + 1 points");
  const std::size_t n = cloud.size();

  const UniformGridIndex index(cloud);
  std::vector<std::vector<std::uint32_t>> nearest(n);
  threads::parallel_for(n, [&](std::size_t i) {
    // query k+1 and drop the point itself (it may not be first when
    // duplicates with lower indices exist)
    const std::vector<std::uint32_t> r = index.knn_query(cloud[i], k + 1);
    auto& out = nearest[i];
    out.reserve(k);
    for (const std::uint32_t j : r) {
      if (j == i) continue;
      if (out.size() == k) break;
      out.push_back(j);
    }
  });

  std::vector<std::vector<std::uint32_t>> adj(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (const std::uint32_t j : nearest[i]) {
      adj[i].push_back(j);
      adj[j].push_back(i);
    }
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

std::size_t subcluster_count(std::size_t cluster_size, std::size_t max_cluster_size) {
  if (cluster_size < 1 || max_cluster_size < 1)
    throw ParamError("subcluster_count: both counts must be >= 1");
  const std::size_t m = (cluster_size + max_cluster_size - 1) / max_cluster_size;
  if (cluster_size > max_cluster_size && m < 2) return 2;
  return m;
}

std::vector<TreeCluster> segment_trees(const PointCloud& cloud, const DbscanParams& dbscan_params,
                                       const SpectralParams& spectral_params, bool enable_split) {
  DbscanResult db = dbscan(cloud, dbscan_params);
  if (!enable_split) return std::move(db.clusters);

  std::vector<std::size_t> oversized;
  for (std::size_t i = 0; i < db.clusters.size(); ++i)
    if (db.clusters[i].point_indices.size() > spectral_params.max_cluster_size)
      oversized.push_back(i);

  std::vector<std::vector<TreeCluster>> split_out(oversized.size());
  threads::parallel_for(oversized.size(), [&](std::size_t j) {
    const std::size_t ci = oversized[j];
    split_out[j] = spectral_split(cloud, db.clusters[ci], spectral_params,
                                  static_cast<std::int32_t>(ci));
  });

  std::vector<TreeCluster> out;
  out.reserve(db.clusters.size());
  std::size_t next_split = 0;
  for (std::size_t i = 0; i < db.clusters.size(); ++i) {
    if (next_split < oversized.size() && oversized[next_split] == i) {
      for (TreeCluster& c : split_out[next_split]) out.push_back(std::move(c));
      ++next_split;
    } else {
      out.push_back(std::move(db.clusters[i]));
    }
  }
  std::sort(out.begin(), out.end(), [](const TreeCluster& a, const TreeCluster& b) {
    return a.point_indices.front() < b.point_indices.front();
  });
  return out;
}

}  // namespace canopy
