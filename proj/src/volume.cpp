#include "canopy/volume.hpp"

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "canopy/error.hpp"
#include "canopy/threads.hpp"
#include "volume_internal.hpp"

namespace canopy {

double mesh_volume(const TriangleMesh& mesh) {
  if (mesh.faces.empty()) throw TopologyError("mesh volume: mesh has no faces");

  const auto pack = [](std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  };
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces) {
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      throw TopologyError("mesh volume: face repeats a vertex");
    for (const std::uint32_t v : f)
      if (v >= mesh.vertices.size()) throw TopologyError("mesh volume: face index out of range");
    for (int s = 0; s < 3; ++s) {
      const auto [it, inserted] = directed.try_emplace(pack(f[s], f[(s + 1) % 3]), 1);
      if (!inserted)
        throw TopologyError("mesh volume: edge traversed twice in the same direction");
    }
  }
  for (const auto& [key, count] : directed) {
    (void)count;
    const std::uint32_t a = static_cast<std::uint32_t>(key >> 32);
    const std::uint32_t b = static_cast<std::uint32_t>(key & 0xffffffffu);
    if (directed.find(pack(b, a)) == directed.end())
      throw TopologyError("mesh volume: open edge, mesh is not closed");
  }

  // divergence sum anchored at a mesh vertex so far-from-origin meshes
  // keep full precision
  const Point3 origin = mesh.vertices[mesh.faces[0][0]];
  double six_volume = 0.0;
  for (const auto& f : mesh.faces) {
    const Point3 a = mesh.vertices[f[0]] - origin;
    const Point3 b = mesh.vertices[f[1]] - origin;
    const Point3 c = mesh.vertices[f[2]] - origin;
    six_volume += dot(a, cross(b, c));
  }
  return six_volume / 6.0;
}

std::vector<ClusterVolumes> estimate_tree_volumes(
    const PointCloud& cloud, const std::vector<std::vector<std::uint32_t>>& clusters,
    double alpha, double downsample_resolution) {
  if (!(alpha > 0.0)) throw ParamError("alpha must be positive");
  if (!(downsample_resolution > 0.0)) throw ParamError("downsample resolution must be positive");
  for (const auto& cluster : clusters)
    for (const std::uint32_t idx : cluster)
      if (idx >= cloud.points.size())
        throw ParamError("estimate_tree_volumes: cluster index out of range");

  std::vector<ClusterVolumes> out(clusters.size());
  threads::parallel_for(clusters.size(), [&](std::size_t ci) {
    const auto& cluster = clusters[ci];
    ClusterVolumes cv;
    cv.point_count = cluster.size();

    PointCloud members;
    members.points.reserve(cluster.size());
    for (const std::uint32_t idx : cluster) members.points.push_back(cloud.points[idx]);
    if (!members.points.empty()) {
      cv.centroid = centroid(members);
      const PointCloud down = voxel_downsample(members, downsample_resolution);
      cv.downsampled_points = down.points.size();
      try {
        cv.convex_hull_volume = mesh_volume(convex_hull(down));
        cv.alpha_shape_volume = detail::alpha_volume_from(delaunay_tetrahedralize(down), alpha);
      } catch (const DegenerateGeometryError&) {
        cv.degenerate = true;
        cv.convex_hull_volume = 0.0;
        cv.alpha_shape_volume = 0.0;
      }
    } else {
      cv.degenerate = true;
    }
    out[ci] = cv;
  });
  return out;
}

}  // namespace canopy
