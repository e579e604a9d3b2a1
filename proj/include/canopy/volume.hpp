#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "canopy/core.hpp"

namespace canopy {

struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;  // outward-oriented
};

/// Exact-arithmetic hull of the input coordinates. Every input point is
/// inside or on the result. Fewer than 4 points, or an affinely
/// dependent set, raises DegenerateGeometryError.
TriangleMesh convex_hull(const PointCloud& cloud);

/// Divergence-theorem volume of a closed, consistently oriented mesh.
/// Open or inconsistently wound meshes raise TopologyError.
double mesh_volume(const TriangleMesh& mesh);

struct DelaunayTet {
  std::array<std::uint32_t, 4> v;
  double circumradius;  // measured on the jittered coordinates
  double volume;        // measured on the original coordinates, clamped >= 0
};

/// Full tetrahedralization of the cloud after the deterministic
/// robustness jitter (seeded uniform offsets in +-1e-9 m per axis).
/// `jittered` holds the coordinates the empty-circumsphere property
/// holds for.
struct DelaunayResult {
  std::vector<Point3> jittered;
  std::vector<DelaunayTet> tets;
};

DelaunayResult delaunay_tetrahedralize(const PointCloud& cloud);

struct AlphaComplex {
  std::vector<DelaunayTet> tetrahedra;  // kept: circumradius <= alpha
  double alpha;
};

AlphaComplex build_alpha_complex(const PointCloud& cloud, double alpha);

/// Sum of kept-tetrahedron volumes. Monotone nondecreasing in alpha;
/// when alpha reaches every circumradius it matches the hull volume.
double alpha_shape_volume(const PointCloud& cloud, double alpha);

struct ClusterVolumes {
  double convex_hull_volume = 0.0;
  double alpha_shape_volume = 0.0;
  bool degenerate = false;  // volumes forced to 0, batch continues
  Point3 centroid{};        // of the full (pre-downsample) cluster
  std::size_t point_count = 0;
  std::size_t downsampled_points = 0;
};

/// Per cluster: voxel-downsample its points, then both volume
/// estimates. Degenerate clusters are flagged, not fatal. Output order
/// follows cluster order and is independent of worker count.
std::vector<ClusterVolumes> estimate_tree_volumes(
    const PointCloud& cloud, const std::vector<std::vector<std::uint32_t>>& clusters,
    double alpha, double downsample_resolution);

}  // namespace canopy
