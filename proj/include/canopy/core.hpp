#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "canopy/error.hpp"

namespace canopy {

/// A 3D point in meters. Coordinates are finite; ingestion rejects NaN/inf.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Point3 operator+(Point3 a, Point3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Point3 operator-(Point3 a, Point3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Point3 operator*(Point3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend bool operator==(const Point3& a, const Point3& b) {
    return a.x == b.x && a.y == b.y && a.z == b.z;
  }
};

inline double dot(Point3 a, Point3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Point3 cross(Point3 a, Point3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double squared_norm(Point3 a) { return dot(a, a); }
inline double norm(Point3 a) { return std::sqrt(squared_norm(a)); }
inline double squared_distance(Point3 a, Point3 b) { return squared_norm(a - b); }
inline double distance(Point3 a, Point3 b) { return std::sqrt(squared_distance(a, b)); }
inline bool is_finite(Point3 p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

/// How a tree cluster came to be: straight from density clustering or by
/// splitting an oversized cluster.
enum class Provenance { dbscan, spectral_split };

/// Ordered point collection; filtering operations keep relative order.
struct PointCloud {
  std::vector<Point3> points;
  std::string frame_note;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  Point3& operator[](std::size_t i) { return points[i]; }
  const Point3& operator[](std::size_t i) const { return points[i]; }
};

struct Aabb {
  Point3 min;
  Point3 max;
};

/// Componentwise bounding box. Throws EmptyInputError on an empty cloud.
Aabb bounds(const PointCloud& cloud);

/// Integer voxel coordinates relative to an origin corner.
struct VoxelKey {
  std::int64_t i = 0;
  std::int64_t j = 0;
  std::int64_t k = 0;

  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
  friend bool operator<(const VoxelKey& a, const VoxelKey& b) {
    if (a.i != b.i) return a.i < b.i;
    if (a.j != b.j) return a.j < b.j;
    return a.k < b.k;
  }
};

inline VoxelKey voxel_key(Point3 p, Point3 origin, double resolution) {
  return {static_cast<std::int64_t>(std::floor((p.x - origin.x) / resolution)),
          static_cast<std::int64_t>(std::floor((p.y - origin.y) / resolution)),
          static_cast<std::int64_t>(std::floor((p.z - origin.z) / resolution))};
}

/// Arithmetic mean of all points. Throws EmptyInputError on an empty cloud.
Point3 centroid(const PointCloud& cloud);
Point3 centroid(const std::vector<Point3>& points);

/// One point per occupied voxel, placed at the voxel's point centroid and
/// emitted in ascending (i, j, k) key order. The voxel origin is the cloud's
/// minimum corner unless an explicit origin is given.
PointCloud voxel_downsample(const PointCloud& cloud, double resolution,
                            std::optional<Point3> origin = std::nullopt);

/// voxel_downsample plus, for each output point, the input indices that fell
/// into its voxel (ascending). Used to carry per-point labels across the
/// downsampling stage.
struct VoxelDownsampleMap {
  PointCloud cloud;
  std::vector<std::vector<std::uint32_t>> source_indices;
};
VoxelDownsampleMap voxel_downsample_map(const PointCloud& cloud, double resolution,
                                        std::optional<Point3> origin = std::nullopt);

/// Uniform-grid acceleration structure for exact radius and kNN queries.
/// Points are re-sorted by cell internally; query results are reported in
/// original cloud indices. Read-only after construction, safe to share
/// across threads.
class UniformGridIndex {
public:
  /// cell_size defaults to a density heuristic when not given. Queries are
  /// exact for any cell size; it only affects speed.
  explicit UniformGridIndex(const PointCloud& cloud, double cell_size = 0.0);

  std::size_t size() const { return n_; }

  /// Indices of all points with distance(p, q) <= r, ascending.
  std::vector<std::uint32_t> radius_query(Point3 p, double r) const;

  /// The k nearest indices ordered by (distance, index), exact distance ties
  /// broken toward the lower index. Throws ParamError unless 1 <= k <= size.
  std::vector<std::uint32_t> knn_query(Point3 p, std::size_t k) const;

  /// Appends the neighborhood of point p within r to out, unsorted. Faster
  /// path used by clustering loops where order does not matter.
  void radius_collect(Point3 p, double r, std::vector<std::uint32_t>& out) const;

  /// True if at least `threshold` points lie within r of p (early exit).
  bool radius_count_at_least(Point3 p, double r, std::size_t threshold) const;

private:
  struct Cell {
    std::uint32_t begin;
    std::uint32_t end;
  };

  std::uint64_t pack(std::int64_t ci, std::int64_t cj, std::int64_t ck) const;
  const Cell* find_cell(std::int64_t ci, std::int64_t cj, std::int64_t ck) const;
  template <typename VisitCell>
  void walk_ball(Point3 p, double r, const VisitCell& visit) const;

  std::size_t n_ = 0;
  double cell_ = 1.0;
  Point3 origin_{};
  std::array<std::int64_t, 3> span_{};
  // coordinates re-sorted by cell for cache-friendly scans
  std::vector<double> xs_, ys_, zs_;
  std::vector<std::uint32_t> order_;  // sorted slot -> original index
  std::unordered_map<std::uint64_t, Cell> cells_;
};

}  // namespace canopy
