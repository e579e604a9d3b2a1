#include "canopy/core.hpp"

#include <algorithm>

namespace canopy {

Aabb bounds(const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyInputError("bounds: empty cloud");
  Aabb box{cloud[0], cloud[0]};
  for (const Point3& p : cloud.points) {
    box.min.x = std::min(box.min.x, p.x);
    box.min.y = std::min(box.min.y, p.y);
    box.min.z = std::min(box.min.z, p.z);
    box.max.x = std::max(box.max.x, p.x);
    box.max.y = std::max(box.max.y, p.y);
    box.max.z = std::max(box.max.z, p.z);
  }
  return box;
}

Point3 centroid(const std::vector<Point3>& points) {
  if (points.empty()) throw EmptyInputError("centroid: empty cloud");
  double sx = 0.0, sy = 0.0, sz = 0.0;
  for (const Point3& p : points) {
    sx += p.x;
    sy += p.y;
    sz += p.z;
  }
  const double inv = 1.0 / static_cast<double>(points.size());
  return {sx * inv, sy * inv, sz * inv};
}

Point3 centroid(const PointCloud& cloud) { return centroid(cloud.points); }

namespace {

struct KeyedIndex {
  VoxelKey key;
  std::uint32_t index;
};

std::vector<KeyedIndex> sorted_voxel_members(const PointCloud& cloud, double resolution,
                                             std::optional<Point3> origin) {
  if (resolution <= 0.0 || !std::isfinite(resolution))
    throw ParamError("voxel_downsample: resolution must be > 0");
  std::vector<KeyedIndex> keyed;
  if (cloud.empty()) return keyed;
  const Point3 corner = origin ? *origin : bounds(cloud).min;
  keyed.reserve(cloud.size());
  for (std::uint32_t i = 0; i < cloud.size(); ++i)
    keyed.push_back({voxel_key(cloud[i], corner, resolution), i});
  std::sort(keyed.begin(), keyed.end(), [](const KeyedIndex& a, const KeyedIndex& b) {
    if (!(a.key == b.key)) return a.key < b.key;
    return a.index < b.index;
  });
  return keyed;
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double resolution,
                            std::optional<Point3> origin) {
  const auto keyed = sorted_voxel_members(cloud, resolution, origin);
  PointCloud out;
  out.frame_note = cloud.frame_note;
  std::size_t i = 0;
  while (i < keyed.size()) {
    std::size_t j = i;
    double sx = 0.0, sy = 0.0, sz = 0.0;
    while (j < keyed.size() && keyed[j].key == keyed[i].key) {
      const Point3& p = cloud[keyed[j].index];
      sx += p.x;
      sy += p.y;
      sz += p.z;
      ++j;
    }
    const double inv = 1.0 / static_cast<double>(j - i);
    out.points.push_back({sx * inv, sy * inv, sz * inv});
    i = j;
  }
  return out;
}

VoxelDownsampleMap voxel_downsample_map(const PointCloud& cloud, double resolution,
                                        std::optional<Point3> origin) {
  const auto keyed = sorted_voxel_members(cloud, resolution, origin);
  VoxelDownsampleMap out;
  out.cloud.frame_note = cloud.frame_note;
  std::size_t i = 0;
  while (i < keyed.size()) {
    std::size_t j = i;
    double sx = 0.0, sy = 0.0, sz = 0.0;
    std::vector<std::uint32_t> members;
    while (j < keyed.size() && keyed[j].key == keyed[i].key) {
      const Point3& p = cloud[keyed[j].index];
      sx += p.x;
      sy += p.y;
      sz += p.z;
      members.push_back(keyed[j].index);
      ++j;
    }
    const double inv = 1.0 / static_cast<double>(j - i);
    out.cloud.points.push_back({sx * inv, sy * inv, sz * inv});
    out.source_indices.push_back(std::move(members));
    i = j;
  }
  return out;
}

}  // namespace canopy
