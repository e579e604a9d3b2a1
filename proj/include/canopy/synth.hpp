#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "canopy/core.hpp"

namespace canopy {

enum class CrownShape { sphere, ellipsoid };

struct CrownSpec {
  CrownShape shape = CrownShape::sphere;
  // sphere reads rx only; ellipsoid uses all three semi-axes
  double rx = 2.0;
  double ry = 2.0;
  double rz = 2.0;
};

struct OrchardSpec {
  int rows = 2;
  int trees_per_row = 5;
  double row_spacing = 8.0;   // meters between row center lines (y)
  double tree_spacing = 5.0;  // nominal meters between trees along a row (x)
  CrownSpec crown{};
  double crown_radius_jitter = 0.0;     // per-tree radius scale in [1 - j, 1 + j]
  double crown_overlap_fraction = 0.0;  // shrinks center spacing: s * (1 - f)
  double trunk_height = 1.2;
  std::size_t points_per_tree = 20000;  // crown points per tree, exact
  double ground_noise_sigma = 0.02;
  std::uint64_t seed = 1;
  // surveyed-scene extras not part of the crown model
  std::size_t trunk_points_per_tree = 400;
  double trunk_radius = 0.15;
  std::size_t ground_points = 20000;
};

enum class PointPart : std::uint8_t { ground, trunk, crown };

struct PointLabel {
  std::int32_t tree_id;  // -1 for unowned (ground) points
  PointPart part;
};

struct TreeTruth {
  int tree_id;
  int row;
  int index_in_row;
  Point3 centroid;   // analytic crown center
  double volume_m3;  // analytic crown volume after jitter
};

struct OrchardTruth {
  std::vector<TreeTruth> trees;
  std::vector<PointLabel> labels;  // one per cloud point, same order
};

struct Orchard {
  PointCloud cloud;
  OrchardTruth truth;
};

/// Deterministic labeled orchard; same spec (incl. seed) gives a
/// bit-identical cloud and truth. Crown points are sampled uniformly
/// inside the crown solid, trunks on cylinder surfaces, ground on the
/// z=0 plane with Gaussian height noise.
Orchard generate_orchard(const OrchardSpec& spec);

/// Volume of a sphere with diameter d.
double sphere_volume_from_diameter(double d);

/// CSV columns: tree_id, row, index, cx, cy, cz, true_volume_m3.
void write_truth_csv(const OrchardTruth& truth, const std::string& path);
std::vector<TreeTruth> read_truth_csv(const std::string& path);

}  // namespace canopy
