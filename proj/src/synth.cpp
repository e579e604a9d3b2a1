#include "canopy/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "canopy/rng.hpp"

namespace canopy {

namespace {

void validate(const OrchardSpec& spec) {
  if (spec.rows < 1 || spec.trees_per_row < 1)
    throw ParamError("orchard spec: counts must be >= 1");
  if (!(spec.row_spacing > 0.0) || !(spec.tree_spacing > 0.0))
    throw ParamError("orchard spec: spacings must be > 0");
  if (spec.crown_overlap_fraction < 0.0 || spec.crown_overlap_fraction >= 1.0)
    throw ParamError("orchard spec: overlap fraction must be in [0, 1)");
  if (spec.crown_radius_jitter < 0.0 || spec.crown_radius_jitter >= 1.0)
    throw ParamError("orchard spec: radius jitter must be in [0, 1)");
  if (!(spec.crown.rx > 0.0) || !(spec.crown.ry > 0.0) || !(spec.crown.rz > 0.0))
    throw ParamError("orchard spec: crown radii must be > 0");
  if (spec.trunk_height < 0.0) throw ParamError("orchard spec: trunk height must be >= 0");
  if (spec.ground_noise_sigma < 0.0) throw ParamError("orchard spec: noise sigma must be >= 0");
  if (spec.points_per_tree < 1) throw ParamError("orchard spec: points_per_tree must be >= 1");
  if (!(spec.trunk_radius > 0.0)) throw ParamError("orchard spec: trunk radius must be > 0");
}

// uniform point inside the unit ball by rejection, then scaled per axis;
// affine scaling keeps the distribution uniform over the ellipsoid
Point3 crown_sample(Rng& rng, double rx, double ry, double rz) {
  for (;;) {
    const double x = uniform_range(rng, -1.0, 1.0);
    const double y = uniform_range(rng, -1.0, 1.0);
    const double z = uniform_range(rng, -1.0, 1.0);
    if (x * x + y * y + z * z <= 1.0) return {x * rx, y * ry, z * rz};
  }
}

}  // namespace

Orchard generate_orchard(const OrchardSpec& spec) {
  validate(spec);

  const double center_spacing = spec.tree_spacing * (1.0 - spec.crown_overlap_fraction);
  const int n_trees = spec.rows * spec.trees_per_row;
  const double max_r = std::max({spec.crown.rx, spec.crown.ry, spec.crown.rz}) *
                       (1.0 + spec.crown_radius_jitter);

  Orchard out;
  out.cloud.frame_note = "synthetic orchard, seed " + std::to_string(spec.seed);
  const std::size_t total = spec.ground_points +
                            static_cast<std::size_t>(n_trees) *
                                (spec.points_per_tree + spec.trunk_points_per_tree);
  out.cloud.points.reserve(total);
  out.truth.labels.reserve(total);
  out.truth.trees.reserve(static_cast<std::size_t>(n_trees));

  // ground rectangle covering the planting lattice plus a crown margin
  const double margin = max_r + 1.0;
  const double x_lo = -margin;
  const double x_hi = static_cast<double>(spec.trees_per_row - 1) * center_spacing + margin;
  const double y_lo = -margin;
  const double y_hi = static_cast<double>(spec.rows - 1) * spec.row_spacing + margin;

  Rng ground_rng = make_rng(spec.seed, 0xffffffffULL);
  for (std::size_t i = 0; i < spec.ground_points; ++i) {
    const double x = uniform_range(ground_rng, x_lo, x_hi);
    const double y = uniform_range(ground_rng, y_lo, y_hi);
    const double z =
        spec.ground_noise_sigma > 0.0 ? gaussian(ground_rng) * spec.ground_noise_sigma : 0.0;
    out.cloud.points.push_back({x, y, z});
    out.truth.labels.push_back({-1, PointPart::ground});
  }

  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int row = 0; row < spec.rows; ++row) {
    for (int idx = 0; idx < spec.trees_per_row; ++idx) {
      const int tree_id = row * spec.trees_per_row + idx;
      Rng rng = make_rng(spec.seed, static_cast<std::uint64_t>(tree_id));

      const double scale =
          spec.crown_radius_jitter > 0.0
              ? 1.0 + spec.crown_radius_jitter * uniform_range(rng, -1.0, 1.0)
              : 1.0;
      const double rx = spec.crown.rx * scale;
      const double ry = (spec.crown.shape == CrownShape::sphere ? spec.crown.rx : spec.crown.ry) *
                        scale;
      const double rz = (spec.crown.shape == CrownShape::sphere ? spec.crown.rx : spec.crown.rz) *
                        scale;

      const Point3 center{static_cast<double>(idx) * center_spacing,
                          static_cast<double>(row) * spec.row_spacing,
                          spec.trunk_height + rz};
      const double volume = (4.0 / 3.0) * std::numbers::pi * rx * ry * rz;
      out.truth.trees.push_back({tree_id, row, idx, center, volume});

      for (std::size_t i = 0; i < spec.trunk_points_per_tree; ++i) {
        const double theta = uniform_range(rng, 0.0, two_pi);
        const double h = uniform_range(rng, 0.0, std::max(spec.trunk_height, 1e-6));
        out.cloud.points.push_back({center.x + spec.trunk_radius * std::cos(theta),
                                    center.y + spec.trunk_radius * std::sin(theta), h});
        out.truth.labels.push_back({tree_id, PointPart::trunk});
      }
      for (std::size_t i = 0; i < spec.points_per_tree; ++i) {
        const Point3 d = crown_sample(rng, rx, ry, rz);
        out.cloud.points.push_back({center.x + d.x, center.y + d.y, center.z + d.z});
        out.truth.labels.push_back({tree_id, PointPart::crown});
      }
    }
  }
  return out;
}

double sphere_volume_from_diameter(double d) {
  if (!(d > 0.0)) throw ParamError("sphere_volume_from_diameter: d must be > 0");
  return std::numbers::pi * d * d * d / 6.0;
}

void write_truth_csv(const OrchardTruth& truth, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "tree_id,row,index,cx,cy,cz,true_volume_m3\n";
  out.precision(17);
  for (const TreeTruth& t : truth.trees)
    out << t.tree_id << ',' << t.row << ',' << t.index_in_row << ',' << t.centroid.x << ','
        << t.centroid.y << ',' << t.centroid.z << ',' << t.volume_m3 << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::vector<TreeTruth> read_truth_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty truth file");
  std::vector<TreeTruth> trees;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    TreeTruth t{};
    char c;
    if (!(ss >> t.tree_id >> c >> t.row >> c >> t.index_in_row >> c >> t.centroid.x >> c >>
          t.centroid.y >> c >> t.centroid.z >> c >> t.volume_m3))
      throw ParseError(path + ":" + std::to_string(line_no) + ": malformed truth row");
    trees.push_back(t);
  }
  return trees;
}

}  // namespace canopy
