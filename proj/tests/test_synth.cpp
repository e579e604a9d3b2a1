#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>

#include "canopy/synth.hpp"

using namespace canopy;

TEST_CASE("sphere_volume_from_diameter") {
  CHECK(sphere_volume_from_diameter(2.0) == doctest::Approx(4.18879).epsilon(1e-5));
  CHECK(sphere_volume_from_diameter(1.0) == doctest::Approx(0.523599).epsilon(1e-5));
  CHECK_THROWS_AS(sphere_volume_from_diameter(0.0), ParamError);
  CHECK_THROWS_AS(sphere_volume_from_diameter(-1.0), ParamError);

  // invert the formula for a known volume and round-trip it
  const double v = 28.06;
  const double d = std::cbrt(6.0 * v / std::numbers::pi);
  CHECK(sphere_volume_from_diameter(d) == doctest::Approx(v).epsilon(1e-6));
}

TEST_CASE("single sphere tree has the analytic crown volume") {
  OrchardSpec spec;
  spec.rows = 1;
  spec.trees_per_row = 1;
  spec.crown = {CrownShape::sphere, 2.0, 2.0, 2.0};
  spec.points_per_tree = 50000;
  spec.seed = 3;
  const Orchard o = generate_orchard(spec);
  REQUIRE(o.truth.trees.size() == 1);
  CHECK(o.truth.trees[0].volume_m3 == doctest::Approx(33.5103).epsilon(1e-5));
}

TEST_CASE("truth centroids sit on the planting lattice without jitter or overlap") {
  OrchardSpec spec;
  spec.rows = 2;
  spec.trees_per_row = 5;
  spec.row_spacing = 8.0;
  spec.tree_spacing = 5.0;
  spec.crown_radius_jitter = 0.0;
  spec.crown_overlap_fraction = 0.0;
  spec.points_per_tree = 100;
  const Orchard o = generate_orchard(spec);
  REQUIRE(o.truth.trees.size() == 10);
  for (const TreeTruth& t : o.truth.trees) {
    CHECK(t.centroid.x == static_cast<double>(t.index_in_row) * 5.0);
    CHECK(t.centroid.y == static_cast<double>(t.row) * 8.0);
    CHECK(t.tree_id == t.row * 5 + t.index_in_row);
  }
}

TEST_CASE("overlap fraction brings adjacent crowns into contact") {
  OrchardSpec spec;
  spec.rows = 1;
  spec.trees_per_row = 2;
  spec.tree_spacing = 4.0;
  spec.crown_overlap_fraction = 0.3;
  spec.crown = {CrownShape::sphere, 2.0, 2.0, 2.0};
  spec.points_per_tree = 100;
  const Orchard o = generate_orchard(spec);
  const double center_dist = std::abs(o.truth.trees[1].centroid.x - o.truth.trees[0].centroid.x);
  CHECK(center_dist == doctest::Approx(2.8));
  CHECK(center_dist < 2.0 + 2.0);  // inside the sum of radii, so crowns intersect
}

TEST_CASE("every crown point lies inside its truth crown solid") {
  OrchardSpec spec;
  spec.rows = 2;
  spec.trees_per_row = 3;
  spec.crown = {CrownShape::ellipsoid, 2.0, 1.5, 1.8};
  spec.crown_radius_jitter = 0.1;
  spec.points_per_tree = 2000;
  spec.seed = 9;
  const Orchard o = generate_orchard(spec);
  REQUIRE(o.truth.labels.size() == o.cloud.size());

  // recover each tree's jittered radii from its volume and the fixed ratios
  for (std::size_t i = 0; i < o.cloud.size(); ++i) {
    const PointLabel lab = o.truth.labels[i];
    if (lab.part != PointPart::crown) continue;
    const TreeTruth& t = o.truth.trees[static_cast<std::size_t>(lab.tree_id)];
    const double s3 = t.volume_m3 / ((4.0 / 3.0) * std::numbers::pi * 2.0 * 1.5 * 1.8);
    const double s = std::cbrt(s3);
    const Point3 d = o.cloud[i] - t.centroid;
    const double u = d.x / (2.0 * s), v = d.y / (1.5 * s), w = d.z / (1.8 * s);
    CHECK(u * u + v * v + w * w <= 1.0 + 1e-9);
  }
}

TEST_CASE("crown point counts are exact and regeneration is bit-identical") {
  OrchardSpec spec;
  spec.rows = 2;
  spec.trees_per_row = 2;
  spec.points_per_tree = 1234;
  spec.seed = 77;
  const Orchard a = generate_orchard(spec);
  const Orchard b = generate_orchard(spec);

  REQUIRE(a.cloud.size() == b.cloud.size());
  for (std::size_t i = 0; i < a.cloud.size(); ++i) {
    CHECK(a.cloud[i].x == b.cloud[i].x);
    CHECK(a.cloud[i].y == b.cloud[i].y);
    CHECK(a.cloud[i].z == b.cloud[i].z);
    CHECK(a.truth.labels[i].tree_id == b.truth.labels[i].tree_id);
  }

  std::vector<std::size_t> crown_counts(4, 0);
  for (const PointLabel& lab : a.truth.labels)
    if (lab.part == PointPart::crown) ++crown_counts[static_cast<std::size_t>(lab.tree_id)];
  for (const std::size_t c : crown_counts) CHECK(c == 1234);
}

TEST_CASE("spec validation rejects bad parameters") {
  OrchardSpec spec;
  spec.rows = 0;
  CHECK_THROWS_AS(generate_orchard(spec), ParamError);
  spec = {};
  spec.crown_overlap_fraction = 1.0;
  CHECK_THROWS_AS(generate_orchard(spec), ParamError);
  spec = {};
  spec.tree_spacing = 0.0;
  CHECK_THROWS_AS(generate_orchard(spec), ParamError);
  spec = {};
  spec.crown.rx = -1.0;
  CHECK_THROWS_AS(generate_orchard(spec), ParamError);
}

TEST_CASE("truth CSV round-trips") {
  OrchardSpec spec;
  spec.rows = 2;
  spec.trees_per_row = 3;
  spec.points_per_tree = 50;
  spec.crown_radius_jitter = 0.05;
  spec.seed = 5;
  const Orchard o = generate_orchard(spec);
  const std::string path = "truth_roundtrip.csv";
  write_truth_csv(o.truth, path);
  const std::vector<TreeTruth> back = read_truth_csv(path);
  REQUIRE(back.size() == o.truth.trees.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].tree_id == o.truth.trees[i].tree_id);
    CHECK(back[i].row == o.truth.trees[i].row);
    CHECK(back[i].index_in_row == o.truth.trees[i].index_in_row);
    CHECK(back[i].centroid.x == o.truth.trees[i].centroid.x);
    CHECK(back[i].volume_m3 == o.truth.trees[i].volume_m3);
  }
  std::remove(path.c_str());
}
