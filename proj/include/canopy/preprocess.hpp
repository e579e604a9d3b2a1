#pragma once

#include <cstdint>
#include <vector>

#include "canopy/core.hpp"

namespace canopy {

/// Plane {p : normal . p + d = 0} with unit normal, oriented so the
/// z-component is nonnegative (ties broken toward +y, then +x).
struct PlaneModel {
  Point3 normal{0.0, 0.0, 1.0};
  double d = 0.0;
  std::vector<std::uint32_t> inlier_indices;
};

struct PreprocessParams {
  int ransac_iterations = 500;
  double ransac_distance_threshold = 0.15;  // meters
  double trunk_band_height = 0.8;           // meters above the fitted plane
  std::uint64_t seed = 0;
};

/// Fits a ground plane with seeded RANSAC: scores ransac_iterations
/// three-point hypotheses (hypothesis i draws from its own stream, so the
/// winner is schedule-independent), keeps the one with the most inliers
/// (ties go to the lowest hypothesis index), refits it by least squares
/// over its inliers and recomputes the inlier set once against the refit
/// plane. Throws FitError when the cloud has fewer than 3 points or every
/// sampled triple is collinear.
PlaneModel ransac_plane(const PointCloud& cloud, const PreprocessParams& params);

/// Ascending indices of points that are neither plane inliers nor within
/// trunk_band_height above the plane (signed height along the normal).
std::vector<std::uint32_t> canopy_indices(const PointCloud& cloud, const PlaneModel& plane,
                                          double trunk_band_height);

/// ransac_plane + canopy_indices, returning the surviving points in their
/// original order.
PointCloud remove_ground_and_trunk(const PointCloud& cloud, const PreprocessParams& params);

}  // namespace canopy
