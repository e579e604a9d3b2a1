#include "canopy/preprocess.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <limits>

#include "canopy/error.hpp"
#include "canopy/rng.hpp"
#include "canopy/threads.hpp"

namespace canopy {

namespace {

void validate(const PreprocessParams& params) {
  if (params.ransac_iterations < 1)
    throw ParamError("preprocess: ransac_iterations must be >= 1");
  if (!(params.ransac_distance_threshold > 0.0))
    throw ParamError("preprocess: ransac_distance_threshold must be positive");
  if (!(params.trunk_band_height > 0.0))
    throw ParamError("preprocess: trunk_band_height must be positive");
}

struct Hypothesis {
  Point3 normal{0.0, 0.0, 0.0};
  double d = 0.0;
  std::int64_t inliers = -1;  // -1 marks a collinear (degenerate) sample
};

Hypothesis score_hypothesis(const PointCloud& cloud, std::uint64_t seed, std::size_t index,
                            double threshold) {
  const std::size_t n = cloud.size();
  Rng rng = make_rng(seed, index);
  const auto a = static_cast<std::size_t>(uniform_below(rng, n));
  std::size_t b = a, c = a;
  while (b == a) b = static_cast<std::size_t>(uniform_below(rng, n));
  while (c == a || c == b) c = static_cast<std::size_t>(uniform_below(rng, n));

  Hypothesis h;
  const Point3 cr = cross(cloud[b] - cloud[a], cloud[c] - cloud[a]);
  const double len = norm(cr);
  if (!(len > 1e-30)) return h;
  h.normal = cr * (1.0 / len);
  h.d = -dot(h.normal, cloud[a]);
  h.inliers = 0;
  for (const Point3& p : cloud.points)
    if (std::abs(dot(h.normal, p) + h.d) <= threshold) ++h.inliers;
  return h;
}

}  // namespace

PlaneModel ransac_plane(const PointCloud& cloud, const PreprocessParams& params) {
  validate(params);
  const std::size_t n = cloud.size();
  if (n < 3) throw FitError("plane fit needs at least 3 points");

  std::vector<Hypothesis> hyp(static_cast<std::size_t>(params.ransac_iterations));
  threads::parallel_for(hyp.size(), [&](std::size_t i) {
    hyp[i] = score_hypothesis(cloud, params.seed, i, params.ransac_distance_threshold);
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < hyp.size(); ++i)
    if (hyp[i].inliers > hyp[best].inliers) best = i;
  if (hyp[best].inliers < 0)
    throw FitError("plane fit failed: every sampled triple was collinear");

  // least-squares refit over the winner's inliers, then one recompute
  const Hypothesis& win = hyp[best];
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  std::size_t count = 0;
  for (const Point3& p : cloud.points) {
    if (std::abs(dot(win.normal, p) + win.d) > params.ransac_distance_threshold) continue;
    mean += Eigen::Vector3d(p.x, p.y, p.z);
    ++count;
  }
  mean /= static_cast<double>(count);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Point3& p : cloud.points) {
    if (std::abs(dot(win.normal, p) + win.d) > params.ransac_distance_threshold) continue;
    const Eigen::Vector3d r = Eigen::Vector3d(p.x, p.y, p.z) - mean;
    cov += r * r.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  if (es.info() != Eigen::Success) throw FitError("plane refit: eigen decomposition failed");
  const Eigen::Vector3d nv = es.eigenvectors().col(0);  // smallest eigenvalue

  PlaneModel model;
  model.normal = {nv.x(), nv.y(), nv.z()};
  const double len = norm(model.normal);
  if (!(len > 0.0)) throw FitError("plane refit produced a zero normal");
  model.normal = model.normal * (1.0 / len);
  if (model.normal.z < 0.0 ||
      (model.normal.z == 0.0 &&
       (model.normal.y < 0.0 || (model.normal.y == 0.0 && model.normal.x < 0.0)))) {
    model.normal = model.normal * -1.0;
  }
  model.d = -dot(model.normal, Point3{mean.x(), mean.y(), mean.z()});

  for (std::uint32_t i = 0; i < n; ++i)
    if (std::abs(dot(model.normal, cloud[i]) + model.d) <= params.ransac_distance_threshold)
      model.inlier_indices.push_back(i);
  return model;
}

std::vector<std::uint32_t> canopy_indices(const PointCloud& cloud, const PlaneModel& plane,
                                          double trunk_band_height) {
  if (!(trunk_band_height > 0.0))
    throw ParamError("preprocess: trunk_band_height must be positive");
  std::vector<char> is_inlier(cloud.size(), 0);
  for (const std::uint32_t i : plane.inlier_indices) {
    if (i >= cloud.size()) throw ParamError("plane model: inlier index out of range");
    is_inlier[i] = 1;
  }
  std::vector<std::uint32_t> kept;
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    if (is_inlier[i]) continue;
    if (dot(plane.normal, cloud[i]) + plane.d <= trunk_band_height) continue;
    kept.push_back(i);
  }
  return kept;
}

PointCloud remove_ground_and_trunk(const PointCloud& cloud, const PreprocessParams& params) {
  const PlaneModel plane = ransac_plane(cloud, params);
  PointCloud out;
  out.frame_note = cloud.frame_note;
  const std::vector<std::uint32_t> kept =
      canopy_indices(cloud, plane, params.trunk_band_height);
  out.points.reserve(kept.size());
  for (const std::uint32_t i : kept) out.points.push_back(cloud[i]);
  return out;
}

}  // namespace canopy
