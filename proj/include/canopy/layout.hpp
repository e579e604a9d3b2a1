#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "canopy/core.hpp"

namespace canopy {

struct ClusterCentroid {
  std::uint32_t cluster_id = 0;
  Point3 centroid{};
};

enum class RowSide { left, right };

/// One orchard row. members holds cluster ids ordered by ascending centroid
/// x. The fitted line is y = slope * x + intercept; when all member x values
/// coincide within 1e-9 the fit degenerates to slope 0, intercept = mean y.
struct RowModel {
  int row_id = 0;  // 0-based per side, by increasing distance from reference_y
  RowSide side = RowSide::left;
  std::vector<std::uint32_t> members;
  double slope = 0.0;
  double intercept = 0.0;
};

struct LayoutParams {
  double row_distance_threshold = 2.0;  // y gap that separates rows, > 0
  double reference_y = 0.0;             // robot path axis
};

/// Groups tree centroids into rows. Centroids are sorted by y and a gap
/// greater than row_distance_threshold starts a new row. A row's side is
/// right when its mean y lies below reference_y, left otherwise; each side
/// numbers its rows 0,1,... outward from the reference line. The returned
/// list holds the left side first, then the right, each in row_id order.
/// Throws ParamError on empty input, a non-positive threshold, or a
/// duplicate cluster id.
std::vector<RowModel> group_rows(const std::vector<ClusterCentroid>& centroids,
                                 const LayoutParams& params);

struct TreeLabel {
  std::uint32_t cluster_id = 0;
  std::string label;  // "L_<n>" or "R_<n>"
};

/// Assigns sequential labels per side: the index starts at 0 for each side
/// and runs row by row in row_id order, within a row in member order, so a
/// side with rows of sizes 2 and 3 yields L_0 through L_4. Labels are unique.
std::vector<TreeLabel> label_trees(const std::vector<RowModel>& rows);

}  // namespace canopy
