#include "canopy/layout.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <unordered_set>

#include "canopy/error.hpp"

namespace canopy {

namespace {

constexpr double kFlatRowSpanX = 1e-9;

struct DraftRow {
  std::vector<ClusterCentroid> members;
  double mean_y = 0.0;
  double distance = 0.0;  // |mean_y - reference_y|
  RowSide side = RowSide::left;
  double slope = 0.0;
  double intercept = 0.0;
};

}  // namespace

std::vector<RowModel> group_rows(const std::vector<ClusterCentroid>& centroids,
                                 const LayoutParams& params) {
  if (centroids.empty()) throw ParamError("group_rows: no centroids");
  if (!(params.row_distance_threshold > 0.0))
    throw ParamError("group_rows: row_distance_threshold must be positive");
  std::unordered_set<std::uint32_t> seen;
  for (const ClusterCentroid& cc : centroids)
    if (!seen.insert(cc.cluster_id).second)
      throw ParamError("group_rows: duplicate cluster id " + std::to_string(cc.cluster_id));

  std::vector<ClusterCentroid> sorted = centroids;
  std::sort(sorted.begin(), sorted.end(),
            [](const ClusterCentroid& a, const ClusterCentroid& b) {
              if (a.centroid.y != b.centroid.y) return a.centroid.y < b.centroid.y;
              return a.cluster_id < b.cluster_id;
            });

  std::vector<DraftRow> drafts;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i == 0 ||
        sorted[i].centroid.y - sorted[i - 1].centroid.y > params.row_distance_threshold)
      drafts.emplace_back();
    drafts.back().members.push_back(sorted[i]);
  }

  for (DraftRow& row : drafts) {
    const auto n = static_cast<double>(row.members.size());
    double sum_x = 0.0, sum_y = 0.0;
    double min_x = row.members.front().centroid.x;
    double max_x = min_x;
    for (const ClusterCentroid& cc : row.members) {
      sum_x += cc.centroid.x;
      sum_y += cc.centroid.y;
      min_x = std::min(min_x, cc.centroid.x);
      max_x = std::max(max_x, cc.centroid.x);
    }
    const double mean_x = sum_x / n;
    row.mean_y = sum_y / n;
    if (max_x - min_x <= kFlatRowSpanX) {
      row.slope = 0.0;
      row.intercept = row.mean_y;
    } else {
      double sxx = 0.0, sxy = 0.0;
      for (const ClusterCentroid& cc : row.members) {
        const double dx = cc.centroid.x - mean_x;
        sxx += dx * dx;
        sxy += dx * (cc.centroid.y - row.mean_y);
      }
      row.slope = sxy / sxx;
      row.intercept = row.mean_y - row.slope * mean_x;
    }
    row.side = row.mean_y < params.reference_y ? RowSide::right : RowSide::left;
    row.distance = std::abs(row.mean_y - params.reference_y);
    std::sort(row.members.begin(), row.members.end(),
              [](const ClusterCentroid& a, const ClusterCentroid& b) {
                if (a.centroid.x != b.centroid.x) return a.centroid.x < b.centroid.x;
                return a.cluster_id < b.cluster_id;
              });
  }

  std::vector<RowModel> out;
  out.reserve(drafts.size());
  for (const RowSide side : {RowSide::left, RowSide::right}) {
    std::vector<const DraftRow*> side_rows;
    for (const DraftRow& row : drafts)
      if (row.side == side) side_rows.push_back(&row);
    std::sort(side_rows.begin(), side_rows.end(), [](const DraftRow* a, const DraftRow* b) {
      if (a->distance != b->distance) return a->distance < b->distance;
      return a->mean_y < b->mean_y;
    });
    for (std::size_t i = 0; i < side_rows.size(); ++i) {
      RowModel model;
      model.row_id = static_cast<int>(i);
      model.side = side;
      model.slope = side_rows[i]->slope;
      model.intercept = side_rows[i]->intercept;
      model.members.reserve(side_rows[i]->members.size());
      for (const ClusterCentroid& cc : side_rows[i]->members)
        model.members.push_back(cc.cluster_id);
      out.push_back(std::move(model));
    }
  }
  return out;
}

std::vector<TreeLabel> label_trees(const std::vector<RowModel>& rows) {
  std::vector<TreeLabel> out;
  for (const RowSide side : {RowSide::left, RowSide::right}) {
    std::vector<const RowModel*> side_rows;
    for (const RowModel& row : rows)
      if (row.side == side) side_rows.push_back(&row);
    std::sort(side_rows.begin(), side_rows.end(),
              [](const RowModel* a, const RowModel* b) { return a->row_id < b->row_id; });
    const char* prefix = side == RowSide::left ? "L_" : "R_";
    std::size_t next = 0;
    for (const RowModel* row : side_rows)
      for (const std::uint32_t id : row->members)
        out.push_back({id, prefix + std::to_string(next++)});
  }
  return out;
}

}  // namespace canopy
