#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "canopy/io.hpp"
#include "canopy/layout.hpp"
#include "canopy/segment.hpp"
#include "canopy/synth.hpp"

namespace canopy {

/// Outcome for one ground-truth tree. purity and coverage are filled by
/// match_clusters_to_truth; evaluate_run joins at the report level, where
/// neither is computable, and leaves them empty.
struct TreeMatch {
  int tree_id = 0;
  std::optional<std::size_t> cluster;  // index of the matched cluster/report
  std::optional<double> purity;        // matched cluster's points on this tree
  std::optional<double> coverage;      // of the tree's crown points captured
  bool success = false;
};

struct SegmentationScore {
  std::size_t matched_trees = 0;  // trees counted as correctly segmented
  std::size_t total_trees = 0;
  double success_rate = 0.0;       // matched_trees / total_trees
  std::vector<TreeMatch> matches;  // one per truth tree, in truth order
};

/// Greedy one-to-one matching of truth trees to clusters by descending
/// crown-point overlap, ties to the earlier tree then the earlier cluster.
/// A tree counts as correctly segmented when at least 80% of its matched
/// cluster's points belong to it (purity) and the cluster holds at least
/// 80% of the tree's crown points present in the labeled cloud (coverage).
/// point_labels must describe the cloud the clusters index into; an index
/// past its end raises ValidationError, duplicate truth ids likewise.
SegmentationScore match_clusters_to_truth(const std::vector<TreeCluster>& clusters,
                                          const OrchardTruth& truth,
                                          const std::vector<PointLabel>& point_labels);

/// |estimate - gt| / gt * 100. Throws ParamError unless gt > 0.
double percent_error(double gt, double estimate);

struct VolumeError {
  std::string label;
  int tree_id = -1;
  double ground_truth_m3 = 0.0;
  double convex_hull_m3 = 0.0;
  double convex_hull_error_pct = 0.0;
  double alpha_shape_m3 = 0.0;
  double alpha_shape_error_pct = 0.0;
};

struct EvaluationSummary {
  SegmentationScore segmentation;
  std::vector<VolumeError> volumes;  // joined rows, in truth order
  double mean_convex_error_pct = 0.0;  // over joined rows, 0 when none join
  double max_convex_error_pct = 0.0;
  double mean_alpha_error_pct = 0.0;
  double max_alpha_error_pct = 0.0;
  std::vector<std::string> unmatched_truth_labels;   // truth order
  std::vector<std::string> unmatched_report_labels;  // report order
};

/// Joins reports to truth by label. Truth trees receive labels by running
/// the same row layout convention on their centroids, so a geometrically
/// faithful run joins every tree. Unjoined labels on either side are
/// listed, not fatal. The report-level segmentation score counts a truth
/// tree as matched when a report carries its label. Throws ParamError on
/// empty truth and ValidationError on duplicate labels or truth ids.
EvaluationSummary evaluate_run(const std::vector<TreeReport>& reports,
                               const std::vector<TreeTruth>& truth,
                               const LayoutParams& layout = LayoutParams{});

/// {segmentation: {...}, volumes: [{label, gt, convex, convex_err_pct,
/// alpha, alpha_err_pct}], means: {...}, unmatched_truth, unmatched_reports}
void write_evaluation_json(const EvaluationSummary& summary, const std::string& path);

/// Fixed-width per-tree table: tree, label, gt, convex and alpha volumes
/// with their percent errors, two decimals throughout.
std::string format_volume_table(const EvaluationSummary& summary);

}  // namespace canopy
