#include "canopy/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "canopy/error.hpp"

namespace canopy {

SegmentationScore match_clusters_to_truth(const std::vector<TreeCluster>& clusters,
                                          const OrchardTruth& truth,
                                          const std::vector<PointLabel>& point_labels) {
  if (truth.trees.empty()) throw ParamError("match_clusters_to_truth: no ground-truth trees");
  std::unordered_map<int, std::size_t> tree_pos;
  for (std::size_t t = 0; t < truth.trees.size(); ++t)
    if (!tree_pos.emplace(truth.trees[t].tree_id, t).second)
      throw ValidationError("duplicate truth tree id " +
                            std::to_string(truth.trees[t].tree_id));

  const std::size_t n_trees = truth.trees.size();
  const std::size_t n_clusters = clusters.size();

  std::vector<std::size_t> crown_total(n_trees, 0);
  for (const PointLabel& l : point_labels) {
    if (l.part != PointPart::crown) continue;
    const auto it = tree_pos.find(l.tree_id);
    if (it != tree_pos.end()) ++crown_total[it->second];
  }

  // crown_overlap drives the matching; owned counts any part of the tree
  // and feeds purity
  std::vector<std::vector<std::size_t>> crown_overlap(n_trees,
                                                      std::vector<std::size_t>(n_clusters, 0));
  std::vector<std::vector<std::size_t>> owned(n_trees, std::vector<std::size_t>(n_clusters, 0));
  for (std::size_t c = 0; c < n_clusters; ++c) {
    for (const std::uint32_t p : clusters[c].point_indices) {
      if (p >= point_labels.size())
        throw ValidationError("cluster point index " + std::to_string(p) +
                              " outside labeled cloud of size " +
                              std::to_string(point_labels.size()));
      const PointLabel& l = point_labels[p];
      const auto it = tree_pos.find(l.tree_id);
      if (it == tree_pos.end()) continue;
      ++owned[it->second][c];
      if (l.part == PointPart::crown) ++crown_overlap[it->second][c];
    }
  }

  struct Candidate {
    std::size_t overlap;
    std::size_t tree;
    std::size_t cluster;
  };
  std::vector<Candidate> candidates;
  for (std::size_t t = 0; t < n_trees; ++t)
    for (std::size_t c = 0; c < n_clusters; ++c)
      if (crown_overlap[t][c] > 0) candidates.push_back({crown_overlap[t][c], t, c});
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.overlap, a.tree, a.cluster) < std::tie(a.overlap, b.tree, b.cluster);
  });

  SegmentationScore score;
  score.total_trees = n_trees;
  score.matches.resize(n_trees);
  for (std::size_t t = 0; t < n_trees; ++t) score.matches[t].tree_id = truth.trees[t].tree_id;

  std::vector<char> tree_taken(n_trees, 0), cluster_taken(n_clusters, 0);
  for (const Candidate& cand : candidates) {
    if (tree_taken[cand.tree] || cluster_taken[cand.cluster]) continue;
    tree_taken[cand.tree] = 1;
    cluster_taken[cand.cluster] = 1;
    TreeMatch& m = score.matches[cand.tree];
    m.cluster = cand.cluster;
    m.purity = static_cast<double>(owned[cand.tree][cand.cluster]) /
               static_cast<double>(clusters[cand.cluster].point_indices.size());
    m.coverage = static_cast<double>(cand.overlap) /
                 static_cast<double>(crown_total[cand.tree]);
    m.success = *m.purity >= 0.8 && *m.coverage >= 0.8;
    if (m.success) ++score.matched_trees;
  }
  score.success_rate =
      static_cast<double>(score.matched_trees) / static_cast<double>(score.total_trees);
  return score;
}

double percent_error(double gt, double estimate) {
  if (!(gt > 0.0)) throw ParamError("percent_error: ground truth must be positive");
  return std::abs(estimate - gt) / gt * 100.0;
}

EvaluationSummary evaluate_run(const std::vector<TreeReport>& reports,
                               const std::vector<TreeTruth>& truth,
                               const LayoutParams& layout) {
  if (truth.empty()) throw ParamError("evaluate_run: no ground-truth trees");

  std::unordered_map<std::string, std::size_t> report_by_label;
  for (std::size_t r = 0; r < reports.size(); ++r)
    if (!report_by_label.emplace(reports[r].label, r).second)
      throw ValidationError("duplicate report label '" + reports[r].label + "'");

  std::vector<ClusterCentroid> centroids;
  centroids.reserve(truth.size());
  for (std::size_t t = 0; t < truth.size(); ++t)
    centroids.push_back({static_cast<std::uint32_t>(t), truth[t].centroid});
  std::vector<std::string> truth_label(truth.size());
  for (const TreeLabel& tl : label_trees(group_rows(centroids, layout)))
    truth_label[tl.cluster_id] = tl.label;

  EvaluationSummary summary;
  summary.segmentation.total_trees = truth.size();
  summary.segmentation.matches.resize(truth.size());
  std::vector<char> report_joined(reports.size(), 0);

  for (std::size_t t = 0; t < truth.size(); ++t) {
    TreeMatch& m = summary.segmentation.matches[t];
    m.tree_id = truth[t].tree_id;
    const auto it = report_by_label.find(truth_label[t]);
    if (it == report_by_label.end()) {
      summary.unmatched_truth_labels.push_back(truth_label[t]);
      continue;
    }
    const TreeReport& rep = reports[it->second];
    report_joined[it->second] = 1;
    m.cluster = it->second;
    m.success = true;
    ++summary.segmentation.matched_trees;

    VolumeError row;
    row.label = truth_label[t];
    row.tree_id = truth[t].tree_id;
    row.ground_truth_m3 = truth[t].volume_m3;
    row.convex_hull_m3 = rep.convex_hull_volume;
    row.convex_hull_error_pct = percent_error(row.ground_truth_m3, row.convex_hull_m3);
    row.alpha_shape_m3 = rep.alpha_shape_volume;
    row.alpha_shape_error_pct = percent_error(row.ground_truth_m3, row.alpha_shape_m3);
    summary.volumes.push_back(std::move(row));
  }
  for (std::size_t r = 0; r < reports.size(); ++r)
    if (!report_joined[r]) summary.unmatched_report_labels.push_back(reports[r].label);

  summary.segmentation.success_rate =
      static_cast<double>(summary.segmentation.matched_trees) /
      static_cast<double>(summary.segmentation.total_trees);

  if (!summary.volumes.empty()) {
    double sum_c = 0.0, sum_a = 0.0;
    for (const VolumeError& v : summary.volumes) {
      sum_c += v.convex_hull_error_pct;
      sum_a += v.alpha_shape_error_pct;
      summary.max_convex_error_pct =
          std::max(summary.max_convex_error_pct, v.convex_hull_error_pct);
      summary.max_alpha_error_pct =
          std::max(summary.max_alpha_error_pct, v.alpha_shape_error_pct);
    }
    const auto n = static_cast<double>(summary.volumes.size());
    summary.mean_convex_error_pct = sum_c / n;
    summary.mean_alpha_error_pct = sum_a / n;
  }
  return summary;
}

void write_evaluation_json(const EvaluationSummary& summary, const std::string& path) {
  using nlohmann::json;
  json matches = json::array();
  for (const TreeMatch& m : summary.segmentation.matches) {
    json jm = {{"tree_id", m.tree_id}, {"success", m.success}};
    jm["cluster"] = m.cluster ? json(*m.cluster) : json(nullptr);
    jm["purity"] = m.purity ? json(*m.purity) : json(nullptr);
    jm["coverage"] = m.coverage ? json(*m.coverage) : json(nullptr);
    matches.push_back(std::move(jm));
  }
  json volumes = json::array();
  for (const VolumeError& v : summary.volumes)
    volumes.push_back({{"label", v.label},
                       {"gt", v.ground_truth_m3},
                       {"convex", v.convex_hull_m3},
                       {"convex_err_pct", v.convex_hull_error_pct},
                       {"alpha", v.alpha_shape_m3},
                       {"alpha_err_pct", v.alpha_shape_error_pct}});
  const json doc = {
      {"segmentation",
       {{"matched_trees", summary.segmentation.matched_trees},
        {"total_trees", summary.segmentation.total_trees},
        {"success_rate", summary.segmentation.success_rate},
        {"matches", std::move(matches)}}},
      {"volumes", std::move(volumes)},
      {"means",
       {{"convex_mean_pct", summary.mean_convex_error_pct},
        {"convex_max_pct", summary.max_convex_error_pct},
        {"alpha_mean_pct", summary.mean_alpha_error_pct},
        {"alpha_max_pct", summary.max_alpha_error_pct}}},
      {"unmatched_truth", summary.unmatched_truth_labels},
      {"unmatched_reports", summary.unmatched_report_labels}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::string format_volume_table(const EvaluationSummary& summary) {
  std::string out =
      "tree  label       gt_m3  convex_m3  convex_err_pct  alpha_m3  alpha_err_pct\n";
  char line[160];
  for (const VolumeError& v : summary.volumes) {
    std::snprintf(line, sizeof line, "%4d  %-6s %9.2f %10.2f %15.2f %9.2f %14.2f\n",
                  v.tree_id, v.label.c_str(), v.ground_truth_m3, v.convex_hull_m3,
                  v.convex_hull_error_pct, v.alpha_shape_m3, v.alpha_shape_error_pct);
    out += line;
  }
  return out;
}

}  // namespace canopy
