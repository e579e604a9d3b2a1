#include "canopy/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "canopy/core.hpp"
#include "canopy/error.hpp"
#include "canopy/eval.hpp"
#include "canopy/io.hpp"
#include "canopy/layout.hpp"
#include "canopy/preprocess.hpp"
#include "canopy/segment.hpp"
#include "canopy/volume.hpp"

namespace canopy::cli {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ParamError("invalid value for '" + key + "': " + v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos == v.size() && v.find('-') == std::string::npos) return x;
  } catch (const std::exception&) {
  }
  throw ParamError("invalid value for '" + key + "': " + v);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ParamError("invalid value for '" + key + "': " + v);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ParamError("invalid value for '" + key + "': expected on|off, got " + v);
}

// one row per config key keeps the file parser, the manifest echo, and the
// reload in lockstep
void apply_key(PipelineConfig& c, const std::string& key, const std::string& v) {
  if (key == "input") c.input = v;
  else if (key == "out-dir") c.out_dir = v;
  else if (key == "epsilon") c.epsilon = parse_double(key, v);
  else if (key == "min-points") c.min_points = parse_size(key, v);
  else if (key == "voxel") c.voxel = parse_double(key, v);
  else if (key == "alpha") c.alpha = parse_double(key, v);
  else if (key == "max-cluster-size") c.max_cluster_size = parse_size(key, v);
  else if (key == "knn-k") c.knn_k = parse_size(key, v);
  else if (key == "enable-split") c.enable_split = parse_bool(key, v);
  else if (key == "trunk-band") c.trunk_band = parse_double(key, v);
  else if (key == "ransac-iters") c.ransac_iters = parse_int(key, v);
  else if (key == "ransac-threshold") c.ransac_threshold = parse_double(key, v);
  else if (key == "row-threshold") c.row_threshold = parse_double(key, v);
  else if (key == "reference-y") c.reference_y = parse_double(key, v);
  else if (key == "seed") c.seed = parse_u64(key, v);
  else if (key == "embed-sample-cap") c.embed_sample_cap = parse_size(key, v);
  else if (key == "kmeans-max-iters") c.kmeans_max_iters = parse_int(key, v);
  else if (key == "kmeans-tol") c.kmeans_tol = parse_double(key, v);
  else throw ParamError("unknown config key '" + key + "'");
}

json config_to_json(const PipelineConfig& c) {
  return {{"input", c.input},
          {"out-dir", c.out_dir},
          {"epsilon", c.epsilon},
          {"min-points", c.min_points},
          {"voxel", c.voxel},
          {"alpha", c.alpha},
          {"max-cluster-size", c.max_cluster_size},
          {"knn-k", c.knn_k},
          {"enable-split", c.enable_split},
          {"trunk-band", c.trunk_band},
          {"ransac-iters", c.ransac_iters},
          {"ransac-threshold", c.ransac_threshold},
          {"row-threshold", c.row_threshold},
          {"reference-y", c.reference_y},
          {"seed", c.seed},
          {"embed-sample-cap", c.embed_sample_cap},
          {"kmeans-max-iters", c.kmeans_max_iters},
          {"kmeans-tol", c.kmeans_tol}};
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  c.input = j.at("input").get<std::string>();
  c.out_dir = j.at("out-dir").get<std::string>();
  c.epsilon = j.at("epsilon").get<double>();
  c.min_points = j.at("min-points").get<std::size_t>();
  c.voxel = j.at("voxel").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.max_cluster_size = j.at("max-cluster-size").get<std::size_t>();
  c.knn_k = j.at("knn-k").get<std::size_t>();
  c.enable_split = j.at("enable-split").get<bool>();
  c.trunk_band = j.at("trunk-band").get<double>();
  c.ransac_iters = j.at("ransac-iters").get<int>();
  c.ransac_threshold = j.at("ransac-threshold").get<double>();
  c.row_threshold = j.at("row-threshold").get<double>();
  c.reference_y = j.at("reference-y").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.embed_sample_cap = j.at("embed-sample-cap").get<std::size_t>();
  c.kmeans_max_iters = j.at("kmeans-max-iters").get<int>();
  c.kmeans_tol = j.at("kmeans-tol").get<double>();
  return c;
}

std::string join_path(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

PipelineConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  PipelineConfig config;
  std::vector<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected key = value");
    for (const std::string& s : seen)
      if (s == key) throw ParamError("duplicate config key '" + key + "'");
    seen.push_back(key);
    apply_key(config, key, value);
  }
  return config;
}

void validate_config(const PipelineConfig& c) {
  if (!(c.epsilon > 0.0) || !std::isfinite(c.epsilon))
    throw ParamError("epsilon must be positive");
  if (c.min_points < 1) throw ParamError("min-points must be at least 1");
  if (!(c.voxel > 0.0) || !std::isfinite(c.voxel)) throw ParamError("voxel must be positive");
  if (!(c.alpha > 0.0) || !std::isfinite(c.alpha)) throw ParamError("alpha must be positive");
  if (c.max_cluster_size < 1) throw ParamError("max-cluster-size must be at least 1");
  if (c.knn_k < 1) throw ParamError("knn-k must be at least 1");
  if (c.embed_sample_cap <= c.knn_k)
    throw ParamError("embed-sample-cap must exceed knn-k");
  if (!(c.trunk_band > 0.0) || !std::isfinite(c.trunk_band))
    throw ParamError("trunk-band must be positive");
  if (c.ransac_iters < 1) throw ParamError("ransac-iters must be at least 1");
  if (!(c.ransac_threshold > 0.0) || !std::isfinite(c.ransac_threshold))
    throw ParamError("ransac-threshold must be positive");
  if (!(c.row_threshold > 0.0) || !std::isfinite(c.row_threshold))
    throw ParamError("row-threshold must be positive");
  if (!std::isfinite(c.reference_y)) throw ParamError("reference-y must be finite");
  if (c.kmeans_max_iters < 1) throw ParamError("kmeans-max-iters must be at least 1");
  if (!(c.kmeans_tol >= 0.0) || !std::isfinite(c.kmeans_tol))
    throw ParamError("kmeans-tol must be non-negative");
}

PipelineConfig load_manifest_config(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest: " + manifest_path);
  json doc;
  try {
    in >> doc;
    return config_from_json(doc.at("config"));
  } catch (const json::exception& e) {
    throw ParseError(manifest_path + ": " + e.what());
  }
}

int cmd_run(const PipelineConfig& config) {
  std::string stage = "config";
  try {
    validate_config(config);
    if (config.input.empty()) throw ParamError("input path is required");
    if (config.out_dir.empty()) throw ParamError("out-dir is required");
    std::filesystem::create_directories(config.out_dir);

    const auto t_start = std::chrono::steady_clock::now();
    std::vector<std::pair<std::string, double>> stage_ms;
    const auto timed = [&](const char* name, const std::function<void()>& fn) {
      stage = name;
      const auto t0 = std::chrono::steady_clock::now();
      fn();
      stage_ms.emplace_back(name, elapsed_ms(t0));
    };

    PointCloud cloud, canopy_cloud, down;
    timed("read", [&] { cloud = read_cloud(config.input); });

    timed("preprocess", [&] {
      PreprocessParams pp;
      pp.ransac_iterations = config.ransac_iters;
      pp.ransac_distance_threshold = config.ransac_threshold;
      pp.trunk_band_height = config.trunk_band;
      pp.seed = config.seed;
      canopy_cloud = remove_ground_and_trunk(cloud, pp);
    });

    timed("downsample", [&] { down = voxel_downsample(canopy_cloud, config.voxel); });

    std::vector<TreeCluster> clusters;
    timed("segment", [&] {
      SpectralParams sp;
      sp.max_cluster_size = config.max_cluster_size;
      sp.knn_k = config.knn_k;
      sp.embed_sample_cap = config.embed_sample_cap;
      sp.kmeans_max_iters = config.kmeans_max_iters;
      sp.kmeans_tol = config.kmeans_tol;
      sp.seed = config.seed;
      clusters = segment_trees(down, DbscanParams{config.epsilon, config.min_points}, sp,
                               config.enable_split);
    });

    struct Placement {
      std::string label;
      int row_id = 0;
      int index_in_row = 0;
    };
    std::vector<Placement> place(clusters.size());
    std::vector<std::size_t> report_order;
    timed("layout", [&] {
      if (clusters.empty()) return;
      std::vector<ClusterCentroid> centroids;
      centroids.reserve(clusters.size());
      for (std::size_t c = 0; c < clusters.size(); ++c)
        centroids.push_back({static_cast<std::uint32_t>(c), clusters[c].centroid});
      const std::vector<RowModel> rows =
          group_rows(centroids, LayoutParams{config.row_threshold, config.reference_y});
      for (const RowModel& row : rows)
        for (std::size_t p = 0; p < row.members.size(); ++p) {
          place[row.members[p]].row_id = row.row_id;
          place[row.members[p]].index_in_row = static_cast<int>(p);
        }
      for (const TreeLabel& tl : label_trees(rows)) {
        place[tl.cluster_id].label = tl.label;
        report_order.push_back(tl.cluster_id);
      }
    });

    std::vector<ClusterVolumes> volumes;
    timed("volumes", [&] {
      std::vector<std::vector<std::uint32_t>> index_sets;
      index_sets.reserve(clusters.size());
      for (const TreeCluster& c : clusters) index_sets.push_back(c.point_indices);
      volumes = estimate_tree_volumes(down, index_sets, config.alpha, config.voxel);
    });

    std::vector<TreeReport> reports;
    std::vector<std::string> degenerate_labels;
    timed("reports", [&] {
      reports.reserve(report_order.size());
      for (const std::size_t c : report_order) {
        TreeReport r;
        r.label = place[c].label;
        r.row_id = place[c].row_id;
        r.index_in_row = place[c].index_in_row;
        r.centroid = volumes[c].centroid;
        r.point_count = volumes[c].point_count;
        r.convex_hull_volume = volumes[c].convex_hull_volume;
        r.alpha_shape_volume = volumes[c].alpha_shape_volume;
        r.provenance = clusters[c].provenance;
        if (volumes[c].degenerate) degenerate_labels.push_back(r.label);
        reports.push_back(std::move(r));
      }
      write_report(reports, join_path(config.out_dir, "trees.json"), ReportFormat::json);
      write_report(reports, join_path(config.out_dir, "trees.csv"), ReportFormat::csv);
      std::vector<std::int32_t> labels(down.size(), -1);
      for (std::size_t c = 0; c < clusters.size(); ++c)
        for (const std::uint32_t i : clusters[c].point_indices)
          labels[i] = static_cast<std::int32_t>(c);
      write_cloud(down, join_path(config.out_dir, "segmented.ply"),
                  CloudFormat::ply_binary_le, &labels);
    });

    const double total_ms = elapsed_ms(t_start);
    stage = "manifest";
    json stages = json::array();
    for (const auto& [name, ms] : stage_ms) stages.push_back({{"name", name}, {"ms", ms}});
    const json manifest = {
        {"tool", {{"name", "canopy"}, {"version", "0.1.0"}}},
        {"config", config_to_json(config)},
        {"counts",
         {{"input_points", cloud.size()},
          {"canopy_points", canopy_cloud.size()},
          {"downsampled_points", down.size()},
          {"clusters", clusters.size()},
          {"degenerate_clusters", degenerate_labels.size()}}},
        {"stages", std::move(stages)},
        {"total_ms", total_ms}};
    {
      const std::string path = join_path(config.out_dir, "manifest.json");
      std::ofstream out(path);
      if (!out) throw IoError("cannot open for writing: " + path);
      out << manifest.dump(2) << '\n';
      if (!out) throw IoError("write failed: " + path);
    }

    std::cout << "canopy run: " << clusters.size() << " trees from " << cloud.size()
              << " points -> " << config.out_dir << " (" << total_ms << " ms)\n";
    if (!degenerate_labels.empty()) {
      std::cerr << "canopy run: degenerate geometry for";
      for (const std::string& l : degenerate_labels) std::cerr << ' ' << l;
      std::cerr << " (volumes reported as 0)\n";
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "canopy run: " << stage << ": " << e.what() << '\n';
    return 1;
  }
}

int cmd_synth(const SynthConfig& config) {
  try {
    if (config.out_dir.empty()) throw ParamError("out-dir is required");
    std::filesystem::create_directories(config.out_dir);
    const Orchard orchard = generate_orchard(config.spec);
    write_cloud(orchard.cloud, join_path(config.out_dir, "cloud.ply"),
                CloudFormat::ply_binary_le);
    write_truth_csv(orchard.truth, join_path(config.out_dir, "truth.csv"));
    std::cout << "canopy synth: " << orchard.cloud.size() << " points, "
              << orchard.truth.trees.size() << " trees -> " << config.out_dir << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "canopy synth: " << e.what() << '\n';
    return 1;
  }
}

int cmd_eval(const EvalConfig& config) {
  try {
    const std::vector<TreeReport> reports = read_report_json(config.report_path);
    const std::vector<TreeTruth> truth = read_truth_csv(config.truth_path);
    const EvaluationSummary summary = evaluate_run(
        reports, truth, LayoutParams{config.row_threshold, config.reference_y});
    if (!config.out_path.empty()) write_evaluation_json(summary, config.out_path);

    std::cout << format_volume_table(summary);
    char line[160];
    std::snprintf(line, sizeof line,
                  "mean error: convex %.2f%%  alpha %.2f%%  (%zu of %zu trees joined)\n",
                  summary.mean_convex_error_pct, summary.mean_alpha_error_pct,
                  summary.segmentation.matched_trees, summary.segmentation.total_trees);
    std::cout << line;

    for (const std::string& l : summary.unmatched_truth_labels)
      std::cerr << "canopy eval: no report for truth label '" << l << "'\n";
    for (const std::string& l : summary.unmatched_report_labels)
      std::cerr << "canopy eval: no truth for report label '" << l << "'\n";
    return summary.unmatched_truth_labels.empty() && summary.unmatched_report_labels.empty()
               ? 0
               : 2;
  } catch (const std::exception& e) {
    std::cerr << "canopy eval: " << e.what() << '\n';
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"per-tree canopy volume estimation from orchard point clouds"};
  app.require_subcommand(1);
  int exit_code = 0;

  // run
  auto* run = app.add_subcommand("run", "segment a cloud and estimate per-tree volumes");
  PipelineConfig fl;
  std::string config_path;
  std::string split_text = "on";
  run->add_option("--config", config_path, "flat key = value config file; flags win");
  auto* o_input = run->add_option("--input", fl.input, "input cloud (.ply / .xyz)");
  auto* o_out = run->add_option("--out-dir", fl.out_dir, "output directory");
  auto* o_eps = run->add_option("--epsilon", fl.epsilon, "DBSCAN radius, m");
  auto* o_minp = run->add_option("--min-points", fl.min_points, "DBSCAN core threshold");
  auto* o_voxel = run->add_option("--voxel", fl.voxel, "downsample resolution, m");
  auto* o_alpha = run->add_option("--alpha", fl.alpha, "alpha shape radius, m");
  auto* o_maxc = run->add_option("--max-cluster-size", fl.max_cluster_size,
                                 "split clusters above this size");
  auto* o_knn = run->add_option("--knn-k", fl.knn_k, "neighbors in the split graph");
  auto* o_split = run->add_option("--enable-split", split_text,
                                  "split oversized clusters: on|off");
  auto* o_band = run->add_option("--trunk-band", fl.trunk_band, "trunk band height, m");
  auto* o_iters = run->add_option("--ransac-iters", fl.ransac_iters, "plane hypotheses");
  auto* o_thr = run->add_option("--ransac-threshold", fl.ransac_threshold,
                                "plane inlier distance, m");
  auto* o_rowt = run->add_option("--row-threshold", fl.row_threshold, "row y gap, m");
  auto* o_refy = run->add_option("--reference-y", fl.reference_y, "robot path axis, m");
  auto* o_seed = run->add_option("--seed", fl.seed, "seed for all stages");
  auto* o_cap = run->add_option("--embed-sample-cap", fl.embed_sample_cap,
                                "points embedded per split");
  auto* o_kmi = run->add_option("--kmeans-max-iters", fl.kmeans_max_iters, "k-means cap");
  auto* o_kmt = run->add_option("--kmeans-tol", fl.kmeans_tol, "k-means stop tolerance");
  run->callback([&] {
    PipelineConfig cfg =
        config_path.empty() ? PipelineConfig{} : load_config_file(config_path);
    if (o_input->count()) cfg.input = fl.input;
    if (o_out->count()) cfg.out_dir = fl.out_dir;
    if (o_eps->count()) cfg.epsilon = fl.epsilon;
    if (o_minp->count()) cfg.min_points = fl.min_points;
    if (o_voxel->count()) cfg.voxel = fl.voxel;
    if (o_alpha->count()) cfg.alpha = fl.alpha;
    if (o_maxc->count()) cfg.max_cluster_size = fl.max_cluster_size;
    if (o_knn->count()) cfg.knn_k = fl.knn_k;
    if (o_split->count()) cfg.enable_split = parse_bool("enable-split", split_text);
    if (o_band->count()) cfg.trunk_band = fl.trunk_band;
    if (o_iters->count()) cfg.ransac_iters = fl.ransac_iters;
    if (o_thr->count()) cfg.ransac_threshold = fl.ransac_threshold;
    if (o_rowt->count()) cfg.row_threshold = fl.row_threshold;
    if (o_refy->count()) cfg.reference_y = fl.reference_y;
    if (o_seed->count()) cfg.seed = fl.seed;
    if (o_cap->count()) cfg.embed_sample_cap = fl.embed_sample_cap;
    if (o_kmi->count()) cfg.kmeans_max_iters = fl.kmeans_max_iters;
    if (o_kmt->count()) cfg.kmeans_tol = fl.kmeans_tol;
    exit_code = cmd_run(cfg);
  });

  // synth
  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic orchard");
  SynthConfig sc;
  std::string shape_text = "sphere";
  synth->add_option("--out-dir", sc.out_dir, "output directory")->required();
  synth->add_option("--rows", sc.spec.rows, "orchard rows");
  synth->add_option("--trees-per-row", sc.spec.trees_per_row, "trees per row");
  synth->add_option("--row-spacing", sc.spec.row_spacing, "row spacing, m");
  synth->add_option("--tree-spacing", sc.spec.tree_spacing, "tree spacing, m");
  synth->add_option("--crown-shape", shape_text, "sphere|ellipsoid");
  synth->add_option("--crown-rx", sc.spec.crown.rx, "crown semi-axis x, m");
  synth->add_option("--crown-ry", sc.spec.crown.ry, "crown semi-axis y, m");
  synth->add_option("--crown-rz", sc.spec.crown.rz, "crown semi-axis z, m");
  synth->add_option("--radius-jitter", sc.spec.crown_radius_jitter, "crown size jitter");
  synth->add_option("--overlap", sc.spec.crown_overlap_fraction, "crown overlap fraction");
  synth->add_option("--trunk-height", sc.spec.trunk_height, "trunk height, m");
  synth->add_option("--points-per-tree", sc.spec.points_per_tree, "crown points per tree");
  synth->add_option("--ground-noise", sc.spec.ground_noise_sigma, "ground sigma, m");
  synth->add_option("--trunk-points", sc.spec.trunk_points_per_tree, "trunk points per tree");
  synth->add_option("--trunk-radius", sc.spec.trunk_radius, "trunk radius, m");
  synth->add_option("--ground-points", sc.spec.ground_points, "ground points total");
  synth->add_option("--seed", sc.spec.seed, "generator seed");
  synth->callback([&] {
    if (shape_text == "sphere") sc.spec.crown.shape = CrownShape::sphere;
    else if (shape_text == "ellipsoid") sc.spec.crown.shape = CrownShape::ellipsoid;
    else throw ParamError("invalid value for 'crown-shape': " + shape_text);
    exit_code = cmd_synth(sc);
  });

  // eval
  auto* eval = app.add_subcommand("eval", "score reports against ground truth");
  EvalConfig ec;
  eval->add_option("--report", ec.report_path, "trees.json from a run")->required();
  eval->add_option("--truth", ec.truth_path, "truth CSV")->required();
  eval->add_option("--out", ec.out_path, "summary JSON path");
  eval->add_option("--row-threshold", ec.row_threshold, "row y gap, m");
  eval->add_option("--reference-y", ec.reference_y, "robot path axis, m");
  eval->callback([&] { exit_code = cmd_eval(ec); });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "canopy: " << e.what() << '\n';
    return 1;
  }
  return exit_code;
}

}  // namespace canopy::cli
