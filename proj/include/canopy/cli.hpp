#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "canopy/synth.hpp"

namespace canopy::cli {

/// Every tunable of the run pipeline, flat. Field names match the long CLI
/// flags and config-file keys (dashes for underscores).
struct PipelineConfig {
  std::string input;
  std::string out_dir;
  double epsilon = 0.8;
  std::size_t min_points = 1300;
  double voxel = 0.1;
  double alpha = 0.9;
  std::size_t max_cluster_size = 45000;
  std::size_t knn_k = 10;
  bool enable_split = true;
  double trunk_band = 0.8;
  int ransac_iters = 500;
  double ransac_threshold = 0.15;
  double row_threshold = 2.0;
  double reference_y = 0.0;
  std::uint64_t seed = 0;
  std::size_t embed_sample_cap = 5000;
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-6;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Flat "key = value" lines, '#' comments. Keys are the long flag names.
/// Unknown or repeated keys and malformed values raise ParamError or
/// ParseError naming the key or line.
PipelineConfig load_config_file(const std::string& path);

/// Throws ParamError naming the offending key when a field violates its
/// owning stage's invariants.
void validate_config(const PipelineConfig& config);

/// Reads the "config" object echoed into a run manifest back into a
/// PipelineConfig; a faithful manifest reloads to the exact config the run
/// used.
PipelineConfig load_manifest_config(const std::string& manifest_path);

/// Full pipeline: read, preprocess, downsample, segment, layout, volumes,
/// reports. Writes segmented.ply, trees.json, trees.csv, manifest.json into
/// out_dir. Returns 0 on success, 2 when the only failures were per-tree
/// degenerate geometry (reports still written), 1 on fatal error.
int cmd_run(const PipelineConfig& config);

struct SynthConfig {
  OrchardSpec spec;
  std::string out_dir;
};

/// Writes cloud.ply and truth.csv for the orchard spec; deterministic per seed.
int cmd_synth(const SynthConfig& config);

struct EvalConfig {
  std::string report_path;
  std::string truth_path;
  std::string out_path;  // summary JSON
  double row_threshold = 2.0;
  double reference_y = 0.0;
};

/// Joins reports against truth, writes the summary JSON, prints a per-tree
/// volume table. Unjoined labels are printed each by name and yield exit 2;
/// unreadable inputs exit 1.
int cmd_eval(const EvalConfig& config);

/// Argument-vector entry point (args exclude the program name). Subcommands:
/// run, synth, eval. A --config file supplies run defaults; explicit flags
/// win over file values.
int run_cli(const std::vector<std::string>& args);

}  // namespace canopy::cli
