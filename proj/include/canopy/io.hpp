#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "canopy/core.hpp"

namespace canopy {

enum class CloudFormat { ply_ascii, ply_binary_le, xyz_text };

/// Inspects magic bytes (and the PLY format line); falls back to the
/// extension for plain text.
CloudFormat detect_format(const std::string& path);

/// Points in file order; non-coordinate properties are skipped.
/// Malformed input raises ParseError naming a line or byte offset.
PointCloud read_cloud(const std::string& path);

struct LabeledCloud {
  PointCloud cloud;
  bool has_labels = false;
  std::vector<std::int32_t> labels;  // per-vertex "cluster" property when present
};

LabeledCloud read_cloud_labeled(const std::string& path);

/// Coordinates are stored as doubles, so ply_binary_le round-trips
/// bit-exactly. Optional labels become an int property named "cluster".
void write_cloud(const PointCloud& cloud, const std::string& path, CloudFormat format,
                 const std::vector<std::int32_t>* labels = nullptr);

struct TreeReport {
  std::string label;  // e.g. "L_3"
  int row_id = 0;
  int index_in_row = 0;
  Point3 centroid{};
  std::size_t point_count = 0;
  double convex_hull_volume = 0.0;
  double alpha_shape_volume = 0.0;
  Provenance provenance = Provenance::dbscan;
};

enum class ReportFormat { json, csv };

/// JSON: array of objects keyed exactly by the TreeReport field names.
/// CSV: header row with the same names (centroid flattened to x/y/z).
/// Duplicate labels raise ValidationError.
void write_report(const std::vector<TreeReport>& records, const std::string& path,
                  ReportFormat format);

std::vector<TreeReport> read_report_json(const std::string& path);

}  // namespace canopy
