#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "canopy/io.hpp"

namespace canopy {

namespace {

using nlohmann::json;

const char* provenance_name(Provenance p) {
  return p == Provenance::dbscan ? "dbscan" : "spectral_split";
}

Provenance provenance_from(const std::string& s) {
  if (s == "dbscan") return Provenance::dbscan;
  if (s == "spectral_split") return Provenance::spectral_split;
  throw ParseError("unknown provenance '" + s + "'");
}

void check_unique_labels(const std::vector<TreeReport>& records) {
  std::unordered_set<std::string> seen;
  for (const TreeReport& r : records)
    if (!seen.insert(r.label).second)
      throw ValidationError("duplicate report label '" + r.label + "'");
}

}  // namespace

void write_report(const std::vector<TreeReport>& records, const std::string& path,
                  ReportFormat format) {
  check_unique_labels(records);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);

  if (format == ReportFormat::json) {
    json arr = json::array();
    for (const TreeReport& r : records) {
      arr.push_back({{"label", r.label},
                     {"row_id", r.row_id},
                     {"index_in_row", r.index_in_row},
                     {"centroid", {{"x", r.centroid.x}, {"y", r.centroid.y}, {"z", r.centroid.z}}},
                     {"point_count", r.point_count},
                     {"convex_hull_volume", r.convex_hull_volume},
                     {"alpha_shape_volume", r.alpha_shape_volume},
                     {"provenance", provenance_name(r.provenance)}});
    }
    out << arr.dump(2) << '\n';
  } else {
    out << "label,row_id,index_in_row,centroid_x,centroid_y,centroid_z,point_count,"
           "convex_hull_volume,alpha_shape_volume,provenance\n";
    out.precision(12);
    for (const TreeReport& r : records)
      out << r.label << ',' << r.row_id << ',' << r.index_in_row << ',' << r.centroid.x << ','
          << r.centroid.y << ',' << r.centroid.z << ',' << r.point_count << ','
          << r.convex_hull_volume << ',' << r.alpha_shape_volume << ','
          << provenance_name(r.provenance) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<TreeReport> read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  json arr;
  try {
    in >> arr;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!arr.is_array()) throw ParseError(path + ": report JSON must be an array");
  std::vector<TreeReport> records;
  records.reserve(arr.size());
  try {
    for (const json& j : arr) {
      TreeReport r;
      r.label = j.at("label").get<std::string>();
      r.row_id = j.at("row_id").get<int>();
      r.index_in_row = j.at("index_in_row").get<int>();
      r.centroid = {j.at("centroid").at("x").get<double>(),
                    j.at("centroid").at("y").get<double>(),
                    j.at("centroid").at("z").get<double>()};
      r.point_count = j.at("point_count").get<std::size_t>();
      r.convex_hull_volume = j.at("convex_hull_volume").get<double>();
      r.alpha_shape_volume = j.at("alpha_shape_volume").get<double>();
      r.provenance = provenance_from(j.at("provenance").get<std::string>());
      records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return records;
}

}  // namespace canopy
