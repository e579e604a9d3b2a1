#include "canopy/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace canopy {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return std::move(buf).str();
}

enum class Scalar : std::uint8_t { i8, u8, i16, u16, i32, u32, f32, f64 };

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::i8:
    case Scalar::u8:
      return 1;
    case Scalar::i16:
    case Scalar::u16:
      return 2;
    case Scalar::i32:
    case Scalar::u32:
    case Scalar::f32:
      return 4;
    case Scalar::f64:
      return 8;
  }
  return 0;
}

bool parse_scalar_type(const std::string& word, Scalar& out) {
  if (word == "char" || word == "int8") out = Scalar::i8;
  else if (word == "uchar" || word == "uint8") out = Scalar::u8;
  else if (word == "short" || word == "int16") out = Scalar::i16;
  else if (word == "ushort" || word == "uint16") out = Scalar::u16;
  else if (word == "int" || word == "int32") out = Scalar::i32;
  else if (word == "uint" || word == "uint32") out = Scalar::u32;
  else if (word == "float" || word == "float32") out = Scalar::f32;
  else if (word == "double" || word == "float64") out = Scalar::f64;
  else return false;
  return true;
}

struct Property {
  std::string name;
  bool is_list = false;
  Scalar count_type = Scalar::u8;
  Scalar type = Scalar::f64;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

struct PlyHeader {
  bool binary = false;
  std::vector<Element> elements;
  std::size_t body_offset = 0;  // byte offset just past end_header newline
  std::size_t header_lines = 0;
};

[[noreturn]] void fail_line(const std::string& path, std::size_t line, const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

[[noreturn]] void fail_byte(const std::string& path, std::size_t offset, const std::string& what) {
  throw ParseError(path + ": byte " + std::to_string(offset) + ": " + what);
}

PlyHeader parse_ply_header(const std::string& path, const std::string& data) {
  PlyHeader h;
  std::size_t pos = 0, line_no = 0;
  bool saw_format = false, done = false;
  while (pos < data.size()) {
    std::size_t eol = data.find('\n', pos);
    if (eol == std::string::npos) eol = data.size();
    std::string line = data.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no;
    pos = eol + 1;

    if (line_no == 1) {
      if (line != "ply") fail_line(path, 1, "missing 'ply' magic");
      continue;
    }
    std::istringstream ss(line);
    std::string kw;
    ss >> kw;
    if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
    if (kw == "format") {
      std::string fmt, ver;
      ss >> fmt >> ver;
      if (fmt == "ascii") h.binary = false;
      else if (fmt == "binary_little_endian") h.binary = true;
      else fail_line(path, line_no, "unsupported format '" + fmt + "'");
      if (ver != "1.0") fail_line(path, line_no, "unsupported PLY version '" + ver + "'");
      saw_format = true;
    } else if (kw == "element") {
      Element e;
      long long count = -1;
      if (!(ss >> e.name >> count) || count < 0)
        fail_line(path, line_no, "malformed element line");
      e.count = static_cast<std::size_t>(count);
      h.elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (h.elements.empty()) fail_line(path, line_no, "property before any element");
      Property p;
      std::string t1;
      ss >> t1;
      if (t1 == "list") {
        std::string ct, vt;
        if (!(ss >> ct >> vt >> p.name) || !parse_scalar_type(ct, p.count_type) ||
            !parse_scalar_type(vt, p.type))
          fail_line(path, line_no, "malformed list property");
        p.is_list = true;
      } else {
        if (!parse_scalar_type(t1, p.type) || !(ss >> p.name))
          fail_line(path, line_no, "malformed property line");
      }
      h.elements.back().properties.push_back(std::move(p));
    } else if (kw == "end_header") {
      h.body_offset = pos;
      h.header_lines = line_no;
      done = true;
      break;
    } else {
      fail_line(path, line_no, "unknown header keyword '" + kw + "'");
    }
  }
  if (!done) fail_line(path, line_no, "missing end_header");
  if (!saw_format) fail_line(path, line_no, "missing format line");
  return h;
}

double decode_scalar(const char* p, Scalar s) {
  switch (s) {
    case Scalar::i8: {
      std::int8_t v;
      std::memcpy(&v, p, 1);
      return static_cast<double>(v);
    }
    case Scalar::u8: {
      std::uint8_t v;
      std::memcpy(&v, p, 1);
      return static_cast<double>(v);
    }
    case Scalar::i16: {
      std::int16_t v;
      std::memcpy(&v, p, 2);
      return static_cast<double>(v);
    }
    case Scalar::u16: {
      std::uint16_t v;
      std::memcpy(&v, p, 2);
      return static_cast<double>(v);
    }
    case Scalar::i32: {
      std::int32_t v;
      std::memcpy(&v, p, 4);
      return static_cast<double>(v);
    }
    case Scalar::u32: {
      std::uint32_t v;
      std::memcpy(&v, p, 4);
      return static_cast<double>(v);
    }
    case Scalar::f32: {
      float v;
      std::memcpy(&v, p, 4);
      return static_cast<double>(v);
    }
    case Scalar::f64: {
      double v;
      std::memcpy(&v, p, 8);
      return v;
    }
  }
  return 0.0;
}

struct VertexLayout {
  int ix = -1, iy = -1, iz = -1, icluster = -1;  // property slots within the vertex element
};

VertexLayout vertex_layout(const std::string& path, const Element& vertex) {
  VertexLayout lay;
  for (std::size_t i = 0; i < vertex.properties.size(); ++i) {
    const Property& p = vertex.properties[i];
    if (p.is_list) continue;
    if (p.name == "x") lay.ix = static_cast<int>(i);
    else if (p.name == "y") lay.iy = static_cast<int>(i);
    else if (p.name == "z") lay.iz = static_cast<int>(i);
    else if (p.name == "cluster") lay.icluster = static_cast<int>(i);
  }
  if (lay.ix < 0 || lay.iy < 0 || lay.iz < 0)
    throw ParseError(path + ": vertex element lacks x/y/z properties");
  return lay;
}

LabeledCloud read_ply(const std::string& path, const std::string& data) {
  const PlyHeader h = parse_ply_header(path, data);
  const auto vit = std::find_if(h.elements.begin(), h.elements.end(),
                                [](const Element& e) { return e.name == "vertex"; });
  if (vit == h.elements.end()) throw ParseError(path + ": no vertex element");
  const VertexLayout lay = vertex_layout(path, *vit);

  LabeledCloud out;
  out.cloud.points.reserve(vit->count);
  out.has_labels = lay.icluster >= 0;
  if (out.has_labels) out.labels.reserve(vit->count);

  if (h.binary) {
    std::size_t off = h.body_offset;
    for (const Element& e : h.elements) {
      const bool is_vertex = &e == &*vit;
      for (std::size_t row = 0; row < e.count; ++row) {
        Point3 pt{};
        std::int32_t cluster = 0;
        for (std::size_t pi = 0; pi < e.properties.size(); ++pi) {
          const Property& p = e.properties[pi];
          if (p.is_list) {
            if (off + scalar_size(p.count_type) > data.size())
              fail_byte(path, off, "truncated list count");
            const double cnt = decode_scalar(data.data() + off, p.count_type);
            off += scalar_size(p.count_type);
            if (cnt < 0 || cnt > 1e9) fail_byte(path, off, "implausible list count");
            const std::size_t skip = static_cast<std::size_t>(cnt) * scalar_size(p.type);
            if (off + skip > data.size()) fail_byte(path, off, "truncated list body");
            off += skip;
            continue;
          }
          const std::size_t sz = scalar_size(p.type);
          if (off + sz > data.size())
            fail_byte(path, off, "truncated body (vertex count disagrees with body length)");
          if (is_vertex) {
            const int slot = static_cast<int>(pi);
            if (slot == lay.ix) pt.x = decode_scalar(data.data() + off, p.type);
            else if (slot == lay.iy) pt.y = decode_scalar(data.data() + off, p.type);
            else if (slot == lay.iz) pt.z = decode_scalar(data.data() + off, p.type);
            else if (slot == lay.icluster)
              cluster = static_cast<std::int32_t>(decode_scalar(data.data() + off, p.type));
          }
          off += sz;
        }
        if (is_vertex) {
          if (!is_finite(pt)) fail_byte(path, off, "non-finite coordinate");
          out.cloud.points.push_back(pt);
          if (out.has_labels) out.labels.push_back(cluster);
        }
      }
    }
    if (off != data.size())
      fail_byte(path, off, "trailing bytes after last element (body length mismatch)");
  } else {
    std::size_t pos = h.body_offset, line_no = h.header_lines;
    const auto next_line = [&](std::string& line) {
      while (pos < data.size()) {
        std::size_t eol = data.find('\n', pos);
        if (eol == std::string::npos) eol = data.size();
        line = data.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = eol + 1;
        ++line_no;
        if (line.find_first_not_of(" \t") != std::string::npos) return true;
      }
      return false;
    };
    std::string line;
    for (const Element& e : h.elements) {
      const bool is_vertex = &e == &*vit;
      for (std::size_t row = 0; row < e.count; ++row) {
        if (!next_line(line))
          fail_line(path, line_no, "truncated body (vertex count disagrees with body length)");
        std::istringstream ss(line);
        Point3 pt{};
        std::int32_t cluster = 0;
        for (std::size_t pi = 0; pi < e.properties.size(); ++pi) {
          const Property& p = e.properties[pi];
          if (p.is_list) {
            long long cnt;
            if (!(ss >> cnt) || cnt < 0) fail_line(path, line_no, "malformed list count");
            double dummy;
            for (long long j = 0; j < cnt; ++j)
              if (!(ss >> dummy)) fail_line(path, line_no, "truncated list row");
            continue;
          }
          double v;
          if (!(ss >> v)) fail_line(path, line_no, "missing property value");
          if (is_vertex) {
            const int slot = static_cast<int>(pi);
            if (slot == lay.ix) pt.x = v;
            else if (slot == lay.iy) pt.y = v;
            else if (slot == lay.iz) pt.z = v;
            else if (slot == lay.icluster) cluster = static_cast<std::int32_t>(v);
          }
        }
        std::string extra;
        if (ss >> extra) fail_line(path, line_no, "unexpected extra token '" + extra + "'");
        if (is_vertex) {
          if (!is_finite(pt)) fail_line(path, line_no, "non-finite coordinate");
          out.cloud.points.push_back(pt);
          if (out.has_labels) out.labels.push_back(cluster);
        }
      }
    }
    if (next_line(line)) fail_line(path, line_no, "unexpected data after last element");
  }
  return out;
}

LabeledCloud read_xyz(const std::string& path, const std::string& data) {
  LabeledCloud out;
  std::size_t pos = 0, line_no = 0;
  while (pos < data.size()) {
    std::size_t eol = data.find('\n', pos);
    if (eol == std::string::npos) eol = data.size();
    std::string line = data.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    Point3 pt{};
    if (!(ss >> pt.x >> pt.y >> pt.z))
      fail_line(path, line_no, "expected three coordinates");
    if (!is_finite(pt)) fail_line(path, line_no, "non-finite coordinate");
    out.cloud.points.push_back(pt);
  }
  return out;
}

}  // namespace

CloudFormat detect_format(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[4] = {};
  in.read(magic, 3);
  if (in.gcount() == 3 && std::string_view(magic, 3) == "ply") {
    // decide ascii vs binary from the format line
    in.seekg(0);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.rfind("format ", 0) == 0)
        return line.find("binary_little_endian") != std::string::npos ? CloudFormat::ply_binary_le
                                                                      : CloudFormat::ply_ascii;
      if (line == "end_header") break;
    }
    return CloudFormat::ply_ascii;
  }
  return CloudFormat::xyz_text;
}

LabeledCloud read_cloud_labeled(const std::string& path) {
  const std::string data = read_file(path);
  if (data.size() >= 3 && std::string_view(data.data(), 3) == "ply" &&
      (data.size() == 3 || data[3] == '\n' || data[3] == '\r')) {
    LabeledCloud out = read_ply(path, data);
    out.cloud.frame_note = path;
    return out;
  }
  LabeledCloud out = read_xyz(path, data);
  out.cloud.frame_note = path;
  return out;
}

PointCloud read_cloud(const std::string& path) { return read_cloud_labeled(path).cloud; }

void write_cloud(const PointCloud& cloud, const std::string& path, CloudFormat format,
                 const std::vector<std::int32_t>* labels) {
  if (labels && labels->size() != cloud.size())
    throw ValidationError("write_cloud: label count does not match point count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);

  if (format == CloudFormat::xyz_text) {
    if (labels) throw ValidationError("write_cloud: xyz_text cannot carry cluster labels");
    out.precision(17);
    for (const Point3& p : cloud.points) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
  } else {
    out << "ply\n";
    out << (format == CloudFormat::ply_binary_le ? "format binary_little_endian 1.0\n"
                                                 : "format ascii 1.0\n");
    out << "element vertex " << cloud.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (labels) out << "property int cluster\n";
    out << "end_header\n";
    if (format == CloudFormat::ply_binary_le) {
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        char buf[24 + 4];
        std::memcpy(buf, &cloud[i].x, 8);
        std::memcpy(buf + 8, &cloud[i].y, 8);
        std::memcpy(buf + 16, &cloud[i].z, 8);
        std::size_t len = 24;
        if (labels) {
          std::memcpy(buf + 24, &(*labels)[i], 4);
          len = 28;
        }
        out.write(buf, static_cast<std::streamsize>(len));
      }
    } else {
      out.precision(17);
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        out << cloud[i].x << ' ' << cloud[i].y << ' ' << cloud[i].z;
        if (labels) out << ' ' << (*labels)[i];
        out << '\n';
      }
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace canopy
