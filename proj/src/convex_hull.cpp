#include "canopy/volume.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "canopy/error.hpp"
#include "predicates.hpp"

namespace canopy {

namespace {

using geom::collinear;
using geom::orient3d;

struct HullFace {
  std::array<int, 3> v;   // outward orientation
  std::array<int, 3> nb;  // nb[i] across directed edge (v[i], v[(i+1)%3])
  Point3 normal;          // double-precision, unnormalized; apex choice only
  std::vector<int> outside;
  int furthest = -1;
  double furthest_dist = -std::numeric_limits<double>::infinity();
  bool alive = true;
};

class HullBuilder {
 public:
  explicit HullBuilder(const std::vector<Point3>& pts) : pts_(pts) {}

  TriangleMesh build() {
    pick_initial_simplex();
    assign_initial_outside();
    while (!pending_.empty()) {
      const int fi = pending_.back();
      pending_.pop_back();
      if (!faces_[fi].alive || faces_[fi].outside.empty()) continue;
      insert_apex(fi);
    }
    return extract();
  }

 private:
  // strict visibility: q on the open outer side of the face plane
  bool above(const HullFace& f, int q) const {
    return orient3d(pts_[f.v[0]], pts_[f.v[1]], pts_[f.v[2]], pts_[q]) > 0;
  }

  int make_face(int a, int b, int c) {
    HullFace f;
    f.v = {a, b, c};
    f.nb = {-1, -1, -1};
    f.normal = cross(pts_[b] - pts_[a], pts_[c] - pts_[a]);
    faces_.push_back(std::move(f));
    return static_cast<int>(faces_.size()) - 1;
  }

  void push_outside(int fi, int q) {
    HullFace& f = faces_[fi];
    f.outside.push_back(q);
    const double dist = dot(pts_[q] - pts_[f.v[0]], f.normal);
    if (dist > f.furthest_dist) {
      f.furthest_dist = dist;
      f.furthest = q;
    }
  }

  void pick_initial_simplex() {
    const int n = static_cast<int>(pts_.size());
    const auto lex_less = [this](int i, int j) {
      const Point3& p = pts_[i];
      const Point3& q = pts_[j];
      if (p.x != q.x) return p.x < q.x;
      if (p.y != q.y) return p.y < q.y;
      return p.z < q.z;
    };
    int a = 0, b = 0;
    for (int i = 1; i < n; ++i) {
      if (lex_less(i, a)) a = i;
      if (lex_less(b, i)) b = i;
    }
    if (pts_[a] == pts_[b]) throw DegenerateGeometryError("convex hull: all points coincide");

    // farthest from line (a,b); the double heuristic is verified exactly
    int c = -1;
    {
      const Point3 d = pts_[b] - pts_[a];
      double best = 0.0;
      for (int i = 0; i < n; ++i) {
        const Point3 w = cross(d, pts_[i] - pts_[a]);
        const double m = dot(w, w);
        if (m > best) {
          best = m;
          c = i;
        }
      }
      if (c >= 0 && collinear(pts_[a], pts_[b], pts_[c])) c = -1;
      if (c < 0) {
        for (int i = 0; i < n && c < 0; ++i)
          if (!collinear(pts_[a], pts_[b], pts_[i])) c = i;
      }
      if (c < 0) throw DegenerateGeometryError("convex hull: input points are collinear");
    }

    int d = -1;
    {
      const Point3 nrm = cross(pts_[b] - pts_[a], pts_[c] - pts_[a]);
      double best = 0.0;
      for (int i = 0; i < n; ++i) {
        const double m = std::abs(dot(nrm, pts_[i] - pts_[a]));
        if (m > best) {
          best = m;
          d = i;
        }
      }
      if (d >= 0 && orient3d(pts_[a], pts_[b], pts_[c], pts_[d]) == 0) d = -1;
      if (d < 0) {
        for (int i = 0; i < n && d < 0; ++i)
          if (orient3d(pts_[a], pts_[b], pts_[c], pts_[i]) != 0) d = i;
      }
      if (d < 0) throw DegenerateGeometryError("convex hull: input points are coplanar");
    }
    if (orient3d(pts_[a], pts_[b], pts_[c], pts_[d]) < 0) std::swap(b, c);
    sv_ = {a, b, c, d};

    make_face(a, c, b);
    make_face(a, b, d);
    make_face(b, c, d);
    make_face(a, d, c);
    faces_[0].nb = {3, 2, 1};
    faces_[1].nb = {0, 2, 3};
    faces_[2].nb = {0, 3, 1};
    faces_[3].nb = {1, 2, 0};

    interior_ = (pts_[a] + pts_[b] + pts_[c] + pts_[d]) * 0.25;
    interior_ok_ = true;
    for (int f = 0; f < 4; ++f) {
      if (orient3d(pts_[faces_[f].v[0]], pts_[faces_[f].v[1]], pts_[faces_[f].v[2]],
                   interior_) >= 0)
        interior_ok_ = false;  // simplex too flat for the rounded centroid
    }
  }

  void assign_initial_outside() {
    const int n = static_cast<int>(pts_.size());
    for (int i = 0; i < n; ++i) {
      if (i == sv_[0] || i == sv_[1] || i == sv_[2] || i == sv_[3]) continue;
      for (int f = 0; f < 4; ++f) {
        if (above(faces_[f], i)) {
          push_outside(f, i);
          break;
        }
      }
    }
    for (int f = 0; f < 4; ++f)
      if (!faces_[f].outside.empty()) pending_.push_back(f);
  }

  void insert_apex(int fi) {
    const int p = faces_[fi].furthest;
    seen_.resize(faces_.size(), 0);
    vis_.resize(faces_.size(), 0);
    ++epoch_;

    struct HorizonEdge {
      int a, b, outside_face;
    };
    std::vector<int> stack{fi};
    std::vector<int> visible;
    std::vector<HorizonEdge> horizon;
    seen_[fi] = epoch_;
    vis_[fi] = 1;
    while (!stack.empty()) {
      const int f = stack.back();
      stack.pop_back();
      visible.push_back(f);
      for (int s = 0; s < 3; ++s) {
        const int g = faces_[f].nb[s];
        if (seen_[g] != epoch_) {
          seen_[g] = epoch_;
          vis_[g] = above(faces_[g], p) ? 1 : 0;
          if (vis_[g]) stack.push_back(g);
        }
        if (!vis_[g]) horizon.push_back({faces_[f].v[s], faces_[f].v[(s + 1) % 3], g});
      }
    }

    // cone of new faces over the horizon loop
    map_start_.clear();
    map_end_.clear();
    std::vector<int> cone;
    cone.reserve(horizon.size());
    for (const HorizonEdge& h : horizon) {
      const int nf = make_face(h.a, h.b, p);
      faces_[nf].nb[0] = h.outside_face;
      HullFace& g = faces_[h.outside_face];
      int slot = -1;
      for (int s = 0; s < 3 && slot < 0; ++s)
        if (g.v[s] == h.b && g.v[(s + 1) % 3] == h.a) slot = s;
      if (slot < 0) throw TopologyError("convex hull: horizon adjacency out of sync");
      g.nb[slot] = nf;
      if (!map_start_.emplace(h.a, nf).second || !map_end_.emplace(h.b, nf).second)
        throw TopologyError("convex hull: pinched horizon loop");
      if (interior_ok_ && orient3d(pts_[h.a], pts_[h.b], pts_[p], interior_) >= 0)
        throw TopologyError("convex hull: new face does not separate the interior");
      cone.push_back(nf);
    }
    for (const int nf : cone) {
      const auto it1 = map_start_.find(faces_[nf].v[1]);
      const auto it2 = map_end_.find(faces_[nf].v[0]);
      if (it1 == map_start_.end() || it2 == map_end_.end())
        throw TopologyError("convex hull: open horizon loop");
      faces_[nf].nb[1] = it1->second;
      faces_[nf].nb[2] = it2->second;
    }

    orphans_.clear();
    for (const int f : visible) {
      faces_[f].alive = false;
      for (const int q : faces_[f].outside)
        if (q != p) orphans_.push_back(q);
      faces_[f].outside.clear();
    }
    for (const int q : orphans_) {
      for (const int nf : cone) {
        if (above(faces_[nf], q)) {
          push_outside(nf, q);
          break;
        }
      }
    }
    for (const int nf : cone)
      if (!faces_[nf].outside.empty()) pending_.push_back(nf);
  }

  TriangleMesh extract() const {
    TriangleMesh mesh;
    std::vector<std::int64_t> vmap(pts_.size(), -1);
    for (const HullFace& f : faces_) {
      if (!f.alive) continue;
      std::array<std::uint32_t, 3> tri{};
      for (int s = 0; s < 3; ++s) {
        const int v = f.v[s];
        if (vmap[v] < 0) {
          vmap[v] = static_cast<std::int64_t>(mesh.vertices.size());
          mesh.vertices.push_back(pts_[v]);
        }
        tri[s] = static_cast<std::uint32_t>(vmap[v]);
      }
      mesh.faces.push_back(tri);
    }
    return mesh;
  }

  const std::vector<Point3>& pts_;
  std::vector<HullFace> faces_;
  std::vector<int> pending_;
  std::vector<int> seen_;
  std::vector<int> vis_;
  std::vector<int> orphans_;
  std::unordered_map<int, int> map_start_;
  std::unordered_map<int, int> map_end_;
  std::array<int, 4> sv_{};
  Point3 interior_{};
  bool interior_ok_ = false;
  int epoch_ = 0;
};

}  // namespace

TriangleMesh convex_hull(const PointCloud& cloud) {
  if (cloud.points.size() < 4)
    throw DegenerateGeometryError("convex hull needs at least 4 points");
  if (cloud.points.size() > static_cast<std::size_t>(std::numeric_limits<int>::max()))
    throw ParamError("convex hull: point count out of supported range");
  return HullBuilder(cloud.points).build();
}

}  // namespace canopy
