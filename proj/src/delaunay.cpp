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
#include "canopy/rng.hpp"
#include "predicates.hpp"

namespace canopy {

namespace {

using geom::collinear;
using geom::in_circumsphere;
using geom::orient3d;

constexpr std::uint64_t kJitterSeed = 0x6a09e667f3bcc909ULL;
constexpr double kJitterAmplitude = 1e-9;
constexpr int kNone = -1;

// outward- and inward-ordered faces opposite each slot of a positively
// oriented tetrahedron
constexpr int kOutward[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
constexpr int kInward[4][3] = {{1, 3, 2}, {0, 2, 3}, {0, 3, 1}, {0, 1, 2}};

struct Tet {
  std::array<std::uint32_t, 4> v;
  std::array<int, 4> nb;  // nb[i] across the face opposite v[i]
  bool alive = true;
};

// Incremental construction over a triangulation of the whole space:
// every hull facet is glued to an infinite tetrahedron whose fourth
// vertex is the sentinel id `inf_` (stored in slot 3, hull face in
// slots 0..2 with outward orientation).
class Triangulator {
 public:
  explicit Triangulator(const std::vector<Point3>& pts)
      : pts_(pts), inf_(static_cast<std::uint32_t>(pts.size())) {}

  void run() {
    init();
    const std::uint32_t n = inf_;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (i == seed_[0] || i == seed_[1] || i == seed_[2] || i == seed_[3]) continue;
      insert(i);
    }
  }

  const std::vector<Tet>& tets() const { return tets_; }

  bool finite(const Tet& t) const { return t.v[3] != inf_; }

 private:
  const Point3& at(std::uint32_t v) const { return pts_[v]; }

  bool conflicts(int ti, const Point3& p) const {
    const Tet& t = tets_[ti];
    if (finite(t)) {
      return in_circumsphere(at(t.v[0]), at(t.v[1]), at(t.v[2]), at(t.v[3]), p) > 0;
    }
    const int side = orient3d(at(t.v[0]), at(t.v[1]), at(t.v[2]), p);
    if (side != 0) return side > 0;
    // on the hull face plane the infinite circumsphere degenerates to
    // the circumcircle, read off the inner neighbor's circumsphere
    const Tet& fin = tets_[t.nb[3]];
    if (!finite(fin)) throw TopologyError("tetrahedralization: hull face has no inner side");
    return in_circumsphere(at(fin.v[0]), at(fin.v[1]), at(fin.v[2]), at(fin.v[3]), p) > 0;
  }

  // A tetrahedron in conflict with p, or kNone when p duplicates an
  // existing vertex.
  int locate_conflict(const Point3& p) {
    int t = last_;
    const std::size_t cap = 4 * tets_.size() + 64;
    for (std::size_t step = 0; step < cap; ++step) {
      const Tet& tt = tets_[t];
      if (!finite(tt)) {
        const int side = orient3d(at(tt.v[0]), at(tt.v[1]), at(tt.v[2]), p);
        if (side > 0) return t;
        if (side == 0 && conflicts(t, p)) return t;
        t = tt.nb[3];
        continue;
      }
      int next = kNone;
      for (int s = 0; s < 4 && next == kNone; ++s) {
        const int o = orient3d(at(tt.v[kOutward[s][0]]), at(tt.v[kOutward[s][1]]),
                               at(tt.v[kOutward[s][2]]), p);
        if (o > 0) next = tt.nb[s];
      }
      if (next == kNone) {
        if (conflicts(t, p)) return t;
        for (int s = 0; s < 4; ++s)
          if (at(tt.v[s]) == p) return kNone;
        throw TopologyError("tetrahedralization: containing tetrahedron is not in conflict");
      }
      t = next;
    }
    for (int ti = 0; ti < static_cast<int>(tets_.size()); ++ti)
      if (tets_[ti].alive && conflicts(ti, p)) return ti;
    return kNone;
  }

  void insert(std::uint32_t pid) {
    const Point3& p = pts_[pid];
    const int seed = locate_conflict(p);
    if (seed == kNone) return;  // duplicate point, nothing to add

    // flood the conflict cavity
    seen_.resize(tets_.size(), 0);
    conf_.resize(tets_.size(), 0);
    ++epoch_;
    struct Boundary {
      int dead, slot, alive;
    };
    std::vector<int> stack{seed};
    std::vector<int> cavity;
    std::vector<Boundary> boundary;
    seen_[seed] = epoch_;
    conf_[seed] = 1;
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      cavity.push_back(t);
      for (int s = 0; s < 4; ++s) {
        const int g = tets_[t].nb[s];
        if (seen_[g] != epoch_) {
          seen_[g] = epoch_;
          conf_[g] = conflicts(g, p) ? 1 : 0;
          if (conf_[g]) stack.push_back(g);
        }
        if (!conf_[g]) boundary.push_back({t, s, g});
      }
    }

    // refill: one tetrahedron per boundary face, apex p
    open_faces_.clear();
    int last_created = kNone;
    for (const Boundary& bf : boundary) {
      const std::array<std::uint32_t, 4> dv = tets_[bf.dead].v;
      std::array<std::uint32_t, 4> nv = {dv[kInward[bf.slot][0]], dv[kInward[bf.slot][1]],
                                         dv[kInward[bf.slot][2]], pid};
      int p_slot = 3;
      for (int j = 0; j < 3; ++j) {
        if (nv[j] == inf_) {
          // even permutation: keep orientation, sentinel to slot 3
          switch (j) {
            case 0: nv = {nv[3], nv[2], nv[1], nv[0]}; break;
            case 1: nv = {nv[2], nv[3], nv[0], nv[1]}; break;
            default: nv = {nv[1], nv[0], nv[3], nv[2]}; break;
          }
          p_slot = j;
          break;
        }
      }
      if (p_slot == 3) {
        const int o = orient3d(at(nv[0]), at(nv[1]), at(nv[2]), at(nv[3]));
        if (o == 0) throw DegenerateGeometryError("tetrahedralization: degenerate tetrahedron");
        if (o < 0) throw TopologyError("tetrahedralization: inverted tetrahedron");
      }
      const int nt = static_cast<int>(tets_.size());
      tets_.push_back(Tet{nv, {kNone, kNone, kNone, kNone}, true});
      tets_[nt].nb[p_slot] = bf.alive;
      Tet& al = tets_[bf.alive];
      int back = kNone;
      for (int s = 0; s < 4 && back == kNone; ++s)
        if (al.nb[s] == bf.dead) back = s;
      if (back == kNone) throw TopologyError("tetrahedralization: cavity boundary out of sync");
      al.nb[back] = nt;
      pair_side_faces(nt, p_slot);
      last_created = nt;
    }
    if (!open_faces_.empty())
      throw TopologyError("tetrahedralization: cavity boundary is not closed");
    for (const int t : cavity) tets_[t].alive = false;
    last_ = last_created;
  }

  // faces of a new tetrahedron that contain the apex are shared between
  // two new tetrahedra; key them by their two non-apex vertices
  void pair_side_faces(int nt, int p_slot) {
    const std::array<std::uint32_t, 4>& nv = tets_[nt].v;
    for (int s = 0; s < 4; ++s) {
      if (s == p_slot) continue;
      std::array<std::uint32_t, 2> key{};
      int k = 0;
      for (int j = 0; j < 4; ++j)
        if (j != s && j != p_slot) key[k++] = nv[j];
      if (key[0] > key[1]) std::swap(key[0], key[1]);
      const std::uint64_t packed = (static_cast<std::uint64_t>(key[0]) << 32) | key[1];
      const auto [it, inserted] = open_faces_.try_emplace(packed, std::make_pair(nt, s));
      if (!inserted) {
        const auto [ot, os] = it->second;
        tets_[nt].nb[s] = ot;
        tets_[ot].nb[os] = nt;
        open_faces_.erase(it);
      }
    }
  }

  void init() {
    const std::uint32_t n = inf_;
    std::uint32_t q0 = 0, q1 = n, q2 = n, q3 = n;
    for (std::uint32_t i = 1; i < n && q1 == n; ++i)
      if (!(pts_[i] == pts_[q0])) q1 = i;
    if (q1 == n) throw DegenerateGeometryError("tetrahedralization: all points coincide");
    for (std::uint32_t i = q1 + 1; i < n && q2 == n; ++i)
      if (!collinear(pts_[q0], pts_[q1], pts_[i])) q2 = i;
    if (q2 == n) throw DegenerateGeometryError("tetrahedralization: points are collinear");
    int last_orient = 0;
    for (std::uint32_t i = q2 + 1; i < n && q3 == n; ++i) {
      last_orient = orient3d(pts_[q0], pts_[q1], pts_[q2], pts_[i]);
      if (last_orient != 0) q3 = i;
    }
    if (q3 == n) throw DegenerateGeometryError("tetrahedralization: points are coplanar");
    if (last_orient < 0) std::swap(q1, q2);
    seed_ = {q0, q1, q2, q3};

    tets_.clear();
    tets_.push_back(Tet{{q0, q1, q2, q3}, {1, 2, 3, 4}, true});
    open_faces_.clear();
    for (int s = 0; s < 4; ++s) {
      const std::array<std::uint32_t, 4>& base = tets_[0].v;
      const std::array<std::uint32_t, 4> iv = {base[kOutward[s][0]], base[kOutward[s][1]],
                                               base[kOutward[s][2]], inf_};
      const int ti = static_cast<int>(tets_.size());
      tets_.push_back(Tet{iv, {kNone, kNone, kNone, 0}, true});
      pair_side_faces(ti, 3);
    }
    if (!open_faces_.empty()) throw TopologyError("tetrahedralization: seed complex is open");
    last_ = 0;
  }

  const std::vector<Point3>& pts_;
  std::uint32_t inf_;
  std::vector<Tet> tets_;
  std::vector<int> seen_;
  std::vector<int> conf_;
  std::unordered_map<std::uint64_t, std::pair<int, int>> open_faces_;
  std::array<std::uint32_t, 4> seed_{};
  int epoch_ = 0;
  int last_ = 0;
};

std::vector<Point3> jittered_copy(const std::vector<Point3>& pts) {
  std::vector<Point3> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Rng rng = make_rng(kJitterSeed, i);
    out[i].x = pts[i].x + (uniform01(rng) * 2.0 - 1.0) * kJitterAmplitude;
    out[i].y = pts[i].y + (uniform01(rng) * 2.0 - 1.0) * kJitterAmplitude;
    out[i].z = pts[i].z + (uniform01(rng) * 2.0 - 1.0) * kJitterAmplitude;
  }
  return out;
}

double circumradius_of(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  const Point3 u = b - a;
  const Point3 v = c - a;
  const Point3 w = d - a;
  const double denom = 2.0 * dot(u, cross(v, w));
  if (denom == 0.0 || !std::isfinite(denom))
    return std::numeric_limits<double>::infinity();
  const Point3 offset =
      (cross(v, w) * dot(u, u) + cross(w, u) * dot(v, v) + cross(u, v) * dot(w, w)) *
      (1.0 / denom);
  const double r = norm(offset);
  return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
}

}  // namespace

DelaunayResult delaunay_tetrahedralize(const PointCloud& cloud) {
  if (cloud.points.size() < 4)
    throw DegenerateGeometryError("tetrahedralization needs at least 4 points");
  if (cloud.points.size() >= std::numeric_limits<std::uint32_t>::max())
    throw ParamError("tetrahedralization: point count out of supported range");

  DelaunayResult out;
  out.jittered = jittered_copy(cloud.points);
  Triangulator tri(out.jittered);
  tri.run();

  for (const Tet& t : tri.tets()) {
    if (!t.alive || !tri.finite(t)) continue;
    DelaunayTet dt;
    dt.v = t.v;
    dt.circumradius = circumradius_of(out.jittered[t.v[0]], out.jittered[t.v[1]],
                                      out.jittered[t.v[2]], out.jittered[t.v[3]]);
    const Point3& a = cloud.points[t.v[0]];
    const Point3 u = cloud.points[t.v[1]] - a;
    const Point3 v = cloud.points[t.v[2]] - a;
    const Point3 w = cloud.points[t.v[3]] - a;
    // signed volume on the unjittered coordinates, clamped so the full
    // sum telescopes to the hull volume and partial sums stay below it
    dt.volume = std::max(0.0, dot(u, cross(v, w)) / 6.0);
    out.tets.push_back(dt);
  }
  return out;
}

}  // namespace canopy
