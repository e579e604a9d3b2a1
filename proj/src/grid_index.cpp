#include <algorithm>
#include <cmath>
#include <limits>

#include "canopy/core.hpp"

namespace canopy {

namespace {

constexpr std::int64_t kMaxCellsPerAxis = (std::int64_t{1} << 21) - 2;

inline std::int64_t cell_coord(double v, double origin, double inv_cell) {
  return static_cast<std::int64_t>(std::floor((v - origin) * inv_cell));
}

// squared distance from p to the axis-aligned box [lo, hi]
inline double box_min_d2(Point3 p, Point3 lo, Point3 hi) {
  const double dx = std::max({lo.x - p.x, p.x - hi.x, 0.0});
  const double dy = std::max({lo.y - p.y, p.y - hi.y, 0.0});
  const double dz = std::max({lo.z - p.z, p.z - hi.z, 0.0});
  return dx * dx + dy * dy + dz * dz;
}

// squared distance from p to the farthest corner of [lo, hi]
inline double box_max_d2(Point3 p, Point3 lo, Point3 hi) {
  const double dx = std::max(std::abs(p.x - lo.x), std::abs(p.x - hi.x));
  const double dy = std::max(std::abs(p.y - lo.y), std::abs(p.y - hi.y));
  const double dz = std::max(std::abs(p.z - lo.z), std::abs(p.z - hi.z));
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

UniformGridIndex::UniformGridIndex(const PointCloud& cloud, double cell_size) {
  if (cloud.empty()) throw EmptyInputError("UniformGridIndex: empty cloud");
  n_ = cloud.size();
  const Aabb box = bounds(cloud);
  origin_ = box.min;
  const Point3 extent = box.max - box.min;

  if (cell_size > 0.0) {
    if (!std::isfinite(cell_size)) throw ParamError("UniformGridIndex: cell size must be finite");
    cell_ = cell_size;
  } else {
    // aim for a handful of points per occupied cell
    const double vol = std::max(extent.x, 1e-9) * std::max(extent.y, 1e-9) *
                       std::max(extent.z, 1e-9);
    cell_ = std::cbrt(vol * 4.0 / static_cast<double>(n_));
    const double max_extent = std::max({extent.x, extent.y, extent.z});
    if (!(cell_ > 0.0) || !std::isfinite(cell_)) cell_ = std::max(max_extent, 1.0);
    cell_ = std::max(cell_, max_extent / 1024.0);
    if (!(cell_ > 0.0)) cell_ = 1.0;
  }

  const double inv_cell = 1.0 / cell_;
  if (extent.x * inv_cell > static_cast<double>(kMaxCellsPerAxis) ||
      extent.y * inv_cell > static_cast<double>(kMaxCellsPerAxis) ||
      extent.z * inv_cell > static_cast<double>(kMaxCellsPerAxis))
    throw ParamError("UniformGridIndex: cell size too small for cloud extent");

  span_ = {0, 0, 0};
  std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(n_);
  for (std::uint32_t i = 0; i < n_; ++i) {
    const Point3& p = cloud[i];
    const std::int64_t ci = cell_coord(p.x, origin_.x, inv_cell);
    const std::int64_t cj = cell_coord(p.y, origin_.y, inv_cell);
    const std::int64_t ck = cell_coord(p.z, origin_.z, inv_cell);
    span_[0] = std::max(span_[0], ci);
    span_[1] = std::max(span_[1], cj);
    span_[2] = std::max(span_[2], ck);
    keyed[i] = {pack(ci, cj, ck), i};
  }
  std::sort(keyed.begin(), keyed.end());

  xs_.resize(n_);
  ys_.resize(n_);
  zs_.resize(n_);
  order_.resize(n_);
  cells_.reserve(n_ / 2 + 1);
  const auto cloud_at = [&](std::uint32_t i) -> const Point3& { return cloud[i]; };
  for (std::uint32_t s = 0; s < n_; ++s) {
    const std::uint32_t i = keyed[s].second;
    xs_[s] = cloud_at(i).x;
    ys_[s] = cloud_at(i).y;
    zs_[s] = cloud_at(i).z;
    order_[s] = i;
    if (s == 0 || keyed[s].first != keyed[s - 1].first)
      cells_.emplace(keyed[s].first, Cell{s, s + 1});
    else
      cells_[keyed[s].first].end = s + 1;
  }
}

std::uint64_t UniformGridIndex::pack(std::int64_t ci, std::int64_t cj, std::int64_t ck) const {
  // callers keep coords inside [0, span]; 21 bits per axis
  return (static_cast<std::uint64_t>(ci) << 42) | (static_cast<std::uint64_t>(cj) << 21) |
         static_cast<std::uint64_t>(ck);
}

const UniformGridIndex::Cell* UniformGridIndex::find_cell(std::int64_t ci, std::int64_t cj,
                                                          std::int64_t ck) const {
  if (ci < 0 || cj < 0 || ck < 0 || ci > span_[0] || cj > span_[1] || ck > span_[2])
    return nullptr;
  const auto it = cells_.find(pack(ci, cj, ck));
  return it == cells_.end() ? nullptr : &it->second;
}

template <typename VisitCell>
void UniformGridIndex::walk_ball(Point3 p, double r, const VisitCell& visit) const {
  const double inv_cell = 1.0 / cell_;
  const std::int64_t ilo = std::max<std::int64_t>(cell_coord(p.x - r, origin_.x, inv_cell), 0);
  const std::int64_t ihi = std::min(cell_coord(p.x + r, origin_.x, inv_cell), span_[0]);
  const std::int64_t jlo = std::max<std::int64_t>(cell_coord(p.y - r, origin_.y, inv_cell), 0);
  const std::int64_t jhi = std::min(cell_coord(p.y + r, origin_.y, inv_cell), span_[1]);
  const std::int64_t klo = std::max<std::int64_t>(cell_coord(p.z - r, origin_.z, inv_cell), 0);
  const std::int64_t khi = std::min(cell_coord(p.z + r, origin_.z, inv_cell), span_[2]);
  const double r2 = r * r;
  for (std::int64_t ci = ilo; ci <= ihi; ++ci)
    for (std::int64_t cj = jlo; cj <= jhi; ++cj)
      for (std::int64_t ck = klo; ck <= khi; ++ck) {
        const auto it = cells_.find(pack(ci, cj, ck));
        if (it == cells_.end()) continue;
        const Point3 lo{origin_.x + static_cast<double>(ci) * cell_,
                        origin_.y + static_cast<double>(cj) * cell_,
                        origin_.z + static_cast<double>(ck) * cell_};
        const Point3 hi{lo.x + cell_, lo.y + cell_, lo.z + cell_};
        if (box_min_d2(p, lo, hi) > r2) continue;
        if (!visit(it->second, box_max_d2(p, lo, hi) <= r2)) return;
      }
}

void UniformGridIndex::radius_collect(Point3 p, double r, std::vector<std::uint32_t>& out) const {
  if (!(r > 0.0) || !std::isfinite(r)) throw ParamError("radius query: r must be positive");
  const double r2 = r * r;
  walk_ball(p, r, [&](const Cell& cell, bool fully_inside) {
    if (fully_inside) {
      for (std::uint32_t s = cell.begin; s < cell.end; ++s) out.push_back(order_[s]);
      return true;
    }
    for (std::uint32_t s = cell.begin; s < cell.end; ++s) {
      const double dx = xs_[s] - p.x;
      const double dy = ys_[s] - p.y;
      const double dz = zs_[s] - p.z;
      if (dx * dx + dy * dy + dz * dz <= r2) out.push_back(order_[s]);
    }
    return true;
  });
}

bool UniformGridIndex::radius_count_at_least(Point3 p, double r, std::size_t threshold) const {
  if (!(r > 0.0) || !std::isfinite(r)) throw ParamError("radius query: r must be positive");
  if (threshold == 0) return true;
  const double r2 = r * r;
  std::size_t count = 0;
  walk_ball(p, r, [&](const Cell& cell, bool fully_inside) {
    if (fully_inside) {
      count += cell.end - cell.begin;
    } else {
      for (std::uint32_t s = cell.begin; s < cell.end; ++s) {
        const double dx = xs_[s] - p.x;
        const double dy = ys_[s] - p.y;
        const double dz = zs_[s] - p.z;
        if (dx * dx + dy * dy + dz * dz <= r2) ++count;
      }
    }
    return count < threshold;
  });
  return count >= threshold;
}

std::vector<std::uint32_t> UniformGridIndex::radius_query(Point3 p, double r) const {
  std::vector<std::uint32_t> out;
  radius_collect(p, r, out);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> UniformGridIndex::knn_query(Point3 p, std::size_t k) const {
  if (k < 1 || k > n_) throw ParamError("knn_query: k must be in [1, cloud size]");

  using Entry = std::pair<double, std::uint32_t>;  // (squared distance, original index)
  std::vector<Entry> heap;                         // max-heap, worst candidate at front
  heap.reserve(k + 1);
  const auto cmp = [](const Entry& a, const Entry& b) { return a < b; };

  const double inv_cell = 1.0 / cell_;
  const std::int64_t pi = cell_coord(p.x, origin_.x, inv_cell);
  const std::int64_t pj = cell_coord(p.y, origin_.y, inv_cell);
  const std::int64_t pk = cell_coord(p.z, origin_.z, inv_cell);

  const auto scan_cell = [&](std::int64_t ci, std::int64_t cj, std::int64_t ck) {
    const Cell* cell = find_cell(ci, cj, ck);
    if (!cell) return;
    for (std::uint32_t s = cell->begin; s < cell->end; ++s) {
      const double dx = xs_[s] - p.x;
      const double dy = ys_[s] - p.y;
      const double dz = zs_[s] - p.z;
      const Entry e{dx * dx + dy * dy + dz * dz, order_[s]};
      if (heap.size() < k) {
        heap.push_back(e);
        std::push_heap(heap.begin(), heap.end(), cmp);
      } else if (e < heap.front()) {
        std::pop_heap(heap.begin(), heap.end(), cmp);
        heap.back() = e;
        std::push_heap(heap.begin(), heap.end(), cmp);
      }
    }
  };

  // widest shell that can still intersect the grid from p's cell
  const std::int64_t last_level =
      std::max({pi, span_[0] - pi, pj, span_[1] - pj, pk, span_[2] - pk, std::int64_t{0}}) + 1;
  const std::int64_t shell_budget = 8;

  bool finished = false;
  for (std::int64_t m = 0; m <= std::min(last_level, shell_budget); ++m) {
    if (m == 0) {
      scan_cell(pi, pj, pk);
    } else {
      for (std::int64_t di = -m; di <= m; ++di)
        for (std::int64_t dj = -m; dj <= m; ++dj) {
          if (std::max(std::abs(di), std::abs(dj)) == m) {
            for (std::int64_t dk = -m; dk <= m; ++dk) scan_cell(pi + di, pj + dj, pk + dk);
          } else {
            scan_cell(pi + di, pj + dj, pk - m);
            scan_cell(pi + di, pj + dj, pk + m);
          }
        }
    }
    // every point in shell m + 1 lies at least m * cell away; strict
    // comparison keeps equal-distance, lower-index points reachable
    const double lower = static_cast<double>(m) * cell_;
    if (heap.size() == k && heap.front().first < lower * lower) {
      finished = true;
      break;
    }
    if (m >= last_level) {
      finished = true;
      break;
    }
  }

  if (!finished) {
    // sweep every occupied cell, box-pruned against the current worst;
    // probing shells is only cheap while they are small
    heap.clear();
    for (const auto& [key, cell] : cells_) {
      const std::int64_t ci = static_cast<std::int64_t>(key >> 42);
      const std::int64_t cj = static_cast<std::int64_t>((key >> 21) & 0x1fffff);
      const std::int64_t ck = static_cast<std::int64_t>(key & 0x1fffff);
      if (heap.size() == k) {
        const Point3 lo{origin_.x + static_cast<double>(ci) * cell_,
                        origin_.y + static_cast<double>(cj) * cell_,
                        origin_.z + static_cast<double>(ck) * cell_};
        const Point3 hi{lo.x + cell_, lo.y + cell_, lo.z + cell_};
        if (box_min_d2(p, lo, hi) > heap.front().first) continue;
      }
      for (std::uint32_t s = cell.begin; s < cell.end; ++s) {
        const double dx = xs_[s] - p.x;
        const double dy = ys_[s] - p.y;
        const double dz = zs_[s] - p.z;
        const Entry e{dx * dx + dy * dy + dz * dz, order_[s]};
        if (heap.size() < k) {
          heap.push_back(e);
          std::push_heap(heap.begin(), heap.end(), cmp);
        } else if (e < heap.front()) {
          std::pop_heap(heap.begin(), heap.end(), cmp);
          heap.back() = e;
          std::push_heap(heap.begin(), heap.end(), cmp);
        }
      }
    }
  }

  std::vector<Entry> sorted(heap.begin(), heap.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::uint32_t> out;
  out.reserve(sorted.size());
  for (const Entry& e : sorted) out.push_back(e.second);
  return out;
}

}  // namespace canopy
