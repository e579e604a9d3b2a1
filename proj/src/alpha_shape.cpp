#include "canopy/volume.hpp"

#include "canopy/error.hpp"
#include "volume_internal.hpp"

namespace canopy {

namespace detail {

double alpha_volume_from(const DelaunayResult& dt, double alpha) {
  double sum = 0.0;
  for (const DelaunayTet& t : dt.tets)
    if (t.circumradius <= alpha) sum += t.volume;
  return sum;
}

}  // namespace detail

AlphaComplex build_alpha_complex(const PointCloud& cloud, double alpha) {
  if (!(alpha > 0.0)) throw ParamError("alpha must be positive");
  AlphaComplex out;
  out.alpha = alpha;
  const DelaunayResult dt = delaunay_tetrahedralize(cloud);
  for (const DelaunayTet& t : dt.tets)
    if (t.circumradius <= alpha) out.tetrahedra.push_back(t);
  return out;
}

double alpha_shape_volume(const PointCloud& cloud, double alpha) {
  if (!(alpha > 0.0)) throw ParamError("alpha must be positive");
  return detail::alpha_volume_from(delaunay_tetrahedralize(cloud), alpha);
}

}  // namespace canopy
