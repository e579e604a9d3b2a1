#pragma once

#include "canopy/volume.hpp"

namespace canopy::detail {

/// Kept-tetrahedron volume sum in stored order. Terms are nonnegative
/// and the kept set grows with alpha, so the float sum is monotone in
/// alpha and never exceeds the full-complex sum.
double alpha_volume_from(const DelaunayResult& dt, double alpha);

}  // namespace canopy::detail
