#pragma once

// Sign-exact geometric predicates: evaluated in doubles behind a
// conservative forward-error filter, falling back to rational
// arithmetic when the filter cannot certify the sign.

#include "canopy/core.hpp"

namespace canopy::geom {

/// Sign of det[b-a; c-a; d-a]: +1 when d lies on the side of plane
/// (a,b,c) that (b-a)x(c-a) points into, -1 opposite, 0 coplanar.
int orient3d(const Point3& a, const Point3& b, const Point3& c, const Point3& d);

/// For a positively oriented tetrahedron (orient3d(a,b,c,d) > 0):
/// +1 when e is strictly inside its circumsphere, -1 strictly outside,
/// 0 on the sphere.
int in_circumsphere(const Point3& a, const Point3& b, const Point3& c, const Point3& d,
                    const Point3& e);

/// Exact test: true when a, b and c lie on a single line (points may
/// coincide).
bool collinear(const Point3& a, const Point3& b, const Point3& c);

}  // namespace canopy::geom
