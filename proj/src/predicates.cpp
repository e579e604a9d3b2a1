#include "predicates.hpp"

#include <algorithm>
#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>

namespace canopy::geom {

namespace {

using Rational = boost::multiprecision::cpp_rational;

int sign_of(const Rational& r) {
  if (r > 0) return 1;
  if (r < 0) return -1;
  return 0;
}

int orient3d_exact(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  const Rational bax = Rational(b.x) - Rational(a.x);
  const Rational bay = Rational(b.y) - Rational(a.y);
  const Rational baz = Rational(b.z) - Rational(a.z);
  const Rational cax = Rational(c.x) - Rational(a.x);
  const Rational cay = Rational(c.y) - Rational(a.y);
  const Rational caz = Rational(c.z) - Rational(a.z);
  const Rational dax = Rational(d.x) - Rational(a.x);
  const Rational day = Rational(d.y) - Rational(a.y);
  const Rational daz = Rational(d.z) - Rational(a.z);
  const Rational det = bax * (cay * daz - caz * day) - bay * (cax * daz - caz * dax) +
                       baz * (cax * day - cay * dax);
  return sign_of(det);
}

int in_circumsphere_exact(const Point3& a, const Point3& b, const Point3& c, const Point3& d,
                          const Point3& e) {
  const Rational ex(e.x), ey(e.y), ez(e.z);
  const Rational aex = Rational(a.x) - ex, aey = Rational(a.y) - ey, aez = Rational(a.z) - ez;
  const Rational bex = Rational(b.x) - ex, bey = Rational(b.y) - ey, bez = Rational(b.z) - ez;
  const Rational cex = Rational(c.x) - ex, cey = Rational(c.y) - ey, cez = Rational(c.z) - ez;
  const Rational dex = Rational(d.x) - ex, dey = Rational(d.y) - ey, dez = Rational(d.z) - ez;

  const Rational alift = aex * aex + aey * aey + aez * aez;
  const Rational blift = bex * bex + bey * bey + bez * bez;
  const Rational clift = cex * cex + cey * cey + cez * cez;
  const Rational dlift = dex * dex + dey * dey + dez * dez;

  const Rational ab = aex * bey - bex * aey;
  const Rational bc = bex * cey - cex * bey;
  const Rational cd = cex * dey - dex * cey;
  const Rational da = dex * aey - aex * dey;
  const Rational ac = aex * cey - cex * aey;
  const Rational bd = bex * dey - dex * bey;

  const Rational abc = aez * bc - bez * ac + cez * ab;
  const Rational bcd = bez * cd - cez * bd + dez * bc;
  const Rational cda = cez * da + dez * ac + aez * cd;
  const Rational dab = dez * ab + aez * bd + bez * da;

  const Rational det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd);
  // det < 0 when e is inside the circumsphere of a positively oriented
  // tetrahedron (lifting-map determinant, verified against brute force)
  return -sign_of(det);
}

}  // namespace

int orient3d(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
  const double bax = b.x - a.x, bay = b.y - a.y, baz = b.z - a.z;
  const double cax = c.x - a.x, cay = c.y - a.y, caz = c.z - a.z;
  const double dax = d.x - a.x, day = d.y - a.y, daz = d.z - a.z;

  const double m1 = cay * daz - caz * day;
  const double m2 = cax * daz - caz * dax;
  const double m3 = cax * day - cay * dax;
  const double det = bax * m1 - bay * m2 + baz * m3;

  const double permanent = std::abs(bax) * (std::abs(cay * daz) + std::abs(caz * day)) +
                           std::abs(bay) * (std::abs(cax * daz) + std::abs(caz * dax)) +
                           std::abs(baz) * (std::abs(cax * day) + std::abs(cay * dax));
  const double errbound = 1e-14 * permanent;
  if (det > errbound) return 1;
  if (det < -errbound) return -1;
  return orient3d_exact(a, b, c, d);
}

int in_circumsphere(const Point3& a, const Point3& b, const Point3& c, const Point3& d,
                    const Point3& e) {
  const double aex = a.x - e.x, aey = a.y - e.y, aez = a.z - e.z;
  const double bex = b.x - e.x, bey = b.y - e.y, bez = b.z - e.z;
  const double cex = c.x - e.x, cey = c.y - e.y, cez = c.z - e.z;
  const double dex = d.x - e.x, dey = d.y - e.y, dez = d.z - e.z;

  const double alift = aex * aex + aey * aey + aez * aez;
  const double blift = bex * bex + bey * bey + bez * bez;
  const double clift = cex * cex + cey * cey + cez * cez;
  const double dlift = dex * dex + dey * dey + dez * dez;

  const double ab = aex * bey - bex * aey;
  const double bc = bex * cey - cex * bey;
  const double cd = cex * dey - dex * cey;
  const double da = dex * aey - aex * dey;
  const double ac = aex * cey - cex * aey;
  const double bd = bex * dey - dex * bey;

  const double abc = aez * bc - bez * ac + cez * ab;
  const double bcd = bez * cd - cez * bd + dez * bc;
  const double cda = cez * da + dez * ac + aez * cd;
  const double dab = dez * ab + aez * bd + bez * da;

  const double det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd);

  const double aezp = std::abs(aez), bezp = std::abs(bez), cezp = std::abs(cez),
               dezp = std::abs(dez);
  const double abp = std::abs(aex * bey) + std::abs(bex * aey);
  const double bcp = std::abs(bex * cey) + std::abs(cex * bey);
  const double cdp = std::abs(cex * dey) + std::abs(dex * cey);
  const double dap = std::abs(dex * aey) + std::abs(aex * dey);
  const double acp = std::abs(aex * cey) + std::abs(cex * aey);
  const double bdp = std::abs(bex * dey) + std::abs(dex * bey);

  const double permanent = (cdp * bezp + bdp * cezp + bcp * dezp) * alift +
                           (dap * cezp + acp * dezp + cdp * aezp) * blift +
                           (abp * dezp + bdp * aezp + dap * bezp) * clift +
                           (bcp * aezp + acp * bezp + abp * cezp) * dlift;
  const double errbound = 1e-13 * permanent;
  if (det > errbound) return -1;
  if (det < -errbound) return 1;
  return in_circumsphere_exact(a, b, c, d, e);
}

bool collinear(const Point3& a, const Point3& b, const Point3& c) {
  const double ux = b.x - a.x, uy = b.y - a.y, uz = b.z - a.z;
  const double vx = c.x - a.x, vy = c.y - a.y, vz = c.z - a.z;
  const double cx = uy * vz - uz * vy;
  const double cy = uz * vx - ux * vz;
  const double cz = ux * vy - uy * vx;
  const double m = std::max({std::abs(ux), std::abs(uy), std::abs(uz)}) *
                   std::max({std::abs(vx), std::abs(vy), std::abs(vz)});
  const double errbound = 1e-13 * m;
  if (std::abs(cx) > errbound || std::abs(cy) > errbound || std::abs(cz) > errbound) return false;

  const Rational rux = Rational(b.x) - Rational(a.x);
  const Rational ruy = Rational(b.y) - Rational(a.y);
  const Rational ruz = Rational(b.z) - Rational(a.z);
  const Rational rvx = Rational(c.x) - Rational(a.x);
  const Rational rvy = Rational(c.y) - Rational(a.y);
  const Rational rvz = Rational(c.z) - Rational(a.z);
  return ruy * rvz == ruz * rvy && ruz * rvx == rux * rvz && rux * rvy == ruy * rvx;
}

}  // namespace canopy::geom
