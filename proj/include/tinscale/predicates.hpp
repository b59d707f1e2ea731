#pragma once

// Robust orientation and in-circle predicates. A floating-point filter
// answers the common case; uncertain results are recomputed exactly with
// arbitrary-precision integers.

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <initializer_list>

namespace tinscale::predicates {

namespace detail {

using BigInt = boost::multiprecision::cpp_int;

inline constexpr double kEps = 0x1.0p-53;
inline constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
inline constexpr double kInCircleBound = (10.0 + 96.0 * kEps) * kEps;

// Every finite double is m * 2^e with a 53-bit integer m. Scaling all inputs
// by the smallest exponent turns them into exact integers.
struct ExactScale {
  int min_exp = 0;

  explicit ExactScale(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      if (v == 0.0) continue;
      int e;
      std::frexp(v, &e);
      e -= 53;
      if (first || e < min_exp) min_exp = e;
      first = false;
    }
  }

  BigInt operator()(double v) const {
    if (v == 0.0) return 0;
    int e;
    const double frac = std::frexp(v, &e);
    const auto mant = static_cast<long long>(std::ldexp(frac, 53));
    BigInt out = mant;
    out <<= (e - 53 - min_exp);
    return out;
  }
};

inline int sign(const BigInt& v) { return v.sign(); }

}  // namespace detail

inline int orient2d_exact(double ax, double ay, double bx, double by, double cx, double cy) {
  const detail::ExactScale s{ax, ay, bx, by, cx, cy};
  const auto acx = s(ax) - s(cx), acy = s(ay) - s(cy);
  const auto bcx = s(bx) - s(cx), bcy = s(by) - s(cy);
  return detail::sign(acx * bcy - acy * bcx);
}

// > 0 when a, b, c are counter-clockwise, < 0 clockwise, 0 collinear.
inline int orient2d(double ax, double ay, double bx, double by, double cx, double cy) {
  const double left = (ax - cx) * (by - cy);
  const double right = (ay - cy) * (bx - cx);
  const double det = left - right;
  const double bound = detail::kOrientBound * (std::abs(left) + std::abs(right));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return orient2d_exact(ax, ay, bx, by, cx, cy);
}

inline int incircle_exact(double ax, double ay, double bx, double by, double cx, double cy,
                          double dx, double dy) {
  const detail::ExactScale s{ax, ay, bx, by, cx, cy, dx, dy};
  const auto adx = s(ax) - s(dx), ady = s(ay) - s(dy);
  const auto bdx = s(bx) - s(dx), bdy = s(by) - s(dy);
  const auto cdx = s(cx) - s(dx), cdy = s(cy) - s(dy);
  const auto alift = adx * adx + ady * ady;
  const auto blift = bdx * bdx + bdy * bdy;
  const auto clift = cdx * cdx + cdy * cdy;
  const auto det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                   clift * (adx * bdy - bdx * ady);
  return detail::sign(det);
}

// > 0 when d lies strictly inside the circle through counter-clockwise
// a, b, c; 0 when cocircular.
inline int incircle(double ax, double ay, double bx, double by, double cx, double cy, double dx,
                    double dy) {
  const double adx = ax - dx, ady = ay - dy;
  const double bdx = bx - dx, bdy = by - dy;
  const double cdx = cx - dx, cdy = cy - dy;

  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double alift = adx * adx + ady * ady;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double blift = bdx * bdx + bdy * bdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double clift = cdx * cdx + cdy * cdy;

  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
  const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                           (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                           (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  const double bound = detail::kInCircleBound * permanent;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy);
}

}  // namespace tinscale::predicates
