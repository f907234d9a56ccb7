#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

// Scanner geometry for the cylindrical Compton scattering setup.
// All lengths are in scanner-radius units: the cylinder has unit radius.
// A "lemon" is the surface of revolution of a circular arc about its chord;
// its axis is the vertical line through (cos theta0, sin theta0).

namespace lct {

inline constexpr double pi = std::numbers::pi;

// Electron rest energy, keV.
inline constexpr double electron_rest_energy_kev = 511.0;

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

struct CylinderDomain {
  double epsilon = 0.1;      // radial support offset, f lives in radius <= 1 - epsilon
  double half_height = 2.0;  // cylinder cropped to |z| <= half_height
  double alpha = 2.0;        // half source-detector separation (limited transform)

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw std::domain_error("CylinderDomain: epsilon must lie in (0,1)");
    if (!(alpha > 0.0)) throw std::domain_error("CylinderDomain: alpha must be positive");
    if (!(half_height >= alpha))
      throw std::domain_error("CylinderDomain: half_height must be >= alpha");
  }
};

struct LemonParams {
  double p = 1.0;       // outer radius of the generating arc
  double R = 0.0;       // torus offset radius, p > R >= 0
  double theta0 = 0.0;  // axis angle, [0, 2*pi)
  double z0 = 0.0;      // axial center

  // half-extent along the axis; apex points are (cos theta0, sin theta0, z0 +/- a)
  double half_extent() const { return std::sqrt(p * p - R * R); }

  void validate() const {
    if (!(p > R && R >= 0.0))
      throw std::domain_error("LemonParams: requires p > R >= 0");
  }

  Vec3 axis_point() const { return {std::cos(theta0), std::sin(theta0), z0}; }
};

struct LimitedLemonParams {
  double h = 1.0;  // lemon height, (0, alpha]
  double theta0 = 0.0;
  double z0 = 0.0;
};

// Compton relation: scattering angle from the (E, E') energy pair.
//   E' = E / (1 + (E/E0)(1 - cos w))  <=>  cos w = 1 - E0 (1/E' - 1/E)
inline double energy_to_angle(double e_kev, double e_prime_kev) {
  if (!(e_prime_kev > 0.0 && e_prime_kev <= e_kev))
    throw std::domain_error("energy_to_angle: requires 0 < E' <= E");
  const double c = 1.0 - electron_rest_energy_kev * (1.0 / e_prime_kev - 1.0 / e_kev);
  if (c < -1.0 || c > 1.0)
    throw std::domain_error("energy_to_angle: unphysical energy pair");
  return std::acos(c);
}

// Forward Compton relation, used to round-trip energy_to_angle.
inline double scattered_energy(double e_kev, double omega) {
  return e_kev / (1.0 + (e_kev / electron_rest_energy_kev) * (1.0 - std::cos(omega)));
}

// Limited-data parametrization: fixed source-detector separation 2*alpha gives
//   p(h) = (alpha^2 + h^2) / (2h),  R(h) = p(h) - h,  sqrt(p^2 - R^2) = alpha.
inline LemonParams limited_to_full(const LimitedLemonParams& lp, double alpha) {
  if (!(lp.h > 0.0 && lp.h <= alpha))
    throw std::domain_error("limited_to_full: h must lie in (0, alpha]");
  const double p = (alpha * alpha + lp.h * lp.h) / (2.0 * lp.h);
  return LemonParams{p, p - lp.h, lp.theta0, lp.z0};
}

// s = -2R = (h^2 - alpha^2)/h, the defining-function offset of the limited lemon.
inline double limited_offset_s(double h, double alpha) {
  return (h * h - alpha * alpha) / h;
}

// Distance from the lemon axis at axial offset z from the center.
// Positive on the open interval |z| < half_extent.
inline double lemon_axis_distance(const LemonParams& lp, double z) {
  const double a = lp.half_extent();
  if (!(std::abs(z) < a))
    throw std::domain_error("lemon geometry: |z| must be < sqrt(p^2 - R^2)");
  return std::sqrt(lp.p * lp.p - z * z) - lp.R;
}

// Cartesian point on the lemon. phi in [-pi, pi] rotates about the lemon axis,
// phi = 0 points from the axis toward the scanner axis. z is the axial offset
// from the lemon center, |z| < half_extent.
inline Vec3 surface_point(const LemonParams& lp, double phi, double z) {
  const double t = lemon_axis_distance(lp, z);
  const double c = std::cos(lp.theta0), s = std::sin(lp.theta0);
  const double cp = std::cos(phi), sp = std::sin(phi);
  // axis point + t * (unit vector at angle phi from the inward direction)
  return {c - t * (cp * c + sp * -s),
          s - t * (cp * s + sp * c),
          lp.z0 + z};
}

// Surface measure density dA/(dphi dz) = t * p / sqrt(p^2 - z^2).
inline double surface_measure_weight(const LemonParams& lp, double z) {
  const double t = lemon_axis_distance(lp, z);
  return t * lp.p / std::sqrt(lp.p * lp.p - z * z);
}

// Closed-form area of the lemon: 2*pi*p*(2a - 2R*asin(a/p)), a = sqrt(p^2-R^2).
inline double lemon_surface_area(const LemonParams& lp) {
  lp.validate();
  const double a = lp.half_extent();
  return 2.0 * pi * lp.p * (2.0 * a - 2.0 * lp.R * std::asin(a / lp.p));
}

// Defining-function residual (g + R)^2 + (z - z0)^2 - p^2 with
// g the planar distance of (x,y) to the axis point. Zero on the surface.
inline double defining_function(const LemonParams& lp, const Vec3& x) {
  const double dx = x[0] - std::cos(lp.theta0);
  const double dy = x[1] - std::sin(lp.theta0);
  const double g = std::sqrt(dx * dx + dy * dy);
  const double dz = x[2] - lp.z0;
  return (g + lp.R) * (g + lp.R) + dz * dz - lp.p * lp.p;
}

}  // namespace lct
