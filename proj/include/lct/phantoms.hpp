#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "lct/geometry.hpp"
#include "lct/volume.hpp"

namespace lct {

struct PhantomSpec {
  enum class Kind { spin_top, layered_bricks, delta, ball, custom };
  Kind kind = Kind::ball;
  Vec3 center{0.0, 0.0, 0.0};  // delta position / ball center
  double radius = 0.6;         // ball radius
  std::string file;            // custom: path of an existing volume

  static Kind kind_from_string(const std::string& s) {
    if (s == "spin_top") return Kind::spin_top;
    if (s == "layered_bricks") return Kind::layered_bricks;
    if (s == "delta") return Kind::delta;
    if (s == "ball") return Kind::ball;
    if (s == "custom") return Kind::custom;
    throw std::domain_error("unknown phantom kind: " + s);
  }
};

namespace detail {

// Spin top: rotationally symmetric about z. A cone widening upward topped by
// a rounded body, density 1.
inline double spin_top_density(double r, double z) {
  // cone: tip at z = -0.9, widening to radius 0.45 at z = 0.1
  if (z >= -0.9 && z <= 0.1) {
    const double rad = 0.45 * (z + 0.9) / 1.0;
    if (r <= rad) return 1.0;
  }
  // body: oblate ellipsoid cap, center z = 0.35
  const double dz = (z - 0.35) / 0.45;
  const double dr = r / 0.55;
  if (dr * dr + dz * dz <= 1.0) return 1.0;
  return 0.0;
}

// Layered bricks: a stack of axis-aligned boxes with densities alternating
// between 1 and 2.
inline double layered_bricks_density(double x, double y, double z) {
  constexpr int layers = 3;
  constexpr double layer_h = 0.45, half_xy = 0.55;
  const double z0 = -layers * layer_h / 2.0;
  if (std::abs(x) > half_xy || std::abs(y) > half_xy) return 0.0;
  for (int l = 0; l < layers; ++l) {
    const double lo = z0 + l * layer_h;
    if (z >= lo && z < lo + layer_h) return l % 2 == 0 ? 1.0 : 2.0;
  }
  return 0.0;
}

}  // namespace detail

// Deterministic rasterization of a phantom onto the given grid.
inline Volume make_phantom(const PhantomSpec& spec, const VolumeGeom& geom) {
  if (spec.kind == PhantomSpec::Kind::custom) {
    if (spec.file.empty())
      throw std::domain_error("custom phantom requires a volume file");
    Volume v = load_volume(spec.file);
    if (v.dims != geom.dims)
      throw std::domain_error("custom phantom grid mismatch");
    return v;
  }
  Volume vol = geom.make();
  if (spec.kind == PhantomSpec::Kind::delta) {
    // single nonzero voxel nearest the requested point
    int ijk[3];
    for (int d = 0; d < 3; ++d) {
      ijk[d] = static_cast<int>(
          std::lround((spec.center[d] - geom.origin[d]) / geom.spacing[d]));
      if (ijk[d] < 0 || ijk[d] >= geom.dims[d])
        throw std::domain_error("delta phantom position outside the grid");
    }
    vol.at(ijk[0], ijk[1], ijk[2]) = 1.0;
    return vol;
  }
  for (int k = 0; k < geom.dims[2]; ++k)
    for (int j = 0; j < geom.dims[1]; ++j)
      for (int i = 0; i < geom.dims[0]; ++i) {
        const Vec3 x = vol.voxel_center(i, j, k);
        double v = 0.0;
        switch (spec.kind) {
          case PhantomSpec::Kind::spin_top:
            v = detail::spin_top_density(std::sqrt(x[0] * x[0] + x[1] * x[1]), x[2]);
            break;
          case PhantomSpec::Kind::layered_bricks:
            v = detail::layered_bricks_density(x[0], x[1], x[2]);
            break;
          case PhantomSpec::Kind::ball: {
            // C^1 bump: (1 - (d/rho)^2)^2 inside radius rho
            const double dx = x[0] - spec.center[0], dy = x[1] - spec.center[1],
                         dz = x[2] - spec.center[2];
            const double q = (dx * dx + dy * dy + dz * dz) / (spec.radius * spec.radius);
            if (q < 1.0) v = (1.0 - q) * (1.0 - q);
            break;
          }
          default:
            break;
        }
        vol.at(i, j, k) = v;
      }
  return vol;
}

}  // namespace lct
