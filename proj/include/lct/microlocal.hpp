#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "lct/forward.hpp"
#include "lct/geometry.hpp"
#include "lct/sinogram.hpp"
#include "lct/volume.hpp"

// Computable consequences of the Bolker analysis: per-voxel detectable-edge
// coverage and artifact loci from reflections through planes tangent to the
// unit cylinder.

namespace lct {

// Unit normal of the lemon at a surface point: the normalized gradient of the
// defining function (g+R)^2 + (z-z0)^2 - p^2.
inline Vec3 lemon_normal(const LemonParams& lp, const Vec3& x,
                         double surface_tol = 1e-6, double apex_tol = 1e-9) {
  if (std::abs(defining_function(lp, x)) > surface_tol * lp.p * lp.p)
    throw std::domain_error("lemon_normal: point is not on the lemon surface");
  const double dx = x[0] - std::cos(lp.theta0);
  const double dy = x[1] - std::sin(lp.theta0);
  const double g = std::sqrt(dx * dx + dy * dy);
  if (g < apex_tol)
    throw std::domain_error("lemon_normal: gradient degenerates at the apex");
  const double c = (g + lp.R) / g;
  Vec3 n{c * dx, c * dy, x[2] - lp.z0};
  const double len = norm(n);
  return {n[0] / len, n[1] / len, n[2] / len};
}

// Reflection of x through the plane tangent to the unit cylinder at
// (cos theta0, sin theta0, 0): x - 2 (Theta0 . x' - 1)(Theta0, 0).
inline Vec3 reflect_tangent_plane(const Vec3& x, double theta0) {
  const double c = std::cos(theta0), s = std::sin(theta0);
  const double d = c * x[0] + s * x[1] - 1.0;
  return {x[0] - 2.0 * d * c, x[1] - 2.0 * d * s, x[2]};
}

struct ArtifactLocus {
  Vec3 source;
  std::vector<double> theta0;
  std::vector<Vec3> points;
};

// Predicted Bolker-artifact curve for an interior point: its reflections
// through all tangent planes of the unit cylinder. For x = (1,0,0) this is
// the cardioid; for the axis point it is the circle of radius 2.
inline ArtifactLocus artifact_locus(const Vec3& x, int n_theta) {
  if (x[0] * x[0] + x[1] * x[1] > 1.0 + 1e-12)
    throw std::domain_error("artifact_locus: point must lie inside the closed unit cylinder");
  ArtifactLocus loc;
  loc.source = x;
  loc.theta0.reserve(n_theta);
  loc.points.reserve(n_theta);
  for (int i = 0; i < n_theta; ++i) {
    const double th = 2.0 * pi * i / n_theta;
    loc.theta0.push_back(th);
    loc.points.push_back(reflect_tangent_plane(x, th));
  }
  return loc;
}

inline void save_locus_csv(const ArtifactLocus& loc, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "theta0,x,y,z\n";
  for (size_t i = 0; i < loc.points.size(); ++i)
    f << loc.theta0[i] << "," << loc.points[i][0] << "," << loc.points[i][1]
      << "," << loc.points[i][2] << "\n";
}

// Approximately equal-area partition of the hemisphere (antipodal directions
// identified) into n_bins cells: a polar cap around +z plus zonal rings of
// azimuthal sectors. Bin 0 is always the cap containing (0,0,1).
class DirectionBins {
 public:
  explicit DirectionBins(int n_bins = 512) {
    if (n_bins < 2) throw std::domain_error("DirectionBins: need at least 2 bins");
    // cap solid angle = hemisphere / n_bins
    cap_cos_ = 1.0 - 1.0 / n_bins;
    const double cap_colat = std::acos(cap_cos_);
    const double ideal = std::sqrt(2.0 * pi / n_bins);  // target angular cell size
    const int remaining = n_bins - 1;
    int n_rings = std::max(1, static_cast<int>(std::round((pi / 2 - cap_colat) / ideal)));
    // distribute ring sector counts proportionally to ring area, fixing the
    // total by rounding with a running remainder
    ring_cos_lo_.resize(n_rings + 1);
    const double cos_span = cap_cos_;  // from cap_cos_ down to 0
    for (int r = 0; r <= n_rings; ++r)
      ring_cos_lo_[r] = cap_cos_ - cos_span * r / n_rings;
    sectors_.resize(n_rings);
    sector_offset_.resize(n_rings);
    double carry = 0.0;
    int used = 0;
    for (int r = 0; r < n_rings; ++r) {
      const double share = double(remaining) / n_rings + carry;
      int s = std::max(1, static_cast<int>(std::round(share)));
      if (r == n_rings - 1) s = remaining - used;
      carry = share - s;
      sector_offset_[r] = 1 + used;
      sectors_[r] = s;
      used += s;
    }
    total_ = 1 + used;
  }

  int size() const { return total_; }

  // Directions are identified with their antipodes; xi need not be normalized.
  int bin(const Vec3& xi) const {
    Vec3 d = xi;
    const double len = norm(d);
    if (len == 0.0) throw std::domain_error("DirectionBins::bin: zero direction");
    for (auto& c : d) c /= len;
    if (d[2] < 0.0 || (d[2] == 0.0 && (d[1] < 0.0 || (d[1] == 0.0 && d[0] < 0.0))))
      for (auto& c : d) c = -c;
    if (d[2] >= cap_cos_) return 0;
    int r = 0;
    const int n_rings = static_cast<int>(sectors_.size());
    while (r + 1 < n_rings && d[2] < ring_cos_lo_[r + 1]) ++r;
    double az = std::atan2(d[1], d[0]);
    if (az < 0.0) az += 2.0 * pi;
    int s = static_cast<int>(az / (2.0 * pi) * sectors_[r]);
    s = std::min(s, sectors_[r] - 1);
    return sector_offset_[r] + s;
  }

 private:
  double cap_cos_ = 1.0;
  std::vector<double> ring_cos_lo_;
  std::vector<int> sectors_;
  std::vector<int> sector_offset_;
  int total_ = 0;
};

struct VisibilityMap {
  VolumeGeom geom;
  int n_bins = 0;
  std::vector<uint64_t> bits;  // per voxel: ceil(n_bins/64) occupancy words

  size_t words_per_voxel() const { return (n_bins + 63) / 64; }

  bool occupied(size_t voxel, int b) const {
    return (bits[voxel * words_per_voxel() + b / 64] >> (b % 64)) & 1u;
  }

  void mark(size_t voxel, int b) {
    bits[voxel * words_per_voxel() + b / 64] |= uint64_t(1) << (b % 64);
  }

  double coverage(size_t voxel) const {
    int c = 0;
    for (size_t w = 0; w < words_per_voxel(); ++w)
      c += std::popcount(bits[voxel * words_per_voxel() + w]);
    return double(c) / n_bins;
  }

  Volume coverage_volume() const {
    Volume v = geom.make();
    for (size_t i = 0; i < v.size(); ++i) v.data[i] = coverage(i);
    return v;
  }
};

// Fraction of edge directions (antipodally identified) detectable at each
// voxel: every lemon in the data set deposits its +/- surface normal into the
// direction bin of the voxel nearest each quadrature point.
inline VisibilityMap visibility_map(const SinogramAxes& axes,
                                    const DirectionBins& bins,
                                    const VolumeGeom& geom,
                                    const QuadSpec& quad = {64, 32}) {
  VisibilityMap map;
  map.geom = geom;
  map.n_bins = bins.size();
  map.bits.assign(geom.size() * map.words_per_voxel(), 0);
  Volume probe = geom.make();  // for indexing only
  const size_t rows = axes.total();
  for (size_t r = 0; r < rows; ++r) {
    const LemonParams lp = axes.lemon(r);
    const double ct = std::cos(lp.theta0), st = std::sin(lp.theta0);
    for_each_surface_node(lp, quad, [&](const Vec3& x, double) {
      int ijk[3];
      bool inside = true;
      for (int d = 0; d < 3; ++d) {
        const double u = (x[d] - geom.origin[d]) / geom.spacing[d];
        ijk[d] = static_cast<int>(std::lround(u));
        if (ijk[d] < 0 || ijk[d] >= geom.dims[d]) inside = false;
      }
      if (!inside) return;
      const double dx = x[0] - ct, dy = x[1] - st;
      const double g = std::sqrt(dx * dx + dy * dy);
      if (g < 1e-12) return;  // apex region, normal undefined
      const double c = (g + lp.R) / g;
      map.mark(probe.index(ijk[0], ijk[1], ijk[2]),
               bins.bin({c * dx, c * dy, x[2] - lp.z0}));
    });
  }
  return map;
}

}  // namespace lct
