#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lct/geometry.hpp"

namespace lct {

// Regular 3-D scalar grid. origin is the center of voxel (0,0,0).
struct Volume {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::vector<double> data;

  Volume() = default;
  Volume(std::array<int, 3> d, std::array<double, 3> o, std::array<double, 3> s)
      : dims(d), origin(o), spacing(s),
        data(static_cast<size_t>(d[0]) * d[1] * d[2], 0.0) {}

  // Cell-centered grid with nx*ny*nz voxels whose centers span
  // [-ext_xy, ext_xy]^2 x [-ext_z, ext_z] inclusive.
  static Volume centered(int nx, int ny, int nz, double ext_xy, double ext_z) {
    const double sx = nx > 1 ? 2.0 * ext_xy / (nx - 1) : 1.0;
    const double sy = ny > 1 ? 2.0 * ext_xy / (ny - 1) : 1.0;
    const double sz = nz > 1 ? 2.0 * ext_z / (nz - 1) : 1.0;
    return Volume({nx, ny, nz}, {-ext_xy, -ext_xy, -ext_z}, {sx, sy, sz});
  }

  size_t size() const { return data.size(); }

  size_t index(int i, int j, int k) const {
    return (static_cast<size_t>(k) * dims[1] + j) * dims[0] + i;
  }

  double& at(int i, int j, int k) { return data[index(i, j, k)]; }
  double at(int i, int j, int k) const { return data[index(i, j, k)]; }

  Vec3 voxel_center(int i, int j, int k) const {
    return {origin[0] + i * spacing[0], origin[1] + j * spacing[1],
            origin[2] + k * spacing[2]};
  }

  bool same_grid(const Volume& o) const {
    return dims == o.dims && origin == o.origin && spacing == o.spacing;
  }

  // Trilinear interpolation; points outside the grid contribute zero.
  double interp(const Vec3& x) const {
    double u[3];
    for (int d = 0; d < 3; ++d) u[d] = (x[d] - origin[d]) / spacing[d];
    const int i0 = static_cast<int>(std::floor(u[0]));
    const int j0 = static_cast<int>(std::floor(u[1]));
    const int k0 = static_cast<int>(std::floor(u[2]));
    const double fx = u[0] - i0, fy = u[1] - j0, fz = u[2] - k0;
    double acc = 0.0;
    for (int dk = 0; dk < 2; ++dk)
      for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di) {
          const int i = i0 + di, j = j0 + dj, k = k0 + dk;
          if (i < 0 || i >= dims[0] || j < 0 || j >= dims[1] || k < 0 || k >= dims[2])
            continue;
          const double w = (di ? fx : 1.0 - fx) * (dj ? fy : 1.0 - fy) *
                           (dk ? fz : 1.0 - fz);
          acc += w * data[index(i, j, k)];
        }
    return acc;
  }

  // Enumerate the trilinear coefficients of a point: up to 8 (voxel, weight)
  // pairs, skipping out-of-grid voxels. The adjoint of interp.
  template <class F>
  void splat(const Vec3& x, double value, F&& emit) const {
    double u[3];
    for (int d = 0; d < 3; ++d) u[d] = (x[d] - origin[d]) / spacing[d];
    const int i0 = static_cast<int>(std::floor(u[0]));
    const int j0 = static_cast<int>(std::floor(u[1]));
    const int k0 = static_cast<int>(std::floor(u[2]));
    const double fx = u[0] - i0, fy = u[1] - j0, fz = u[2] - k0;
    for (int dk = 0; dk < 2; ++dk)
      for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di) {
          const int i = i0 + di, j = j0 + dj, k = k0 + dk;
          if (i < 0 || i >= dims[0] || j < 0 || j >= dims[1] || k < 0 || k >= dims[2])
            continue;
          const double w = (di ? fx : 1.0 - fx) * (dj ? fy : 1.0 - fy) *
                           (dk ? fz : 1.0 - fz);
          emit(index(i, j, k), value * w);
        }
  }
};

namespace detail {

inline void write_f32(const std::string& path, const std::vector<double>& v) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  std::vector<float> buf(v.begin(), v.end());
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

inline std::vector<double> read_f32(const std::string& path, size_t count) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  std::vector<float> buf(count);
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<size_t>(f.gcount()) != count * sizeof(float))
    throw std::runtime_error("short read: " + path);
  return std::vector<double>(buf.begin(), buf.end());
}

inline std::string sidecar_path(const std::string& path) { return path + ".json"; }

}  // namespace detail

// Flat little-endian float32 payload plus a JSON sidecar with the grid.
inline void save_volume(const Volume& vol, const std::string& path) {
  detail::write_f32(path, vol.data);
  nlohmann::json j;
  j["dims"] = vol.dims;
  j["origin"] = vol.origin;
  j["spacing"] = vol.spacing;
  std::ofstream f(detail::sidecar_path(path));
  f << j.dump(2) << "\n";
}

inline Volume load_volume(const std::string& path) {
  std::ifstream f(detail::sidecar_path(path));
  if (!f) throw std::runtime_error("missing sidecar: " + detail::sidecar_path(path));
  nlohmann::json j;
  f >> j;
  Volume vol;
  j.at("dims").get_to(vol.dims);
  j.at("origin").get_to(vol.origin);
  j.at("spacing").get_to(vol.spacing);
  vol.data = detail::read_f32(
      path, static_cast<size_t>(vol.dims[0]) * vol.dims[1] * vol.dims[2]);
  return vol;
}

// 8-bit PGM export of an axis-aligned slice, for quick viewing.
// axis: 0=x, 1=y, 2=z; index selects the slice.
inline void save_slice_pgm(const Volume& vol, int axis, int index,
                           const std::string& path) {
  if (axis < 0 || axis > 2 || index < 0 || index >= vol.dims[axis])
    throw std::domain_error("save_slice_pgm: bad axis/index");
  const int ax0 = axis == 0 ? 1 : 0;
  const int ax1 = axis == 2 ? 1 : 2;
  const int w = vol.dims[ax0], h = vol.dims[ax1];
  double lo = 1e300, hi = -1e300;
  auto value = [&](int a, int b) {
    int ijk[3];
    ijk[axis] = index;
    ijk[ax0] = a;
    ijk[ax1] = b;
    return vol.at(ijk[0], ijk[1], ijk[2]);
  };
  for (int b = 0; b < h; ++b)
    for (int a = 0; a < w; ++a) {
      const double v = value(a, b);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  std::ofstream f(path, std::ios::binary);
  f << "P5\n" << w << " " << h << "\n255\n";
  for (int b = h - 1; b >= 0; --b)
    for (int a = 0; a < w; ++a) {
      const auto px = static_cast<unsigned char>(
          std::lround((value(a, b) - lo) * scale));
      f.write(reinterpret_cast<const char*>(&px), 1);
    }
}

}  // namespace lct
