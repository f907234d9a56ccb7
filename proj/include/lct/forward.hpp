#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "lct/geometry.hpp"
#include "lct/parallel.hpp"
#include "lct/sinogram.hpp"
#include "lct/volume.hpp"

namespace lct {

// Midpoint quadrature over the (phi, z) parametrization of a lemon.
// z nodes are cell midpoints, strictly interior, so the apex singularity
// |z| = sqrt(p^2 - R^2) is never sampled.
struct QuadSpec {
  int n_phi = 128;
  int n_z = 128;
};

// Visit every quadrature node of a lemon: point, combined weight
// (surface measure density times dphi*dz).
template <class F>
inline void for_each_surface_node(const LemonParams& lp, const QuadSpec& quad,
                                  F&& visit) {
  const double a = lp.half_extent();
  const double dz = 2.0 * a / quad.n_z;
  const double dphi = 2.0 * pi / quad.n_phi;
  const double c = std::cos(lp.theta0), s = std::sin(lp.theta0);
  for (int iz = 0; iz < quad.n_z; ++iz) {
    const double z = -a + (iz + 0.5) * dz;
    const double t = std::sqrt(lp.p * lp.p - z * z) - lp.R;
    const double w = t * lp.p / std::sqrt(lp.p * lp.p - z * z) * dphi * dz;
    for (int ip = 0; ip < quad.n_phi; ++ip) {
      const double phi = -pi + (ip + 0.5) * dphi;
      const double cp = std::cos(phi), sp = std::sin(phi);
      const Vec3 x{c - t * (cp * c - sp * s), s - t * (cp * s + sp * c),
                   lp.z0 + z};
      visit(x, w);
    }
  }
}

// Quadrature approximation of the surface integral of the (trilinearly
// interpolated) volume over the lemon. Nodes outside the grid contribute zero.
inline double integrate_lemon(const Volume& vol, const LemonParams& lp,
                              const QuadSpec& quad = {}) {
  lp.validate();
  double acc = 0.0;
  for_each_surface_node(lp, quad,
                        [&](const Vec3& x, double w) { acc += w * vol.interp(x); });
  return acc;
}

// Grid geometry of the image space, without voxel data.
struct VolumeGeom {
  std::array<int, 3> dims{};
  std::array<double, 3> origin{};
  std::array<double, 3> spacing{};

  static VolumeGeom of(const Volume& v) { return {v.dims, v.origin, v.spacing}; }
  Volume make() const { return Volume(dims, origin, spacing); }
  size_t size() const { return static_cast<size_t>(dims[0]) * dims[1] * dims[2]; }
};

// Discretized lemon transform. One row per lemon; entries are quadrature
// weights scattered through trilinear splatting, so all entries are
// nonnegative and apply/adjoint form an exact transpose pair.
class ForwardOperator {
 public:
  enum class Mode { sparse, matrix_free };

  static constexpr size_t default_nnz_cap = 400'000'000;  // ~3.2 GB

  ForwardOperator(SinogramAxes axes, VolumeGeom geom, QuadSpec quad,
                  Mode mode = Mode::sparse, size_t nnz_cap = default_nnz_cap)
      : axes_(axes), geom_(geom), quad_(quad), mode_(mode) {
    if (mode_ == Mode::sparse) assemble(nnz_cap);
  }

  const SinogramAxes& axes() const { return axes_; }
  const VolumeGeom& geom() const { return geom_; }
  const QuadSpec& quad() const { return quad_; }
  size_t rows() const { return axes_.total(); }
  size_t cols() const { return geom_.size(); }
  size_t nnz() const { return col_.size(); }

  Sinogram apply(const Volume& x) const {
    if (VolumeGeom::of(x).size() != cols() || x.dims != geom_.dims)
      throw std::invalid_argument("ForwardOperator::apply: volume grid mismatch");
    Sinogram out(axes_);
    if (mode_ == Mode::sparse) {
      parallel_blocks(rows(), [&](unsigned, size_t lo, size_t hi) {
        for (size_t r = lo; r < hi; ++r) {
          double acc = 0.0;
          for (size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            acc += static_cast<double>(val_[k]) * x.data[col_[k]];
          out.data[r] = acc;
        }
      });
    } else {
      parallel_blocks(rows(), [&](unsigned, size_t lo, size_t hi) {
        for (size_t r = lo; r < hi; ++r)
          out.data[r] = integrate_lemon(x, axes_.lemon(r), quad_);
      });
    }
    return out;
  }

  Volume adjoint(const Sinogram& y) const {
    if (y.size() != rows())
      throw std::invalid_argument("ForwardOperator::adjoint: sinogram size mismatch");
    // per-worker partial volumes, merged afterwards
    std::vector<Volume> partials;
    const unsigned nw = static_cast<unsigned>(std::min<size_t>(worker_count(), rows()));
    partials.resize(std::max(1u, nw), geom_.make());
    parallel_blocks(rows(), [&](unsigned w, size_t lo, size_t hi) {
      Volume& acc = partials[w];
      for (size_t r = lo; r < hi; ++r) {
        const double yr = y.data[r];
        if (yr == 0.0) continue;
        if (mode_ == Mode::sparse) {
          for (size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
            acc.data[col_[k]] += static_cast<double>(val_[k]) * yr;
        } else {
          for_each_surface_node(axes_.lemon(r), quad_, [&](const Vec3& x, double wq) {
            acc.splat(x, wq * yr,
                      [&](size_t idx, double v) { acc.data[idx] += v; });
          });
        }
      }
    });
    Volume out = std::move(partials[0]);
    for (size_t w = 1; w < partials.size(); ++w)
      for (size_t i = 0; i < out.size(); ++i) out.data[i] += partials[w].data[i];
    return out;
  }

  // Largest singular value estimate via power iteration on A^T A.
  double estimate_sigma_max(int iters = 30, uint64_t seed = 7) const {
    Volume v = geom_.make();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& x : v.data) x = u(rng);
    double lambda = 0.0;
    for (int it = 0; it < iters; ++it) {
      Volume w = adjoint(apply(v));
      double nrm = 0.0;
      for (double x : w.data) nrm += x * x;
      nrm = std::sqrt(nrm);
      if (nrm == 0.0) return 0.0;
      lambda = nrm;
      for (size_t i = 0; i < v.size(); ++i) v.data[i] = w.data[i] / nrm;
    }
    return std::sqrt(lambda);  // lambda approximates ||A^T A|| = sigma_max^2
  }

 private:
  void assemble(size_t nnz_cap) {
    const size_t nodes_per_row =
        static_cast<size_t>(quad_.n_phi) * quad_.n_z;
    const size_t predicted = rows() * std::min(nodes_per_row * 8, cols());
    if (predicted > nnz_cap * 16)
      throw std::runtime_error(
          "ForwardOperator: predicted nonzeros exceed the configured cap; "
          "use matrix-free mode or coarser grids");
    row_ptr_.assign(rows() + 1, 0);
    // two passes would cost a rebuild; instead accumulate per-row into a
    // dense scratch with a touched list, append, and track the cap
    std::vector<std::vector<uint32_t>> cols(worker_count());
    std::vector<std::vector<float>> vals(worker_count());
    std::vector<std::vector<uint64_t>> counts(worker_count());
    std::vector<std::pair<size_t, size_t>> ranges;
    parallel_blocks(rows(), [&](unsigned w, size_t lo, size_t hi) {
      Volume scratch = geom_.make();
      std::vector<uint32_t> touched;
      touched.reserve(8192);
      counts[w].assign(hi - lo, 0);
      for (size_t r = lo; r < hi; ++r) {
        touched.clear();
        for_each_surface_node(axes_.lemon(r), quad_, [&](const Vec3& x, double wq) {
          scratch.splat(x, wq, [&](size_t idx, double v) {
            if (scratch.data[idx] == 0.0 && v != 0.0)
              touched.push_back(static_cast<uint32_t>(idx));
            scratch.data[idx] += v;
          });
        });
        std::sort(touched.begin(), touched.end());
        for (uint32_t idx : touched) {
          const double v = scratch.data[idx];
          scratch.data[idx] = 0.0;
          if (v <= 0.0) continue;
          cols[w].push_back(idx);
          vals[w].push_back(static_cast<float>(v));
          ++counts[w][r - lo];
        }
      }
    });
    size_t total = 0;
    for (const auto& c : cols) total += c.size();
    if (total > nnz_cap)
      throw std::runtime_error(
          "ForwardOperator: assembled nonzeros exceed the configured cap; "
          "use matrix-free mode or coarser grids");
    if (cols.size() == 1) {
      // single worker: adopt the buffers instead of doubling peak memory
      col_ = std::move(cols[0]);
      val_ = std::move(vals[0]);
    } else {
      col_.reserve(total);
      val_.reserve(total);
    }
    size_t row = 0;
    for (unsigned w = 0; w < counts.size(); ++w) {
      if (cols.size() > 1) {
        col_.insert(col_.end(), cols[w].begin(), cols[w].end());
        val_.insert(val_.end(), vals[w].begin(), vals[w].end());
      }
      for (uint64_t c : counts[w]) {
        row_ptr_[row + 1] = row_ptr_[row] + c;
        ++row;
      }
    }
    for (; row < rows(); ++row) row_ptr_[row + 1] = row_ptr_[row];
  }

  SinogramAxes axes_;
  VolumeGeom geom_;
  QuadSpec quad_;
  Mode mode_;
  std::vector<uint64_t> row_ptr_;
  std::vector<uint32_t> col_;
  std::vector<float> val_;
};

struct NoiseSpec {
  double gamma = 0.0;
  uint64_t seed = 0;
};

// b = sino + gamma * (||sino||_2 / sqrt(l)) * eta, eta i.i.d. standard normal.
inline Sinogram add_noise(const Sinogram& sino, const NoiseSpec& spec) {
  if (spec.gamma < 0.0) throw std::domain_error("add_noise: gamma must be >= 0");
  if (spec.gamma == 0.0) return sino;
  double nrm = 0.0;
  for (double v : sino.data) nrm += v * v;
  nrm = std::sqrt(nrm);
  const double scale = spec.gamma * nrm / std::sqrt(double(sino.size()));
  Sinogram out = sino;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& v : out.data) v += scale * gauss(rng);
  return out;
}

}  // namespace lct
