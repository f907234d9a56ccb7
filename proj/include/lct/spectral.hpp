#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lct/forward.hpp"
#include "lct/geometry.hpp"
#include "lct/sinogram.hpp"
#include "lct/volume.hpp"

// Constructive inversion of the limited lemon transform: Fourier transform in
// z0, Fourier series in theta0, then a per-mode one-dimensional integral
// equation in the radial variable u = 1 - r. Lemons with h < 1 give a
// triangular (Volterra) system; rows with h >= 1 still intersect the cylinder
// and are kept as extra least-squares equations, which is what makes the
// high-|eta| modes recoverable.

namespace lct {

using cplx = std::complex<double>;

// Fourier modes of a limited sinogram: ghat[n][eta][h].
struct ModeSet {
  AxisSpec h;                      // inherited from the sinogram
  double alpha = 2.0;
  std::vector<int> n_list;         // signed angular modes
  std::vector<double> eta_list;    // axial frequencies, Delta eta = 2*pi/span
  double z0_min = 0.0, z0_step = 0.0;
  int n_z0 = 0;
  std::vector<cplx> data;          // [(in * n_eta + ie) * nh + ih]

  size_t n_modes() const { return n_list.size() * eta_list.size(); }
  cplx& at(size_t in, size_t ie, size_t ih) {
    return data[(in * eta_list.size() + ie) * h.n + ih];
  }
  cplx at(size_t in, size_t ie, size_t ih) const {
    return data[(in * eta_list.size() + ie) * h.n + ih];
  }
};

namespace detail {
inline int signed_freq(int k, int n) { return k <= n / 2 ? k : k - n; }
}

// DFT over theta0 (periodic, normalized 1/N) and z0 (finite support,
// Riemann-sum Fourier integral with Delta eta = 2*pi / span). Mirrors
//   ghat_n(h, eta) = 1/(2 pi) int e^{-i n theta0} int e^{-i eta z0} g dz0 dtheta0.
inline ModeSet decompose(const Sinogram& sino) {
  const SinogramAxes& ax = sino.axes;
  if (ax.mode != SinogramAxes::Mode::limited)
    throw std::invalid_argument("decompose: limited-mode sinogram required");
  const int nt = ax.theta0.n, nz = ax.z0.n, nh = ax.h.n;
  if (!ax.theta0.half_open_max)
    throw std::invalid_argument("decompose: theta0 axis must be half-open periodic");
  ModeSet m;
  m.h = ax.h;
  m.alpha = ax.alpha;
  m.z0_min = ax.z0.min;
  m.z0_step = ax.z0.step();
  m.n_z0 = nz;
  // periodic extension of the inclusive z0 grid: frequencies 2*pi*k/(n*dz)
  // keep the discrete transform pair exactly invertible
  const double span = ax.z0.step() * nz;
  m.n_list.resize(nt);
  for (int k = 0; k < nt; ++k) m.n_list[k] = detail::signed_freq(k, nt);
  m.eta_list.resize(nz);
  for (int k = 0; k < nz; ++k)
    m.eta_list[k] = 2.0 * pi * detail::signed_freq(k, nz) / span;
  m.data.assign(static_cast<size_t>(nt) * nz * nh, cplx{0.0, 0.0});

  const double dz0 = ax.z0.step();
  // stage 1: DFT over z0 for each (h, theta0)
  std::vector<cplx> stage(static_cast<size_t>(nh) * nt * nz);
  for (int ih = 0; ih < nh; ++ih)
    for (int it = 0; it < nt; ++it)
      for (int ie = 0; ie < nz; ++ie) {
        cplx acc{0.0, 0.0};
        const double eta = m.eta_list[ie];
        for (int b = 0; b < nz; ++b) {
          const double z0 = ax.z0.value(b);
          acc += sino.data[ax.flat_index(0, ih, it, b)] *
                 std::polar(1.0, -eta * z0);
        }
        stage[(static_cast<size_t>(ih) * nt + it) * nz + ie] = acc * dz0;
      }
  // stage 2: DFT over theta0
  for (size_t in = 0; in < m.n_list.size(); ++in) {
    const int n = m.n_list[in];
    std::vector<cplx> twiddle(nt);
    for (int it = 0; it < nt; ++it)
      twiddle[it] = std::polar(1.0 / nt, -n * ax.theta0.value(it));
    for (int ih = 0; ih < nh; ++ih)
      for (int ie = 0; ie < nz; ++ie) {
        cplx acc{0.0, 0.0};
        for (int it = 0; it < nt; ++it)
          acc += twiddle[it] * stage[(static_cast<size_t>(ih) * nt + it) * nz + ie];
        m.at(in, ie, ih) = acc;
      }
  }
  return m;
}

// Inverse of decompose on the same grids (transform pair; used for testing
// and for mode-domain round trips).
inline Sinogram recompose(const ModeSet& m, const SinogramAxes& ax) {
  const int nt = ax.theta0.n, nz = ax.z0.n, nh = ax.h.n;
  if (static_cast<size_t>(nt) != m.n_list.size() ||
      static_cast<size_t>(nz) != m.eta_list.size() || !ax.h.uniform_matches(m.h))
    throw std::invalid_argument("recompose: grid mismatch");
  Sinogram sino(ax);
  const double span = ax.z0.step() * nz;
  for (int ih = 0; ih < nh; ++ih)
    for (int it = 0; it < nt; ++it) {
      const double th = ax.theta0.value(it);
      for (int b = 0; b < nz; ++b) {
        const double z0 = ax.z0.value(b);
        cplx acc{0.0, 0.0};
        for (size_t in = 0; in < m.n_list.size(); ++in)
          for (size_t ie = 0; ie < m.eta_list.size(); ++ie)
            acc += m.at(in, ie, ih) *
                   std::polar(1.0, m.n_list[in] * th + m.eta_list[ie] * z0);
        sino.data[ax.flat_index(0, ih, it, b)] = acc.real() / span;
      }
    }
  return sino;
}

// Kernel K_n(eta; h, u) of the per-mode radial equation
//   ghat_n(h, eta) = 4 int K_n(eta; h, u) fhat_n(u, eta) du.
// Derived from the surface measure: with p = (alpha^2 + h^2)/(2h), R = p - h,
// a surface point at apex coordinate t sits at z' = sqrt(p^2 - (t+R)^2) and
// sweeps cylinder radii s in (|1-t|, 1+t); only s = 1 - u < 1 carries support.
// Collecting the azimuthal Jacobian gives
//   K = 2(1-u) int_u^b  t p T_|n|(cos psi) cos(eta z') dt /
//       sqrt((p+t+R)(h-t)(t-u)(t+u)(2+t-u)(2-t-u)),
// with cos psi = ((1-u)^2 + 1 - t^2) / (2(1-u)) and b = min(h, 2-u): for
// h + u > 2 the lemon cap beyond t = 2-u never reaches radius 1-u. Note
// p - (t+R) = h - t, so the z'-Jacobian supplies the 1/sqrt(h-t) factor.
// Gauss-Chebyshev nodes absorb the two active endpoint singularities; the
// third inverse square root stays in the integrand and is regular there.
// At u = h (only possible for h < 1) the closed form
// pi * sqrt(p(h) h (1-h)) / 2 is used.
inline double kernel_eval(int n, double eta, double h, double u, double alpha,
                          int cheb_nodes = 64) {
  if (!(u <= h && u > 0.0 && u < 1.0 && h <= 2.0))
    throw std::domain_error("kernel_eval: requires 0 < u <= h <= 2 and u < 1");
  const double p = (alpha * alpha + h * h) / (2.0 * h);
  if (u == h) return pi * std::sqrt(p * h * (1.0 - h)) / 2.0;
  const double R = p - h;
  const int nn = std::abs(n);
  const double b = std::min(h, 2.0 - u);
  double acc = 0.0;
  for (int j = 0; j < cheb_nodes; ++j) {
    const double v = 0.5 * (1.0 + std::cos((2.0 * j + 1.0) * pi / (2.0 * cheb_nodes)));
    const double t = u + v * (b - u);
    const double tr = t + R;
    // p^2 - (t+R)^2 = (h-t)(p + t + R) = z'^2, nonnegative for t <= h
    const double rad = (p - tr) * (p + tr);
    const double cosarg = std::cos(eta * std::sqrt(std::max(rad, 0.0)));
    double cheb_arg = ((1.0 - u) * (1.0 - u) + 1.0 - t * t) / (2.0 * (1.0 - u));
    cheb_arg = std::clamp(cheb_arg, -1.0, 1.0);
    const double chev = std::cos(nn * std::acos(cheb_arg));
    double val = t * p * cosarg * chev /
                 (std::sqrt(p + tr) * std::sqrt(t + u) * std::sqrt(2.0 + t - u));
    // quadrature absorbs 1/sqrt((t-u)(b-t)); the remaining endpoint factor is
    // regular on (u, b)
    if (b < h)
      val /= std::sqrt(h - t);
    else
      val /= std::sqrt(std::max(2.0 - t - u, std::numeric_limits<double>::min()));
    acc += val;
  }
  return 2.0 * (1.0 - u) * (pi / cheb_nodes) * acc;
}

// Discretization grid of the triangular (h < 1) part of the equation. u nodes
// are cell midpoints, equations are collocated at h_j = eps + (j+1) * step;
// kappa (the blind shell near the cylinder wall) defaults to one cell:
// step = (1-eps)/(m+1).
struct VolterraGrid {
  double eps;
  int m;
  double step;

  VolterraGrid(double epsilon, int m_nodes)
      : eps(epsilon), m(m_nodes), step((1.0 - epsilon) / (m_nodes + 1)) {}

  double u(int i) const { return eps + (i + 0.5) * step; }
  double h(int j) const { return eps + (j + 1.0) * step; }
  double h_max() const { return h(m - 1); }
};

// Lower-triangular kernel table K(h_j, u_i), i <= j, real.
struct KernelTable {
  VolterraGrid grid;
  std::vector<double> k;  // row-major, j * m + i

  KernelTable(int n, double eta, double alpha, const VolterraGrid& g,
              int cheb_nodes = 64)
      : grid(g), k(static_cast<size_t>(g.m) * g.m, 0.0) {
    for (int j = 0; j < g.m; ++j)
      for (int i = 0; i <= j; ++i)
        k[static_cast<size_t>(j) * g.m + i] =
            kernel_eval(n, eta, g.h(j), g.u(i), alpha, cheb_nodes);
  }

  double at(int j, int i) const { return k[static_cast<size_t>(j) * grid.m + i]; }
};

struct VolterraResult {
  std::vector<cplx> f;         // f-tilde_n(u_i, eta)
  bool ill_conditioned = false;
  double condition_estimate = 1.0;
};

// Forward substitution for 4 * step * sum_{i<=j} K(h_j,u_i) f_i = g(h_j).
inline VolterraResult volterra_solve(const std::vector<cplx>& g,
                                     const KernelTable& K,
                                     double diag_tol = 1e-12) {
  const int m = K.grid.m;
  if (static_cast<int>(g.size()) != m)
    throw std::invalid_argument("volterra_solve: rhs size mismatch");
  VolterraResult res;
  res.f.assign(m, cplx{0.0, 0.0});
  double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
  for (int j = 0; j < m; ++j) {
    const double d = std::abs(K.at(j, j));
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  res.condition_estimate = dmin > 0.0 ? dmax / dmin
                                      : std::numeric_limits<double>::infinity();
  if (dmin < diag_tol) res.ill_conditioned = true;
  const double scale = 4.0 * K.grid.step;
  for (int j = 0; j < m; ++j) {
    cplx acc = g[j] / scale;
    for (int i = 0; i < j; ++i) acc -= K.at(j, i) * res.f[i];
    res.f[j] = acc / K.at(j, j);
  }
  return res;
}

// Amplification of the triangular solve, estimated by forward substitution on
// the all-ones right-hand side. Restricted to h < 1 data the substitution
// develops oscillatory boundary layers for large |n| or |eta| and amplifies
// the discretization defect without bound; solve_modes therefore works with
// the full h range in least-squares form instead.
inline double inverse_growth(const KernelTable& K) {
  std::vector<cplx> ones(K.grid.m, cplx{1.0, 0.0});
  const VolterraResult r = volterra_solve(ones, K);
  double g = 0.0;
  for (const cplx& v : r.f) g = std::max(g, std::abs(v));
  return g;
}

// The discrete forward map matching volterra_solve's quadrature, for
// self-consistency tests: g(h_j) = 4 * step * sum_{i<=j} K(h_j,u_i) f(u_i).
inline std::vector<cplx> volterra_forward(const std::vector<cplx>& f,
                                          const KernelTable& K) {
  const int m = K.grid.m;
  std::vector<cplx> g(m, cplx{0.0, 0.0});
  for (int j = 0; j < m; ++j) {
    cplx acc{0.0, 0.0};
    for (int i = 0; i <= j; ++i) acc += K.at(j, i) * f[i];
    g[j] = acc * 4.0 * K.grid.step;
  }
  return g;
}

struct SpectralConfig {
  double epsilon = 0.1;   // support offset; f is assumed zero for r > 1-eps
  int radial_nodes = 48;  // radial cells m
  int cheb_nodes = 64;
  int n_max = -1;         // cap |n|; -1 keeps every mode the data provides
  // curvature (second-difference) Tikhonov weight of the per-mode
  // least-squares solve, relative to the squared operator norm
  double lambda = 1e-5;
  // modes whose data norm is below mode_cutoff * (largest mode norm) are
  // zeroed instead of solved
  double mode_cutoff = 1e-10;
};

// Mode-domain solution: f-tilde_n(u_i, eta) for every retained (n, eta).
struct SpectralModes {
  VolterraGrid grid;
  std::vector<int> n_list;
  std::vector<double> eta_list;
  std::vector<cplx> f;  // [(in * n_eta + ie) * m + i]
  int skipped_modes = 0;  // modes zeroed for negligible data norm

  cplx at(size_t in, size_t ie, int i) const {
    return f[(in * eta_list.size() + ie) * grid.m + i];
  }
};

namespace detail {

inline void gauss_legendre(int n, std::vector<double>& xs,
                           std::vector<double>& ws) {
  xs.resize(n);
  ws.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double p1 = 0.0, dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    xs[i] = 0.5 * (x + 1.0);  // nodes and weights on (0, 1)
    ws[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

// Per-mode system matrix: one row per data node h_j, columns are the radial
// cells of the grid, entries are 4 * int_cell K_n(eta; h_j, u) du. The cell
// touching u = h is integrated with the substitution u = h - s^2, which
// removes the square-root edge of the kernel there.
struct ModeMatrix {
  VolterraGrid grid;
  std::vector<double> h_nodes;
  std::vector<double> a;     // row-major, nr x m
  std::vector<double> chol;  // Cholesky factor of A^T A + penalty, m x m
  double fro2 = 0.0;

  ModeMatrix(int n, double eta, double alpha, const VolterraGrid& g,
             const std::vector<double>& hs, int cheb_nodes, double lambda)
      : grid(g), h_nodes(hs) {
    const int m = g.m;
    const int gl = 12;
    std::vector<double> xs, ws;
    gauss_legendre(gl, xs, ws);
    a.assign(h_nodes.size() * static_cast<size_t>(m), 0.0);
    for (size_t j = 0; j < h_nodes.size(); ++j) {
      const double h = h_nodes[j];
      for (int i = 0; i < m; ++i) {
        const double lo = g.eps + i * g.step;
        const double hi = std::min(g.eps + (i + 1) * g.step, h);
        if (hi <= lo) break;
        double acc = 0.0;
        if (h < 1.0 && hi >= h - 1e-15) {
          const double smax = std::sqrt(h - lo);
          for (int q = 0; q < gl; ++q) {
            const double s = xs[q] * smax;
            acc += ws[q] * smax * 2.0 * s *
                   kernel_eval(n, eta, h, h - s * s, alpha, cheb_nodes);
          }
        } else {
          for (int q = 0; q < gl; ++q)
            acc += ws[q] * (hi - lo) *
                   kernel_eval(n, eta, h, lo + xs[q] * (hi - lo), alpha,
                               cheb_nodes);
        }
        a[j * m + i] = 4.0 * acc;
      }
    }
    for (double v : a) fro2 += v * v;

    // normal equations with the curvature seminorm; scaling keeps lambda
    // dimensionless across grid sizes
    std::vector<double> nmat(static_cast<size_t>(m) * m, 0.0);
    for (int p = 0; p < m; ++p)
      for (int q = p; q < m; ++q) {
        double s = 0.0;
        for (size_t j = 0; j < h_nodes.size(); ++j) s += a[j * m + p] * a[j * m + q];
        nmat[static_cast<size_t>(p) * m + q] = s;
        nmat[static_cast<size_t>(q) * m + p] = s;
      }
    const double lam = lambda * fro2;
    const double s2 = 1.0 / (g.step * g.step);
    for (int i = 1; i + 1 < m; ++i) {
      const int idx[3] = {i - 1, i, i + 1};
      const double c[3] = {1.0, -2.0, 1.0};
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q)
          nmat[static_cast<size_t>(idx[p]) * m + idx[q]] +=
              lam * s2 * s2 * g.step * c[p] * c[q] / m;
    }
    for (int i = 0; i < m; ++i)
      nmat[static_cast<size_t>(i) * m + i] += 1e-13 * fro2;

    chol = std::move(nmat);
    for (int p = 0; p < m; ++p) {
      for (int q = 0; q < p; ++q) {
        double s = chol[static_cast<size_t>(p) * m + q];
        for (int k = 0; k < q; ++k)
          s -= chol[static_cast<size_t>(p) * m + k] *
               chol[static_cast<size_t>(q) * m + k];
        chol[static_cast<size_t>(p) * m + q] = s / chol[static_cast<size_t>(q) * m + q];
      }
      double d = chol[static_cast<size_t>(p) * m + p];
      for (int k = 0; k < p; ++k)
        d -= chol[static_cast<size_t>(p) * m + k] *
             chol[static_cast<size_t>(p) * m + k];
      if (d <= 0.0)
        throw std::runtime_error("spectral solve: normal equations not SPD");
      chol[static_cast<size_t>(p) * m + p] = std::sqrt(d);
    }
  }

  std::vector<cplx> solve(const std::vector<cplx>& g) const {
    const int m = grid.m;
    std::vector<cplx> rhs(m, cplx{0.0, 0.0});
    for (int p = 0; p < m; ++p)
      for (size_t j = 0; j < h_nodes.size(); ++j) rhs[p] += a[j * m + p] * g[j];
    std::vector<cplx> y(m), f(m);
    for (int p = 0; p < m; ++p) {
      cplx s = rhs[p];
      for (int k = 0; k < p; ++k) s -= chol[static_cast<size_t>(p) * m + k] * y[k];
      y[p] = s / chol[static_cast<size_t>(p) * m + p];
    }
    for (int p = m - 1; p >= 0; --p) {
      cplx s = y[p];
      for (int k = p + 1; k < m; ++k)
        s -= chol[static_cast<size_t>(k) * m + p] * f[k];
      f[p] = s / chol[static_cast<size_t>(p) * m + p];
    }
    return f;
  }
};

}  // namespace detail

// Solve the per-mode radial equation for every mode as a regularized least
// squares over all data nodes with h > eps, including the h >= 1 rows the
// triangular formulation cannot use. System matrices and their Cholesky
// factors are cached over (|n|, |eta|) since the kernel is even in both.
inline SpectralModes solve_modes(const ModeSet& modes, const SpectralConfig& cfg) {
  SpectralModes out{VolterraGrid(cfg.epsilon, cfg.radial_nodes), {}, {}, {}, 0};
  for (int n : modes.n_list)
    if (cfg.n_max < 0 || std::abs(n) <= cfg.n_max) out.n_list.push_back(n);
  out.eta_list = modes.eta_list;
  const int m = out.grid.m;
  out.f.assign(out.n_list.size() * out.eta_list.size() * m, cplx{0.0, 0.0});

  std::vector<double> h_nodes;
  std::vector<int> h_idx;
  for (int ih = 0; ih < modes.h.n; ++ih) {
    const double h = modes.h.value(ih);
    if (h > cfg.epsilon + 1e-12 && h <= 2.0) {
      h_nodes.push_back(h);
      h_idx.push_back(ih);
    }
  }
  if (h_nodes.empty())
    throw std::invalid_argument("solve_modes: no data nodes above epsilon");

  // per-mode data at the retained h nodes, plus the largest norm (used to
  // skip modes that carry no signal)
  const size_t n_eta = out.eta_list.size();
  std::vector<std::vector<cplx>> g_all(out.n_list.size() * n_eta);
  std::vector<double> g_norm(out.n_list.size() * n_eta, 0.0);
  double norm_max = 0.0;
  for (size_t in = 0; in < out.n_list.size(); ++in) {
    const int n = out.n_list[in];
    size_t src_in = 0;
    for (size_t a = 0; a < modes.n_list.size(); ++a)
      if (modes.n_list[a] == n) src_in = a;
    for (size_t ie = 0; ie < n_eta; ++ie) {
      const size_t mode = in * n_eta + ie;
      g_all[mode].resize(h_nodes.size());
      double nrm = 0.0;
      for (size_t j = 0; j < h_nodes.size(); ++j) {
        g_all[mode][j] = modes.at(src_in, ie, h_idx[j]);
        nrm += std::norm(g_all[mode][j]);
      }
      g_norm[mode] = std::sqrt(nrm);
      norm_max = std::max(norm_max, g_norm[mode]);
    }
  }

  std::map<std::pair<int, int>, detail::ModeMatrix> cache;  // (|n|, |eta| index)
  for (size_t in = 0; in < out.n_list.size(); ++in) {
    const int n = out.n_list[in];
    for (size_t ie = 0; ie < n_eta; ++ie) {
      const size_t mode = in * n_eta + ie;
      if (g_norm[mode] <= cfg.mode_cutoff * norm_max) {
        ++out.skipped_modes;
        continue;
      }
      const double eta = out.eta_list[ie];
      // key |eta| by rounded frequency index; the kernel is even in n and eta
      const int eta_key = static_cast<int>(std::lround(
          std::abs(eta) /
          (out.eta_list.size() > 1 ? std::abs(out.eta_list[1]) : 1.0)));
      auto key = std::make_pair(std::abs(n), eta_key);
      auto it = cache.find(key);
      if (it == cache.end())
        it = cache
                 .emplace(std::piecewise_construct, std::forward_as_tuple(key),
                          std::forward_as_tuple(std::abs(n), std::abs(eta),
                                                modes.alpha, out.grid, h_nodes,
                                                cfg.cheb_nodes, cfg.lambda))
                 .first;
      const std::vector<cplx> sol = it->second.solve(g_all[mode]);
      for (int i = 0; i < m; ++i) out.f[mode * m + i] = sol[i];
    }
  }
  return out;
}

// Inverse DFTs over (n, eta), mapping u back to radius r = 1 - u and
// interpolating onto the Cartesian grid. Voxels at radii outside the
// reconstruction annulus (the blind core near the axis and the shell
// r > 1 - eps) are zero-filled. Returns the volume and the largest imaginary
// residue encountered.
inline std::pair<Volume, double> resynthesize(const SpectralModes& sm,
                                              const VolumeGeom& geom,
                                              double z0_span) {
  Volume vol = geom.make();
  const int m = sm.grid.m;
  const size_t n_eta = sm.eta_list.size();
  const int nz = geom.dims[2];

  // stage 1: inverse transform in eta for each (n, u_i, z_k)
  // F[(in * m + i) * nz + k]
  std::vector<cplx> F(sm.n_list.size() * m * nz, cplx{0.0, 0.0});
  for (size_t in = 0; in < sm.n_list.size(); ++in)
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < nz; ++k) {
        const double z = geom.origin[2] + k * geom.spacing[2];
        cplx acc{0.0, 0.0};
        for (size_t ie = 0; ie < n_eta; ++ie)
          acc += sm.at(in, ie, i) * std::polar(1.0, sm.eta_list[ie] * z);
        F[(in * m + i) * nz + k] = acc / z0_span;
      }

  // stage 2: per voxel, interpolate in u and sum the angular series
  double worst_imag = 0.0;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < geom.dims[1]; ++j)
      for (int i = 0; i < geom.dims[0]; ++i) {
        const double x = geom.origin[0] + i * geom.spacing[0];
        const double y = geom.origin[1] + j * geom.spacing[1];
        const double r = std::sqrt(x * x + y * y);
        const double u = 1.0 - r;
        const double pos = (u - sm.grid.u(0)) / sm.grid.step;
        if (pos < -0.5 || pos > m - 0.5) continue;  // blind shell / core
        const int i0 = std::clamp(static_cast<int>(std::floor(pos)), 0, m - 2);
        const double w1 = std::clamp(pos - i0, 0.0, 1.0);
        const double theta = std::atan2(y, x);
        cplx acc{0.0, 0.0};
        for (size_t in = 0; in < sm.n_list.size(); ++in) {
          const cplx fu = (1.0 - w1) * F[(in * m + i0) * nz + k] +
                          w1 * F[(in * m + i0 + 1) * nz + k];
          acc += fu * std::polar(1.0, sm.n_list[in] * theta);
        }
        worst_imag = std::max(worst_imag, std::abs(acc.imag()));
        vol.data[vol.index(i, j, k)] = acc.real();
      }
  return {std::move(vol), worst_imag};
}

// Full pipeline: decompose, per-mode regularized solve, resynthesize.
inline Volume spectral_reconstruct(const Sinogram& sino, const VolumeGeom& geom,
                                   const SpectralConfig& cfg) {
  const ModeSet modes = decompose(sino);
  const SpectralModes sm = solve_modes(modes, cfg);
  const double span = sino.axes.z0.step() * sino.axes.z0.n;
  return resynthesize(sm, geom, span).first;
}

}  // namespace lct
