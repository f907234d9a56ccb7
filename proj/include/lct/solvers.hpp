#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lct/forward.hpp"
#include "lct/volume.hpp"

namespace lct {

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ||x - x_ref|| / ||x_ref||
inline double relative_error(const Volume& x, const Volume& x_ref) {
  if (x.dims != x_ref.dims)
    throw std::invalid_argument("relative_error: dimension mismatch");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x_ref.data[i] - x.data[i];
    num += d * d;
    den += x_ref.data[i] * x_ref.data[i];
  }
  if (den == 0.0) throw std::domain_error("relative_error: zero reference norm");
  return std::sqrt(num / den);
}

struct SolverConfig {
  int iterations = 100;       // Landweber / NNCGLS iteration count
  int m = 10;                 // hybrid outer rounds
  int m1 = 20;                // NNCGLS iterations per round
  int m2 = 1;                 // TV prox applications per round
  double tv_lambda = 0.0;
  int tv_inner = 50;
  double step = 0.0;          // Landweber relaxation; 0 selects 1.8/sigma_max^2
  double tolerance = 0.0;     // residual stop (0 disables)
  uint64_t seed = 0;
};

struct SolveReport {
  Volume x;
  std::vector<double> residual_history;
  std::optional<double> eps_r;  // vs ground truth, when provided
  int best_iteration = -1;
  bool breakdown = false;
};

// Landweber iteration x <- x + w A^T (b - A x) from x = 0. When a ground
// truth is supplied, the iterate minimizing eps_r is returned (the iteration
// count is selected by the error, as in the experiments this mirrors).
// Op needs apply(Volume)->Sinogram, adjoint(Sinogram)->Volume, geom(),
// estimate_sigma_max(); ForwardOperator and test doubles both qualify.
template <class Op>
inline SolveReport landweber(const Op& op, const Sinogram& b,
                             const SolverConfig& cfg,
                             const Volume* ground_truth = nullptr) {
  SolveReport rep;
  double step = cfg.step;
  if (step <= 0.0) {
    const double smax = op.estimate_sigma_max();
    if (smax == 0.0) {
      rep.x = op.geom().make();
      return rep;
    }
    step = 1.8 / (smax * smax);
  }
  Volume x = op.geom().make();
  Volume best = x;
  double best_err = std::numeric_limits<double>::infinity();
  int grew = 0;
  double prev_res = std::numeric_limits<double>::infinity();
  const double res_floor = 1e-10 * norm2(b.data);
  for (int k = 0; k < cfg.iterations; ++k) {
    Sinogram r = op.apply(x);
    for (size_t i = 0; i < r.size(); ++i) r.data[i] = b.data[i] - r.data[i];
    const double res = norm2(r.data);
    rep.residual_history.push_back(res);
    // tolerate rounding-level fluctuation at the convergence plateau
    if (res > prev_res * (1.0 + 1e-10) && res > res_floor) {
      if (++grew >= 3)
        throw std::runtime_error("landweber: residual grew 3 consecutive iterations "
                                 "(step too large?)");
    } else {
      grew = 0;
    }
    prev_res = res;
    if (cfg.tolerance > 0.0 && res < cfg.tolerance) break;
    const Volume g = op.adjoint(r);
    for (size_t i = 0; i < x.size(); ++i) x.data[i] += step * g.data[i];
    if (ground_truth) {
      const double err = relative_error(x, *ground_truth);
      if (err < best_err) {
        best_err = err;
        best = x;
        rep.best_iteration = k + 1;
      }
    }
  }
  if (ground_truth) {
    rep.x = std::move(best);
    rep.eps_r = best_err;
  } else {
    rep.x = std::move(x);
  }
  return rep;
}

namespace detail {

// CGLS on the normal equations, warm-started from x. Runs `iters` iterations
// or until breakdown; returns false on breakdown (zero curvature).
template <class Op>
inline bool cgls_block(const Op& op, const Sinogram& b, Volume& x,
                       int iters, std::vector<double>* residual_log) {
  Sinogram r = op.apply(x);
  for (size_t i = 0; i < r.size(); ++i) r.data[i] = b.data[i] - r.data[i];
  Volume s = op.adjoint(r);
  Volume p = s;
  double gamma = dot(s.data, s.data);
  for (int k = 0; k < iters; ++k) {
    if (gamma == 0.0) return true;
    Sinogram q = op.apply(p);
    const double qq = dot(q.data, q.data);
    if (qq <= 0.0) return false;
    const double alpha = gamma / qq;
    for (size_t i = 0; i < x.size(); ++i) x.data[i] += alpha * p.data[i];
    for (size_t i = 0; i < r.size(); ++i) r.data[i] -= alpha * q.data[i];
    if (residual_log) residual_log->push_back(norm2(r.data));
    s = op.adjoint(r);
    const double gamma_new = dot(s.data, s.data);
    const double beta = gamma_new / gamma;
    gamma = gamma_new;
    for (size_t i = 0; i < p.size(); ++i) p.data[i] = s.data[i] + beta * p.data[i];
  }
  return true;
}

}  // namespace detail

// CGLS with nonnegativity enforced by projection at restart boundaries
// (every 10 iterations the iterate is clipped at zero and CG restarts).
template <class Op>
inline SolveReport nncgls(const Op& op, const Sinogram& b,
                          int iterations, int restart_block = 10) {
  if (iterations < 1) throw std::domain_error("nncgls: iterations must be >= 1");
  SolveReport rep;
  Volume x = op.geom().make();
  int done = 0;
  while (done < iterations) {
    const int block = std::min(restart_block, iterations - done);
    if (!detail::cgls_block(op, b, x, block, &rep.residual_history)) {
      rep.breakdown = true;
      break;
    }
    done += block;
    for (auto& v : x.data) v = std::max(v, 0.0);
  }
  for (auto& v : x.data) v = std::max(v, 0.0);
  rep.x = std::move(x);
  return rep;
}

// Isotropic 3-D TV proximal operator,
//   argmin_u 1/2 ||u - vol||^2 + lambda TV(u),
// via dual gradient projection (Chambolle). Forward differences, reflexive
// boundaries, fixed step 1/12.
inline Volume tv_prox(const Volume& vol, double lambda, int inner_iters = 50) {
  if (lambda < 0.0) throw std::domain_error("tv_prox: lambda must be >= 0");
  if (lambda == 0.0 || inner_iters <= 0) return vol;
  const int nx = vol.dims[0], ny = vol.dims[1], nz = vol.dims[2];
  const size_t n = vol.size();
  std::vector<double> px(n, 0.0), py(n, 0.0), pz(n, 0.0), div(n, 0.0);
  const double tau = 1.0 / 12.0;
  auto idx = [&](int i, int j, int k) { return vol.index(i, j, k); };
  for (int it = 0; it < inner_iters; ++it) {
    // div p (adjoint of the forward-difference gradient)
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          double d = 0.0;
          if (i < nx - 1) d += px[idx(i, j, k)];
          if (i > 0) d -= px[idx(i - 1, j, k)];
          if (j < ny - 1) d += py[idx(i, j, k)];
          if (j > 0) d -= py[idx(i, j - 1, k)];
          if (k < nz - 1) d += pz[idx(i, j, k)];
          if (k > 0) d -= pz[idx(i, j, k - 1)];
          div[idx(i, j, k)] = d - vol.data[idx(i, j, k)] / lambda;
        }
    // p <- (p + tau grad(div)) / (1 + tau |grad(div)|)
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const size_t c = idx(i, j, k);
          const double gx = i < nx - 1 ? div[idx(i + 1, j, k)] - div[c] : 0.0;
          const double gy = j < ny - 1 ? div[idx(i, j + 1, k)] - div[c] : 0.0;
          const double gz = k < nz - 1 ? div[idx(i, j, k + 1)] - div[c] : 0.0;
          const double mag = std::sqrt(gx * gx + gy * gy + gz * gz);
          const double denom = 1.0 + tau * mag;
          px[c] = (px[c] + tau * gx) / denom;
          py[c] = (py[c] + tau * gy) / denom;
          pz[c] = (pz[c] + tau * gz) / denom;
        }
  }
  Volume out = vol;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        double d = 0.0;
        if (i < nx - 1) d += px[idx(i, j, k)];
        if (i > 0) d -= px[idx(i - 1, j, k)];
        if (j < ny - 1) d += py[idx(i, j, k)];
        if (j > 0) d -= py[idx(i, j - 1, k)];
        if (k < nz - 1) d += pz[idx(i, j, k)];
        if (k > 0) d -= pz[idx(i, j, k - 1)];
        out.data[idx(i, j, k)] -= lambda * d;
      }
  return out;
}

// m rounds of (m1 NNCGLS iterations, m2 TV prox applications), warm-started.
template <class Op>
inline SolveReport cgls_tv(const Op& op, const Sinogram& b,
                           const SolverConfig& cfg) {
  if (cfg.m < 1 || cfg.m1 < 1 || cfg.m2 < 1)
    throw std::domain_error("cgls_tv: m, m1, m2 must be >= 1");
  SolveReport rep;
  Volume x = op.geom().make();
  for (int round = 0; round < cfg.m; ++round) {
    int done = 0;
    while (done < cfg.m1) {
      const int block = std::min(10, cfg.m1 - done);
      if (!detail::cgls_block(op, b, x, block, &rep.residual_history)) {
        rep.breakdown = true;
        break;
      }
      done += block;
      for (auto& v : x.data) v = std::max(v, 0.0);
    }
    for (auto& v : x.data) v = std::max(v, 0.0);
    for (int k = 0; k < cfg.m2; ++k) x = tv_prox(x, cfg.tv_lambda, cfg.tv_inner);
    for (auto& v : x.data) v = std::max(v, 0.0);
    if (rep.breakdown) break;
  }
  rep.x = std::move(x);
  return rep;
}

}  // namespace lct
