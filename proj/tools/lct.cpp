// Command-line surface for the lemon-transform toolkit: phantom generation,
// projection, noise, reconstruction, visibility/artifact analysis, the
// Table-1 noise sweep, and a quick self-test.

#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lct/experiment.hpp"
#include "lct/forward.hpp"
#include "lct/microlocal.hpp"
#include "lct/phantoms.hpp"
#include "lct/solvers.hpp"
#include "lct/spectral.hpp"

using namespace lct;
using nlohmann::json;

namespace {

struct GridFlags {
  int dims = 0;  // cube shorthand; overrides nx/ny/nz when set
  GridSpec g;

  void attach(CLI::App* cmd) {
    cmd->add_option("--dims", dims, "cubic grid size shorthand");
    cmd->add_option("--nx", g.nx, "voxels in x");
    cmd->add_option("--ny", g.ny, "voxels in y");
    cmd->add_option("--nz", g.nz, "voxels in z");
    cmd->add_option("--ext-xy", g.ext_xy, "half-extent of the grid in x and y");
    cmd->add_option("--ext-z", g.ext_z, "half-extent of the grid in z");
  }

  VolumeGeom geom() const {
    GridSpec s = g;
    if (dims > 0) s.nx = s.ny = s.nz = dims;
    return s.geom();
  }
};

struct AxesFlags {
  std::string mode = "limited";
  int nh = 21, ntheta = 41, nz0 = 31, na = 8;
  double alpha = 2.0, z0_span = 3.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--mode", mode, "limited|full")
        ->check(CLI::IsMember({"limited", "full"}));
    cmd->add_option("--nh", nh, "lemon heights per separation");
    cmd->add_option("--ntheta", ntheta, "axis angles");
    cmd->add_option("--nz0", nz0, "axial centers");
    cmd->add_option("--na", na, "separations (full mode)");
    cmd->add_option("--alpha", alpha, "half source-detector separation");
    cmd->add_option("--z0-span", z0_span, "axial center range half-width");
  }

  SinogramAxes axes() const {
    if (mode == "full")
      return SinogramAxes::paper_full(na, nh, ntheta, nz0, alpha, z0_span);
    return SinogramAxes::paper_limited(nh, ntheta, nz0, alpha, z0_span);
  }
};

QuadSpec parse_quad(const std::string& s) {
  QuadSpec q;
  const auto x = s.find('x');
  if (x == std::string::npos)
    throw CLI::ValidationError("--quad", "expected NxM, e.g. 128x128");
  q.n_phi = std::stoi(s.substr(0, x));
  q.n_z = std::stoi(s.substr(x + 1));
  if (q.n_phi < 1 || q.n_z < 1)
    throw CLI::ValidationError("--quad", "node counts must be positive");
  return q;
}

Vec3 parse_point(const std::string& s) {
  Vec3 p{};
  std::istringstream ss(s);
  char comma;
  if (!(ss >> p[0] >> comma >> p[1] >> comma >> p[2]))
    throw CLI::ValidationError("--point", "expected x,y,z");
  return p;
}

void warn_support(const Volume& v, double epsilon, double half_height) {
  for (int k = 0; k < v.dims[2]; ++k)
    for (int j = 0; j < v.dims[1]; ++j)
      for (int i = 0; i < v.dims[0]; ++i) {
        if (v.at(i, j, k) == 0.0) continue;
        const Vec3 x = v.voxel_center(i, j, k);
        if (std::sqrt(x[0] * x[0] + x[1] * x[1]) > 1.0 - epsilon ||
            std::abs(x[2]) > half_height) {
          std::cerr << "warning: phantom support extends beyond the "
                       "reconstruction cylinder (radius "
                    << 1.0 - epsilon << ", half-height " << half_height
                    << "); expect edge-of-domain effects\n";
          return;
        }
      }
}

int run_selftest() {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::printf("%-44s %s\n", name, ok ? "pass" : "FAIL");
    if (!ok) ++failures;
  };

  // adjoint identity on a small operator
  {
    const VolumeGeom geom = VolumeGeom::of(Volume::centered(11, 11, 11, 1.0, 2.0));
    const ForwardOperator op(SinogramAxes::paper_limited(5, 7, 5), geom, {24, 24});
    std::mt19937_64 rng(1);
    std::normal_distribution<double> gauss;
    bool ok = true;
    for (int t = 0; t < 5; ++t) {
      Volume x = geom.make();
      Sinogram y(op.axes());
      for (auto& v : x.data) v = gauss(rng);
      for (auto& v : y.data) v = gauss(rng);
      const Sinogram ax = op.apply(x);
      const double lhs = dot(ax.data, y.data);
      const double rhs = dot(x.data, op.adjoint(y).data);
      ok &= std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, norm2(ax.data) * norm2(y.data));
    }
    check("adjoint identity", ok);
  }

  // quadrature vs closed-form lemon area
  {
    Volume ones = Volume::centered(33, 33, 33, 4.0, 3.0);
    for (auto& v : ones.data) v = 1.0;
    bool ok = true;
    for (auto [p, R] : {std::pair{2.0, 0.0}, std::pair{2.5, 1.5}}) {
      const LemonParams lp{p, R, 0.0, 0.0};
      ok &= std::abs(integrate_lemon(ones, lp, {128, 128}) - lemon_surface_area(lp)) /
                lemon_surface_area(lp) <
            0.01;
    }
    check("surface quadrature vs closed form", ok);
  }

  // kernel diagonal closed form
  {
    bool ok = true;
    for (double h : {0.2, 0.5, 0.8}) {
      const double p = (4.0 + h * h) / (2.0 * h);
      ok &= std::abs(kernel_eval(0, 1.0, h, h, 2.0) -
                     pi * std::sqrt(p * h * (1.0 - h)) / 2.0) < 1e-12;
    }
    check("kernel diagonal", ok);
  }

  // Volterra forward/solve round trip
  {
    const VolterraGrid grid(0.1, 32);
    const KernelTable K(2, 1.0, 2.0, grid, 64);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> gauss;
    std::vector<cplx> f(grid.m);
    for (auto& v : f) v = cplx{gauss(rng), gauss(rng)};
    const VolterraResult r = volterra_solve(volterra_forward(f, K), K);
    bool ok = !r.ill_conditioned;
    for (int i = 0; i < grid.m; ++i) ok &= std::abs(r.f[i] - f[i]) < 1e-8;
    check("volterra round trip", ok);
  }

  // mode decomposition round trip
  {
    SinogramAxes ax = SinogramAxes::paper_limited(5, 8, 7);
    Sinogram s(ax);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss;
    for (auto& v : s.data) v = gauss(rng);
    const Sinogram back = recompose(decompose(s), ax);
    bool ok = true;
    for (size_t i = 0; i < s.size(); ++i) ok &= std::abs(back.data[i] - s.data[i]) < 1e-10;
    check("mode decomposition round trip", ok);
  }

  // phantom histograms
  {
    const VolumeGeom geom = VolumeGeom::of(Volume::centered(41, 41, 41, 1.0, 1.0));
    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::spin_top;
    bool ok = true;
    for (double v : make_phantom(spec, geom).data) ok &= v == 0.0 || v == 1.0;
    spec.kind = PhantomSpec::Kind::layered_bricks;
    for (double v : make_phantom(spec, geom).data)
      ok &= v == 0.0 || v == 1.0 || v == 2.0;
    check("phantom histograms", ok);
  }

  // artifact locus of the axis point
  {
    bool ok = true;
    for (const Vec3& p : artifact_locus({0.0, 0.0, 0.0}, 64).points)
      ok &= std::abs(std::sqrt(p[0] * p[0] + p[1] * p[1]) - 2.0) < 1e-12;
    check("axis artifact locus radius 2", ok);
  }

  std::printf("%s\n", failures == 0 ? "selftest: all checks passed"
                                    : "selftest: FAILURES");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation and reconstruction for cylindrical-scanner "
               "Compton scattering tomography"};
  app.require_subcommand(1);

  // --- phantom ---
  auto* cmd_phantom = app.add_subcommand("phantom", "rasterize a phantom volume");
  std::string ph_kind = "ball", ph_out, ph_file, ph_center = "0,0,0", ph_pgm;
  double ph_radius = 0.6;
  GridFlags ph_grid;
  cmd_phantom->add_option("--kind", ph_kind,
                          "spin_top|layered_bricks|delta|ball|custom");
  cmd_phantom->add_option("--out", ph_out, "output volume path")->required();
  cmd_phantom->add_option("--center", ph_center, "delta/ball center x,y,z");
  cmd_phantom->add_option("--radius", ph_radius, "ball radius");
  cmd_phantom->add_option("--file", ph_file, "custom phantom volume path");
  cmd_phantom->add_option("--pgm", ph_pgm, "also export the central z slice as PGM");
  ph_grid.attach(cmd_phantom);

  // --- project ---
  auto* cmd_project = app.add_subcommand("project", "volume -> sinogram");
  std::string pr_in, pr_out, pr_quad = "128x128";
  bool pr_matrix_free = false;
  AxesFlags pr_axes;
  cmd_project->add_option("--in", pr_in, "input volume")->required();
  cmd_project->add_option("--out", pr_out, "output sinogram")->required();
  cmd_project->add_option("--quad", pr_quad, "surface quadrature NxM (phi x z)");
  cmd_project->add_flag("--matrix-free", pr_matrix_free,
                        "skip sparse assembly (slower apply, less memory)");
  pr_axes.attach(cmd_project);

  // --- noise ---
  auto* cmd_noise = app.add_subcommand("noise", "add scaled Gaussian noise");
  std::string no_in, no_out;
  double no_gamma = 0.0;
  uint64_t no_seed = 0;
  cmd_noise->add_option("--in", no_in)->required();
  cmd_noise->add_option("--out", no_out)->required();
  cmd_noise->add_option("--gamma", no_gamma, "relative noise level")->required();
  cmd_noise->add_option("--seed", no_seed, "RNG seed");

  // --- reconstruct ---
  auto* cmd_rec = app.add_subcommand("reconstruct", "sinogram -> volume");
  std::string rc_in, rc_out, rc_method = "landweber", rc_report, rc_gt, rc_pgm;
  std::string rc_quad = "64x64";
  bool rc_matrix_free = false;
  GridFlags rc_grid;
  SolverConfig rc_solver;
  SpectralConfig rc_spectral;
  cmd_rec->add_option("--in", rc_in, "input sinogram")->required();
  cmd_rec->add_option("--out", rc_out, "output volume")->required();
  cmd_rec->add_option("--method", rc_method, "landweber|nncgls|cgls-tv|spectral")
      ->check(CLI::IsMember({"landweber", "nncgls", "cgls-tv", "spectral"}));
  cmd_rec->add_option("--report", rc_report, "write a JSON reconstruction report");
  cmd_rec->add_option("--ground-truth", rc_gt,
                      "reference volume for eps_r (enables best-iterate "
                      "selection for landweber)");
  cmd_rec->add_option("--quad", rc_quad, "operator quadrature NxM");
  cmd_rec->add_flag("--matrix-free", rc_matrix_free, "skip sparse assembly");
  cmd_rec->add_option("--iterations", rc_solver.iterations, "iteration count");
  cmd_rec->add_option("--m", rc_solver.m, "hybrid outer rounds");
  cmd_rec->add_option("--m1", rc_solver.m1, "CGLS iterations per round");
  cmd_rec->add_option("--m2", rc_solver.m2, "TV prox applications per round");
  cmd_rec->add_option("--tv-lambda", rc_solver.tv_lambda, "TV weight");
  cmd_rec->add_option("--tv-inner", rc_solver.tv_inner, "TV dual iterations");
  cmd_rec->add_option("--step", rc_solver.step, "landweber relaxation (0 = auto)");
  cmd_rec->add_option("--tolerance", rc_solver.tolerance, "residual stop");
  cmd_rec->add_option("--epsilon", rc_spectral.epsilon, "support offset (spectral)");
  cmd_rec->add_option("--radial-nodes", rc_spectral.radial_nodes,
                      "Volterra grid size (spectral)");
  cmd_rec->add_option("--cheb-nodes", rc_spectral.cheb_nodes,
                      "kernel quadrature nodes (spectral)");
  cmd_rec->add_option("--n-max", rc_spectral.n_max,
                      "angular mode cap, -1 = all (spectral)");
  cmd_rec->add_option("--pgm", rc_pgm, "also export the central z slice as PGM");
  rc_grid.attach(cmd_rec);

  // --- visibility ---
  auto* cmd_vis = app.add_subcommand("visibility",
                                     "per-voxel detectable edge-direction coverage");
  std::string vi_out, vi_quad = "64x32";
  int vi_bins = 512;
  GridFlags vi_grid;
  AxesFlags vi_axes;
  cmd_vis->add_option("--out", vi_out, "output coverage volume")->required();
  cmd_vis->add_option("--bins", vi_bins, "hemisphere direction bins");
  cmd_vis->add_option("--quad", vi_quad, "surface sampling NxM");
  vi_grid.attach(cmd_vis);
  vi_axes.attach(cmd_vis);

  // --- artifacts ---
  auto* cmd_art = app.add_subcommand("artifacts",
                                     "predicted reflection-artifact locus");
  std::string ar_point = "0,0,0", ar_out;
  int ar_ntheta = 360;
  cmd_art->add_option("--point", ar_point, "source point x,y,z")->required();
  cmd_art->add_option("--ntheta", ar_ntheta, "samples along the locus");
  cmd_art->add_option("--out", ar_out, "output CSV")->required();

  // --- table1 ---
  auto* cmd_t1 = app.add_subcommand("table1",
                                    "noise sweep over both phantoms and methods");
  Table1Config t1;
  std::string t1_quad = "64x64";
  auto* t1_outdir =
      cmd_t1->add_option("--outdir", t1.output_dir, "output directory");
  t1_outdir->required();
  cmd_t1->add_option("--gammas", t1.gammas, "noise levels");
  cmd_t1->add_option("--landweber-iterations", t1.landweber_iterations);
  cmd_t1->add_option("--lambdas", t1.tv_lambdas, "TV weights searched");
  cmd_t1->add_option("--m", t1.tv_base.m, "CGLS-TV outer rounds");
  cmd_t1->add_option("--m1", t1.tv_base.m1, "CGLS iterations per round");
  cmd_t1->add_option("--m2", t1.tv_base.m2, "TV prox applications per round");
  cmd_t1->add_option("--seed", t1.seed, "noise seed");
  cmd_t1->add_option("--quad", t1_quad, "operator quadrature NxM");

  // --- run (config-file driven experiment) ---
  auto* cmd_run = app.add_subcommand("run", "run a JSON-configured experiment");
  std::string run_config;
  cmd_run->add_option("--config", run_config, "experiment config JSON")->required();

  // --- selftest ---
  auto* cmd_self = app.add_subcommand("selftest", "fast invariant checks");

  try {
    app.parse(argc, argv);

    if (cmd_phantom->parsed()) {
      PhantomSpec spec;
      spec.kind = PhantomSpec::kind_from_string(ph_kind);
      spec.center = parse_point(ph_center);
      spec.radius = ph_radius;
      spec.file = ph_file;
      const Volume v = make_phantom(spec, ph_grid.geom());
      warn_support(v, 0.1, 2.0);
      save_volume(v, ph_out);
      if (!ph_pgm.empty()) save_slice_pgm(v, 2, v.dims[2] / 2, ph_pgm);
    } else if (cmd_project->parsed()) {
      const Volume v = load_volume(pr_in);
      const ForwardOperator op(pr_axes.axes(), VolumeGeom::of(v),
                               parse_quad(pr_quad),
                               pr_matrix_free ? ForwardOperator::Mode::matrix_free
                                              : ForwardOperator::Mode::sparse);
      save_sinogram(op.apply(v), pr_out);
    } else if (cmd_noise->parsed()) {
      save_sinogram(add_noise(load_sinogram(no_in), {no_gamma, no_seed}), no_out);
    } else if (cmd_rec->parsed()) {
      const Sinogram b = load_sinogram(rc_in);
      const bool mfree = rc_matrix_free || rc_method == "spectral";
      const ForwardOperator op(b.axes, rc_grid.geom(), parse_quad(rc_quad),
                               mfree ? ForwardOperator::Mode::matrix_free
                                     : ForwardOperator::Mode::sparse);
      Volume gt;
      const bool have_gt = !rc_gt.empty();
      if (have_gt) gt = load_volume(rc_gt);
      const SolveReport rep = reconstruct(rc_method, op, b, rc_solver,
                                          rc_spectral, have_gt ? &gt : nullptr);
      save_volume(rep.x, rc_out);
      if (!rc_pgm.empty()) save_slice_pgm(rep.x, 2, rep.x.dims[2] / 2, rc_pgm);
      if (!rc_report.empty())
        write_report(rc_report, rc_method,
                     json{{"solver", solver_to_json(rc_solver)}}, rep);
      if (rep.eps_r) std::printf("eps_r %.6f\n", *rep.eps_r);
    } else if (cmd_vis->parsed()) {
      const VisibilityMap map = visibility_map(vi_axes.axes(),
                                               DirectionBins(vi_bins),
                                               vi_grid.geom(),
                                               parse_quad(vi_quad));
      save_volume(map.coverage_volume(), vi_out);
    } else if (cmd_art->parsed()) {
      save_locus_csv(artifact_locus(parse_point(ar_point), ar_ntheta), ar_out);
    } else if (cmd_t1->parsed()) {
      t1.quad = parse_quad(t1_quad);
      const json table = run_table1(t1);
      std::printf("%s\n", table.dump(2).c_str());
    } else if (cmd_run->parsed()) {
      std::ifstream f(run_config);
      if (!f) throw std::runtime_error("cannot open config: " + run_config);
      json j;
      f >> j;
      const ExperimentResult res = run_experiment(ExperimentConfig::from_json(j));
      if (res.eps_r) std::printf("eps_r %.6f\n", *res.eps_r);
    } else if (cmd_self->parsed()) {
      return run_selftest();
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0)
      std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return app.exit(e, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
}
