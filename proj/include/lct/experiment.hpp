#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lct/forward.hpp"
#include "lct/microlocal.hpp"
#include "lct/phantoms.hpp"
#include "lct/sinogram.hpp"
#include "lct/solvers.hpp"
#include "lct/spectral.hpp"
#include "lct/volume.hpp"

// Experiment orchestration: JSON configs, reconstruction dispatch,
// stage-tagged failure reporting, and the Table-1 noise sweep.

namespace lct {

using nlohmann::json;

struct GridSpec {
  int nx = 41, ny = 41, nz = 41;
  double ext_xy = 1.0, ext_z = 1.0;

  VolumeGeom geom() const {
    return VolumeGeom::of(Volume::centered(nx, ny, nz, ext_xy, ext_z));
  }
};

inline GridSpec grid_from_json(const json& j) {
  GridSpec g;
  g.nx = j.value("nx", g.nx);
  g.ny = j.value("ny", g.ny);
  g.nz = j.value("nz", g.nz);
  g.ext_xy = j.value("ext_xy", g.ext_xy);
  g.ext_z = j.value("ext_z", g.ext_z);
  if (g.nx < 1 || g.ny < 1 || g.nz < 1)
    throw std::domain_error("grid: dimensions must be positive");
  return g;
}

inline json grid_to_json(const GridSpec& g) {
  return json{{"nx", g.nx}, {"ny", g.ny}, {"nz", g.nz},
              {"ext_xy", g.ext_xy}, {"ext_z", g.ext_z}};
}

inline SinogramAxes axes_from_json(const json& j) {
  const std::string mode = j.value("mode", "limited");
  const int nh = j.value("nh", 21);
  const int ntheta = j.value("ntheta", 41);
  const int nz0 = j.value("nz0", 31);
  const double alpha = j.value("alpha", 2.0);
  const double z0_span = j.value("z0_span", 3.0);
  if (mode == "limited")
    return SinogramAxes::paper_limited(nh, ntheta, nz0, alpha, z0_span);
  if (mode == "full")
    return SinogramAxes::paper_full(j.value("na", 8), nh, ntheta, nz0, alpha,
                                    z0_span);
  throw std::domain_error("sinogram: mode must be 'limited' or 'full'");
}

inline json axes_to_json(const SinogramAxes& ax) {
  json j{{"mode", ax.mode == SinogramAxes::Mode::limited ? "limited" : "full"},
         {"nh", ax.h.n}, {"ntheta", ax.theta0.n}, {"nz0", ax.z0.n},
         {"alpha", ax.alpha}, {"z0_span", ax.z0.max}};
  if (ax.mode == SinogramAxes::Mode::full) j["na"] = ax.a_axis.n;
  return j;
}

inline PhantomSpec phantom_from_json(const json& j) {
  PhantomSpec spec;
  spec.kind = PhantomSpec::kind_from_string(j.value("kind", "ball"));
  if (j.contains("center")) j.at("center").get_to(spec.center);
  spec.radius = j.value("radius", spec.radius);
  spec.file = j.value("file", spec.file);
  return spec;
}

inline SolverConfig solver_from_json(const json& j) {
  SolverConfig cfg;
  cfg.iterations = j.value("iterations", cfg.iterations);
  cfg.m = j.value("m", cfg.m);
  cfg.m1 = j.value("m1", cfg.m1);
  cfg.m2 = j.value("m2", cfg.m2);
  cfg.tv_lambda = j.value("tv_lambda", cfg.tv_lambda);
  cfg.tv_inner = j.value("tv_inner", cfg.tv_inner);
  cfg.step = j.value("step", cfg.step);
  cfg.tolerance = j.value("tolerance", cfg.tolerance);
  return cfg;
}

inline json solver_to_json(const SolverConfig& cfg) {
  return json{{"iterations", cfg.iterations}, {"m", cfg.m},   {"m1", cfg.m1},
              {"m2", cfg.m2},                 {"tv_lambda", cfg.tv_lambda},
              {"tv_inner", cfg.tv_inner},     {"step", cfg.step},
              {"tolerance", cfg.tolerance}};
}

inline SpectralConfig spectral_from_json(const json& j) {
  SpectralConfig cfg;
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  cfg.radial_nodes = j.value("radial_nodes", cfg.radial_nodes);
  cfg.cheb_nodes = j.value("cheb_nodes", cfg.cheb_nodes);
  cfg.n_max = j.value("n_max", cfg.n_max);
  return cfg;
}

// Reconstruction dispatch over the four supported methods. `spectral`
// ignores the operator and works from the sinogram directly.
inline SolveReport reconstruct(const std::string& method,
                               const ForwardOperator& op, const Sinogram& b,
                               const SolverConfig& solver,
                               const SpectralConfig& spectral,
                               const Volume* ground_truth = nullptr) {
  SolveReport rep;
  if (method == "landweber") {
    rep = landweber(op, b, solver, ground_truth);
  } else if (method == "nncgls") {
    rep = nncgls(op, b, solver.iterations);
  } else if (method == "cgls-tv") {
    rep = cgls_tv(op, b, solver);
  } else if (method == "spectral") {
    rep.x = spectral_reconstruct(b, op.geom(), spectral);
  } else {
    throw std::domain_error("unknown reconstruction method: " + method);
  }
  if (ground_truth && !rep.eps_r) rep.eps_r = relative_error(rep.x, *ground_truth);
  return rep;
}

inline void write_report(const std::string& path, const std::string& method,
                         const json& config, const SolveReport& rep) {
  json j;
  j["method"] = method;
  j["config"] = config;
  if (rep.eps_r) j["eps_r"] = *rep.eps_r;
  j["residual_history"] = rep.residual_history;
  if (rep.best_iteration >= 0) j["best_iteration"] = rep.best_iteration;
  if (rep.breakdown) j["breakdown"] = true;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << j.dump(2) << "\n";
}

struct ExperimentConfig {
  std::string output_dir;
  GridSpec grid;
  json phantom = json{{"kind", "ball"}};
  json sinogram = json::object();
  QuadSpec quad{64, 64};
  NoiseSpec noise;
  std::string method = "landweber";
  SolverConfig solver;
  SpectralConfig spectral;
  uint64_t seed = 0;

  static ExperimentConfig from_json(const json& j) {
    ExperimentConfig c;
    c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
    if (j.contains("phantom")) c.phantom = j.at("phantom");
    if (j.contains("sinogram")) c.sinogram = j.at("sinogram");
    if (j.contains("quad")) {
      c.quad.n_phi = j.at("quad").value("n_phi", c.quad.n_phi);
      c.quad.n_z = j.at("quad").value("n_z", c.quad.n_z);
    }
    if (j.contains("noise")) {
      c.noise.gamma = j.at("noise").value("gamma", 0.0);
      c.noise.seed = j.at("noise").value("seed", uint64_t{0});
    }
    c.method = j.value("method", c.method);
    if (j.contains("solver")) c.solver = solver_from_json(j.at("solver"));
    if (j.contains("spectral")) c.spectral = spectral_from_json(j.at("spectral"));
    c.seed = j.value("seed", uint64_t{0});
    if (c.seed != 0 && c.noise.seed == 0) c.noise.seed = c.seed;
    return c;
  }
};

namespace detail {

// staged writes: everything lands under .tmp names and is renamed at the
// end, so a failed run leaves no partial outputs behind
class StagedOutputs {
 public:
  explicit StagedOutputs(const std::string& dir) : dir_(dir) {
    std::filesystem::create_directories(dir_);
  }

  ~StagedOutputs() {
    if (!committed_)
      for (const auto& t : temps_) {
        std::error_code ec;
        std::filesystem::remove(t, ec);
      }
  }

  // returns the temporary path to write to now
  std::string stage(const std::string& name) {
    const std::string tmp = dir_ + "/" + name + ".tmp";
    temps_.push_back(tmp);
    finals_.push_back(dir_ + "/" + name);
    return tmp;
  }

  // like stage(), but also tracks the JSON sidecar save_volume/save_sinogram
  // write next to the payload
  std::string stage_data(const std::string& name) {
    const std::string tmp = stage(name);
    temps_.push_back(tmp + ".json");
    finals_.push_back(dir_ + "/" + name + ".json");
    return tmp;
  }

  void commit() {
    for (size_t i = 0; i < temps_.size(); ++i)
      std::filesystem::rename(temps_[i], finals_[i]);
    committed_ = true;
  }

 private:
  std::string dir_;
  std::vector<std::string> temps_, finals_;
  bool committed_ = false;
};

template <class F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace detail

struct ExperimentResult {
  std::optional<double> eps_r;
  json manifest;
};

// Full pipeline: phantom -> forward -> noise -> reconstruct; every artifact
// plus a manifest is written atomically into config.output_dir. Any stage
// failure raises a stage-tagged error and removes partial outputs.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  detail::StagedOutputs out(cfg.output_dir);

  const Volume phantom = detail::stage("phantom", [&] {
    Volume v = make_phantom(phantom_from_json(cfg.phantom), cfg.grid.geom());
    save_volume(v, out.stage_data("phantom.f32"));
    return v;
  });

  const SinogramAxes axes = axes_from_json(cfg.sinogram);
  const ForwardOperator op = detail::stage("assemble", [&] {
    return ForwardOperator(axes, cfg.grid.geom(), cfg.quad);
  });

  const Sinogram clean = detail::stage("forward", [&] {
    Sinogram s = op.apply(phantom);
    save_sinogram(s, out.stage_data("sinogram.f32"));
    return s;
  });

  const Sinogram noisy =
      detail::stage("noise", [&] { return add_noise(clean, cfg.noise); });

  const SolveReport rep = detail::stage("reconstruct", [&] {
    return reconstruct(cfg.method, op, noisy, cfg.solver, cfg.spectral, &phantom);
  });

  detail::stage("write", [&] {
    save_volume(rep.x, out.stage_data("reconstruction.f32"));
    write_report(out.stage("report.json"), cfg.method,
                 json{{"solver", solver_to_json(cfg.solver)},
                      {"noise", {{"gamma", cfg.noise.gamma}, {"seed", cfg.noise.seed}}}},
                 rep);
    return 0;
  });

  ExperimentResult res;
  res.eps_r = rep.eps_r;
  res.manifest = json{{"grid", grid_to_json(cfg.grid)},
                      {"phantom", cfg.phantom},
                      {"sinogram", axes_to_json(axes)},
                      {"quad", {{"n_phi", cfg.quad.n_phi}, {"n_z", cfg.quad.n_z}}},
                      {"noise", {{"gamma", cfg.noise.gamma}, {"seed", cfg.noise.seed}}},
                      {"method", cfg.method},
                      {"solver", solver_to_json(cfg.solver)},
                      {"seed", cfg.seed},
                      {"rows", axes.total()},
                      {"eps_r", rep.eps_r ? json(*rep.eps_r) : json()}};
  detail::stage("manifest", [&] {
    std::ofstream f(out.stage("manifest.json"));
    f << res.manifest.dump(2) << "\n";
    return 0;
  });
  out.commit();
  return res;
}

struct Table1Config {
  std::vector<double> gammas{0.001, 0.01, 0.05};
  std::vector<std::string> phantoms{"spin_top", "layered_bricks"};
  GridSpec grid;
  QuadSpec quad{64, 64};
  int landweber_iterations = 100;
  SolverConfig tv_base{.m = 30};  // m, m1, m2, tv_inner for CGLS-TV
  std::vector<double> tv_lambdas{2e-3, 8e-3, 0.02, 0.05, 0.1, 0.3};
  uint64_t seed = 1;
  std::string output_dir;
};

// Noise sweep reproducing the Table-1 layout: for each phantom and gamma,
// Landweber (best iterate against ground truth) and CGLS-TV with a small
// lambda grid search. Emits eps_r values as JSON and CSV.
inline json run_table1(const Table1Config& cfg) {
  const SinogramAxes axes = SinogramAxes::paper_limited();
  const ForwardOperator op(axes, cfg.grid.geom(), cfg.quad);
  const double sigma = op.estimate_sigma_max();
  json table = json::array();
  for (const std::string& ph : cfg.phantoms) {
    PhantomSpec spec;
    spec.kind = PhantomSpec::kind_from_string(ph);
    const Volume gt = make_phantom(spec, cfg.grid.geom());
    const Sinogram clean = op.apply(gt);
    for (double gamma : cfg.gammas) {
      const Sinogram b = add_noise(clean, {gamma, cfg.seed});
      json row{{"phantom", ph}, {"gamma", gamma}};

      SolverConfig lw;
      lw.iterations = cfg.landweber_iterations;
      lw.step = sigma > 0.0 ? 1.8 / (sigma * sigma) : 0.0;
      const SolveReport rl = landweber(op, b, lw, &gt);
      row["landweber"] = *rl.eps_r;
      row["landweber_best_iteration"] = rl.best_iteration;

      double best = std::numeric_limits<double>::infinity();
      double best_lambda = 0.0;
      for (double lambda : cfg.tv_lambdas) {
        SolverConfig tv = cfg.tv_base;
        tv.tv_lambda = lambda;
        const SolveReport rt = cgls_tv(op, b, tv);
        const double err = relative_error(rt.x, gt);
        if (err < best) {
          best = err;
          best_lambda = lambda;
        }
      }
      row["cgls_tv"] = best;
      row["cgls_tv_lambda"] = best_lambda;
      table.push_back(row);
    }
  }
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream jf(cfg.output_dir + "/table1.json");
    jf << table.dump(2) << "\n";
    std::ofstream cf(cfg.output_dir + "/table1.csv");
    cf << "phantom,gamma,landweber,cgls_tv\n";
    for (const auto& row : table)
      cf << row["phantom"].get<std::string>() << "," << row["gamma"].get<double>()
         << "," << row["landweber"].get<double>() << ","
         << row["cgls_tv"].get<double>() << "\n";
  }
  return table;
}

}  // namespace lct
