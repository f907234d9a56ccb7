#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "lct/experiment.hpp"

using namespace lct;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LCT_CLI_PATH) + " " + args +
                          " >cli_stdout.txt 2>cli_stderr.txt";
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("phantom rasterization invariants") {
  const VolumeGeom geom = VolumeGeom::of(Volume::centered(41, 41, 41, 1.0, 1.0));

  SECTION("delta lands on the voxel nearest the requested point") {
    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::delta;
    spec.center = {1.0, 0.0, 0.0};
    const Volume v = make_phantom(spec, geom);
    int count = 0;
    for (int k = 0; k < 41; ++k)
      for (int j = 0; j < 41; ++j)
        for (int i = 0; i < 41; ++i)
          if (v.at(i, j, k) != 0.0) {
            ++count;
            const Vec3 x = v.voxel_center(i, j, k);
            CHECK(std::abs(x[0] - 1.0) <= geom.spacing[0] / 2 + 1e-12);
            CHECK(std::abs(x[1]) <= geom.spacing[1] / 2 + 1e-12);
            CHECK(std::abs(x[2]) <= geom.spacing[2] / 2 + 1e-12);
            CHECK(v.at(i, j, k) == 1.0);
          }
    CHECK(count == 1);
  }

  SECTION("spin top histogram is {0,1} and symmetric under z-rotation") {
    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::spin_top;
    const Volume v = make_phantom(spec, geom);
    std::set<double> values(v.data.begin(), v.data.end());
    CHECK(values == std::set<double>{0.0, 1.0});
    // 90-degree grid rotation (i,j) -> (j, nx-1-i) maps the phantom to itself
    for (int k = 0; k < 41; ++k)
      for (int j = 0; j < 41; ++j)
        for (int i = 0; i < 41; ++i)
          CHECK(v.at(i, j, k) == v.at(j, 40 - i, k));
  }

  SECTION("layered bricks histogram is within {0,1,2} with both densities present") {
    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::layered_bricks;
    const Volume v = make_phantom(spec, geom);
    bool has1 = false, has2 = false;
    for (double x : v.data) {
      CHECK((x == 0.0 || x == 1.0 || x == 2.0));
      has1 |= x == 1.0;
      has2 |= x == 2.0;
    }
    CHECK(has1);
    CHECK(has2);
  }

  SECTION("custom phantom grid check") {
    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::custom;
    CHECK_THROWS_AS(make_phantom(spec, geom), std::domain_error);
  }
}

TEST_CASE("run_experiment writes a complete artifact set and is reproducible") {
  const json config{
      {"output_dir", "exp_out"},
      {"grid", {{"nx", 11}, {"ny", 11}, {"nz", 11}, {"ext_xy", 1.0}, {"ext_z", 1.0}}},
      {"phantom", {{"kind", "ball"}, {"radius", 0.5}}},
      {"sinogram", {{"nh", 5}, {"ntheta", 7}, {"nz0", 5}}},
      {"quad", {{"n_phi", 24}, {"n_z", 24}}},
      {"noise", {{"gamma", 0.01}, {"seed", 5}}},
      {"method", "landweber"},
      {"solver", {{"iterations", 15}}}};
  fs::remove_all("exp_out");
  const ExperimentResult a = run_experiment(ExperimentConfig::from_json(config));
  REQUIRE(a.eps_r.has_value());
  for (const char* name :
       {"phantom.f32", "phantom.f32.json", "sinogram.f32", "sinogram.f32.json",
        "reconstruction.f32", "reconstruction.f32.json", "report.json",
        "manifest.json"})
    CHECK(fs::exists(fs::path("exp_out") / name));
  // no stray temporaries
  for (const auto& e : fs::directory_iterator("exp_out"))
    CHECK(e.path().extension() != ".tmp");

  const ExperimentResult b = run_experiment(ExperimentConfig::from_json(config));
  CHECK(*a.eps_r == *b.eps_r);

  // report carries the required fields
  std::ifstream rf("exp_out/report.json");
  json report;
  rf >> report;
  CHECK(report.at("method") == "landweber");
  CHECK(report.contains("config"));
  CHECK(report.at("eps_r").get<double>() == Catch::Approx(*a.eps_r));
  CHECK(report.at("residual_history").size() == 15);

  // saved artifacts round-trip
  const Volume rec = load_volume("exp_out/reconstruction.f32");
  CHECK(rec.dims == std::array<int, 3>{11, 11, 11});
}

TEST_CASE("run_experiment failures are stage-tagged and leave no partial output") {
  json config{{"output_dir", "exp_fail"},
              {"grid", {{"nx", 9}, {"ny", 9}, {"nz", 9}}},
              {"phantom", {{"kind", "custom"}, {"file", "does_not_exist.f32"}}},
              {"sinogram", {{"nh", 3}, {"ntheta", 4}, {"nz0", 3}}},
              {"method", "landweber"}};
  fs::remove_all("exp_fail");
  try {
    run_experiment(ExperimentConfig::from_json(config));
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("stage phantom") != std::string::npos);
  }
  if (fs::exists("exp_fail"))
    CHECK(fs::is_empty("exp_fail"));
}

TEST_CASE("cli: phantom generates the requested cube") {
  REQUIRE(run_cli("phantom --kind spin_top --dims 41 --out cli_phantom.f32") == 0);
  const Volume v = load_volume("cli_phantom.f32");
  CHECK(v.dims == std::array<int, 3>{41, 41, 41});
  CHECK(v.size() == 41u * 41 * 41);
}

TEST_CASE("cli: project, noise, reconstruct round trip") {
  REQUIRE(run_cli("phantom --kind ball --radius 0.5 --dims 11 --out cli_ball.f32") == 0);
  REQUIRE(run_cli("project --in cli_ball.f32 --out cli_sino.f32 "
                  "--mode limited --nh 5 --ntheta 7 --nz0 5 --quad 24x24") == 0);
  const Sinogram s = load_sinogram("cli_sino.f32");
  CHECK(s.axes.total() == 5u * 7 * 5);
  REQUIRE(run_cli("noise --in cli_sino.f32 --out cli_noisy.f32 "
                  "--gamma 0.01 --seed 3") == 0);
  REQUIRE(run_cli("reconstruct --in cli_noisy.f32 --out cli_rec.f32 "
                  "--method nncgls --iterations 10 --dims 11 "
                  "--quad 24x24 --report cli_report.json "
                  "--ground-truth cli_ball.f32") == 0);
  std::ifstream rf("cli_report.json");
  REQUIRE(rf.good());
  json report;
  rf >> report;
  CHECK(report.at("method") == "nncgls");
  CHECK(report.at("eps_r").get<double>() < 1.0);
}

TEST_CASE("cli: artifacts traces the radius-2 circle for the axis point") {
  REQUIRE(run_cli("artifacts --point 0,0,0 --ntheta 32 --out cli_locus.csv") == 0);
  std::ifstream f("cli_locus.csv");
  std::string line;
  std::getline(f, line);
  CHECK(line == "theta0,x,y,z");
  int rows = 0;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    double t, x, y, z;
    char c;
    ss >> t >> c >> x >> c >> y >> c >> z;
    CHECK(std::sqrt(x * x + y * y) == Catch::Approx(2.0).margin(1e-5));
    CHECK(z == Catch::Approx(0.0).margin(1e-12));
    ++rows;
  }
  CHECK(rows == 32);
}

TEST_CASE("cli: errors exit nonzero with JSON on stderr") {
  CHECK(run_cli("reconstruct --in missing.f32 --out x.f32") != 0);
  const std::string err = slurp("cli_stderr.txt");
  CHECK(err.find("{\"error\":") != std::string::npos);
  CHECK(run_cli("project --in cli_ball.f32 --out x.f32 --mode bogus") != 0);
  CHECK(slurp("cli_stderr.txt").find("error") != std::string::npos);
}

TEST_CASE("cli: selftest passes") {
  REQUIRE(run_cli("selftest") == 0);
  const std::string out = slurp("cli_stdout.txt");
  CHECK(out.find("all checks passed") != std::string::npos);
}
