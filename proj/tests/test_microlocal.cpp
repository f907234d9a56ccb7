#include <catch_amalgamated.hpp>

#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "lct/microlocal.hpp"
#include "lct/phantoms.hpp"

using namespace lct;

TEST_CASE("lemon_normal on a sphere is radial") {
  const LemonParams sphere{2.0, 0.0, 0.3, -0.4};
  const Vec3 c = sphere.axis_point();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const double z = (2 * u(rng) - 1) * 1.99;
    const double phi = (2 * u(rng) - 1) * pi;
    const Vec3 x = surface_point(sphere, phi, z);
    const Vec3 n = lemon_normal(sphere, x);
    const Vec3 radial{(x[0] - c[0]) / 2.0, (x[1] - c[1]) / 2.0, (x[2] - c[2]) / 2.0};
    for (int d = 0; d < 3; ++d) CHECK(n[d] == Catch::Approx(radial[d]).margin(1e-10));
  }
}

TEST_CASE("lemon_normal is orthogonal to finite-difference surface tangents") {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const LemonParams lp =
        limited_to_full({0.1 + 1.9 * u(rng), 2 * pi * u(rng), 2 * u(rng) - 1}, 2.0);
    const double a = lp.half_extent();
    const double z = (2 * u(rng) - 1) * a * 0.95;
    const double phi = (2 * u(rng) - 1) * pi;
    const Vec3 x = surface_point(lp, phi, z);
    const Vec3 n = lemon_normal(lp, x);
    CHECK(norm(n) == Catch::Approx(1.0).epsilon(1e-12));
    const double d = 1e-6;
    const Vec3 xp = surface_point(lp, phi + d, z);
    const Vec3 xz = surface_point(lp, phi, z + d);
    const Vec3 tp{(xp[0] - x[0]) / d, (xp[1] - x[1]) / d, (xp[2] - x[2]) / d};
    const Vec3 tz{(xz[0] - x[0]) / d, (xz[1] - x[1]) / d, (xz[2] - x[2]) / d};
    CHECK(std::abs(dot(n, tp)) < 1e-5 * std::max(1.0, norm(tp)));
    CHECK(std::abs(dot(n, tz)) < 1e-5 * std::max(1.0, norm(tz)));
  }
}

TEST_CASE("lemon_normal rejects off-surface points and the apex") {
  const LemonParams lp{2.5, 1.5, 0.0, 0.0};
  // the origin is on this lemon ((1 + R)^2 = p^2); half-way out is not
  CHECK_NOTHROW(lemon_normal(lp, {0.0, 0.0, 0.0}));
  CHECK_THROWS_AS(lemon_normal(lp, {0.5, 0.0, 0.0}), std::domain_error);
  // apex (1, 0, 2): on the surface but the gradient degenerates
  CHECK_THROWS_AS(lemon_normal(lp, {1.0, 0.0, 2.0}), std::domain_error);
}

TEST_CASE("reflect_tangent_plane") {
  // fixed point on the plane itself
  const Vec3 on{1.0, 0.0, 0.5};
  const Vec3 r = reflect_tangent_plane(on, 0.0);
  for (int d = 0; d < 3; ++d) CHECK(r[d] == Catch::Approx(on[d]).margin(1e-14));
  // origin reflects to twice the tangency point
  const Vec3 o = reflect_tangent_plane({0.0, 0.0, 0.7}, 1.1);
  CHECK(o[0] == Catch::Approx(2.0 * std::cos(1.1)));
  CHECK(o[1] == Catch::Approx(2.0 * std::sin(1.1)));
  CHECK(o[2] == Catch::Approx(0.7));
  // involution
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const Vec3 x{u(rng), u(rng), u(rng)};
    const double th = pi * u(rng);
    const Vec3 back = reflect_tangent_plane(reflect_tangent_plane(x, th), th);
    for (int d = 0; d < 3; ++d) CHECK(back[d] == Catch::Approx(x[d]).margin(1e-13));
  }
}

TEST_CASE("artifact locus of the axis point is the radius-2 circle") {
  const ArtifactLocus loc = artifact_locus({0.0, 0.0, 0.25}, 180);
  REQUIRE(loc.points.size() == 180);
  for (const Vec3& p : loc.points) {
    CHECK(std::sqrt(p[0] * p[0] + p[1] * p[1]) == Catch::Approx(2.0));
    CHECK(p[2] == Catch::Approx(0.25));
  }
}

TEST_CASE("artifact locus of a boundary point is the cardioid") {
  // reflections of (1,0,0): x = 1 - 2(cos t - 1)cos t, y = -2(cos t - 1)sin t
  const ArtifactLocus loc = artifact_locus({1.0, 0.0, 0.0}, 90);
  for (size_t i = 0; i < loc.points.size(); ++i) {
    const double t = loc.theta0[i];
    const double d = std::cos(t) - 1.0;
    CHECK(loc.points[i][0] == Catch::Approx(1.0 - 2.0 * d * std::cos(t)).margin(1e-12));
    CHECK(loc.points[i][1] == Catch::Approx(-2.0 * d * std::sin(t)).margin(1e-12));
    CHECK(loc.points[i][2] == Catch::Approx(0.0).margin(1e-14));
  }
  // the locus passes through the source point itself (theta0 = 0)
  CHECK(norm({loc.points[0][0] - 1.0, loc.points[0][1], loc.points[0][2]}) < 1e-12);
}

TEST_CASE("artifact locus points never fall inside the open unit cylinder") {
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    Vec3 x{u(rng), u(rng), u(rng)};
    const double r2 = x[0] * x[0] + x[1] * x[1];
    if (r2 >= 1.0) continue;
    for (const Vec3& p : artifact_locus(x, 64).points)
      CHECK(p[0] * p[0] + p[1] * p[1] >= 1.0 - 1e-12);
  }
  CHECK_THROWS_AS(artifact_locus({1.5, 0.0, 0.0}, 8), std::domain_error);
}

TEST_CASE("locus CSV round trip") {
  const ArtifactLocus loc = artifact_locus({0.2, -0.1, 0.4}, 16);
  save_locus_csv(loc, "test_locus.csv");
  std::ifstream f("test_locus.csv");
  REQUIRE(f.good());
  std::string header;
  std::getline(f, header);
  CHECK(header == "theta0,x,y,z");
  int rows = 0;
  std::string line;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    double v[4];
    char comma;
    ss >> v[0] >> comma >> v[1] >> comma >> v[2] >> comma >> v[3];
    CHECK(std::abs(v[1] * v[1] + v[2] * v[2]) >= 1.0 - 1e-6);
    ++rows;
  }
  CHECK(rows == 16);
}

TEST_CASE("DirectionBins partitions the hemisphere") {
  const DirectionBins bins(512);
  CHECK(bins.size() == 512);
  CHECK(bins.bin({0.0, 0.0, 1.0}) == 0);
  CHECK(bins.bin({0.0, 0.0, -3.0}) == 0);  // antipode of vertical
  std::mt19937_64 rng(105);
  std::normal_distribution<double> gauss;
  std::map<int, int> counts;
  const int samples = 200000;
  for (int t = 0; t < samples; ++t) {
    Vec3 d{gauss(rng), gauss(rng), gauss(rng)};
    const int b = bins.bin(d);
    REQUIRE(b >= 0);
    REQUIRE(b < 512);
    // antipodal identification
    CHECK(bins.bin({-d[0], -d[1], -d[2]}) == b);
    ++counts[b];
  }
  // every bin is hit, and occupancy is within a factor ~2.5 of uniform
  CHECK(counts.size() == 512);
  const double expect = double(samples) / 512;
  for (const auto& [b, c] : counts) {
    CHECK(c > expect / 2.5);
    CHECK(c < expect * 2.5);
  }
}

TEST_CASE("visibility map marks coverage consistently") {
  const VolumeGeom geom = VolumeGeom::of(Volume::centered(9, 9, 9, 1.0, 1.0));
  const DirectionBins bins(64);
  const SinogramAxes ax = SinogramAxes::paper_limited(8, 12, 9);
  const VisibilityMap map = visibility_map(ax, bins, geom, {32, 16});
  int nonzero = 0;
  for (size_t v = 0; v < geom.size(); ++v) {
    const double c = map.coverage(v);
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
    if (c > 0.0) ++nonzero;
    // the vertical bin must stay empty everywhere: lemon normals are never
    // within the polar cap
    CHECK_FALSE(map.occupied(v, 0));
  }
  CHECK(nonzero > 0);
  const Volume cov = map.coverage_volume();
  for (size_t v = 0; v < geom.size(); ++v)
    CHECK(cov.data[v] == Catch::Approx(map.coverage(v)).margin(1e-15));
}

TEST_CASE("full-separation axes cover at least as much as limited axes") {
  const VolumeGeom geom = VolumeGeom::of(Volume::centered(9, 9, 9, 1.0, 1.0));
  const DirectionBins bins(64);
  const SinogramAxes lim = SinogramAxes::paper_limited(6, 10, 7);
  const SinogramAxes full = SinogramAxes::paper_full(3, 6, 10, 7);
  const VisibilityMap ml = visibility_map(lim, bins, geom, {24, 12});
  const VisibilityMap mf = visibility_map(full, bins, geom, {24, 12});
  for (size_t v = 0; v < geom.size(); ++v)
    CHECK(mf.coverage(v) >= ml.coverage(v));
}
