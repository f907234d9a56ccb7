#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lct/geometry.hpp"
#include "lct/volume.hpp"

namespace lct {

// Uniform 1-D sample axis. half_open_min shifts all samples up by one step so
// the minimum is excluded (used for h, which must be positive); half_open_max
// drops the duplicated periodic endpoint (used for theta0).
struct AxisSpec {
  double min = 0.0;
  double max = 1.0;
  int n = 1;
  bool half_open_min = false;
  bool half_open_max = false;

  double step() const {
    if (n <= 1) return max - min;
    if (half_open_min || half_open_max) return (max - min) / n;
    return (max - min) / (n - 1);
  }

  double value(int i) const {
    if (i < 0 || i >= n) throw std::out_of_range("AxisSpec::value");
    return min + (half_open_min ? (i + 1) : i) * step();
  }

  bool uniform_matches(const AxisSpec& o) const {
    return min == o.min && max == o.max && n == o.n &&
           half_open_min == o.half_open_min && half_open_max == o.half_open_max;
  }
};

// Lemon sample grid. In limited mode the lemons are (h, theta0, z0) with a
// fixed half source-detector separation alpha. In full mode an extra axis of
// separations is swept, so the (p, R) pairs form the product grid
// {(p(h; a), R(h; a)) : h in h-axis, a in a-axis}; the limited grid is the
// a = {alpha} special case.
struct SinogramAxes {
  enum class Mode { limited, full };
  Mode mode = Mode::limited;
  double alpha = 2.0;   // limited mode separation
  AxisSpec a_axis;      // full mode only: half-separations, each in (0, half_height]
  AxisSpec h;           // heights, half-open at 0
  AxisSpec theta0;      // axis angles, half-open at 2*pi
  AxisSpec z0;          // axial centers, inclusive

  // Default limited-data grid: 21 x 41 x 31 = 26691 lemons over
  // (0,2] x [0,2pi) x [-3,3].
  static SinogramAxes paper_limited(int nh = 21, int ntheta = 41, int nz0 = 31,
                                    double alpha = 2.0, double z0_span = 3.0) {
    SinogramAxes ax;
    ax.mode = Mode::limited;
    ax.alpha = alpha;
    ax.h = {0.0, alpha, nh, true, false};
    ax.theta0 = {0.0, 2.0 * pi, ntheta, false, true};
    ax.z0 = {-z0_span, z0_span, nz0, false, false};
    return ax;
  }

  static SinogramAxes paper_full(int na, int nh, int ntheta, int nz0,
                                 double a_max = 2.0, double z0_span = 3.0) {
    SinogramAxes ax = paper_limited(nh, ntheta, nz0, a_max, z0_span);
    ax.mode = Mode::full;
    ax.a_axis = {0.0, a_max, na, true, false};
    return ax;
  }

  size_t n_a() const { return mode == Mode::full ? a_axis.n : 1; }

  size_t total() const {
    return n_a() * static_cast<size_t>(h.n) * theta0.n * z0.n;
  }

  // Row order: a (outer), h, theta0, z0 (inner).
  size_t flat_index(int ia, int ih, int itheta, int iz0) const {
    return ((static_cast<size_t>(ia) * h.n + ih) * theta0.n + itheta) * z0.n + iz0;
  }

  LemonParams lemon(size_t row) const {
    const int iz0 = static_cast<int>(row % z0.n);
    row /= z0.n;
    const int itheta = static_cast<int>(row % theta0.n);
    row /= theta0.n;
    const int ih = static_cast<int>(row % h.n);
    const int ia = static_cast<int>(row / h.n);
    const double a = mode == Mode::full ? a_axis.value(ia) : alpha;
    // h parametrizes heights in (0, a] proportionally when a varies
    const double hv = mode == Mode::full ? h.value(ih) * (a / h.max) : h.value(ih);
    return limited_to_full({hv, theta0.value(itheta), z0.value(iz0)}, a);
  }
};

struct Sinogram {
  SinogramAxes axes;
  std::vector<double> data;

  Sinogram() = default;
  explicit Sinogram(const SinogramAxes& ax) : axes(ax), data(ax.total(), 0.0) {}

  size_t size() const { return data.size(); }
};

namespace detail {

inline nlohmann::json axis_json(const AxisSpec& a) {
  return nlohmann::json{{"min", a.min},
                        {"max", a.max},
                        {"n", a.n},
                        {"half_open_min", a.half_open_min},
                        {"half_open_max", a.half_open_max}};
}

inline AxisSpec axis_from_json(const nlohmann::json& j) {
  AxisSpec a;
  j.at("min").get_to(a.min);
  j.at("max").get_to(a.max);
  j.at("n").get_to(a.n);
  a.half_open_min = j.value("half_open_min", false);
  a.half_open_max = j.value("half_open_max", false);
  return a;
}

}  // namespace detail

inline void save_sinogram(const Sinogram& sino, const std::string& path) {
  detail::write_f32(path, sino.data);
  nlohmann::json j;
  j["mode"] = sino.axes.mode == SinogramAxes::Mode::limited ? "limited" : "full";
  j["alpha"] = sino.axes.alpha;
  if (sino.axes.mode == SinogramAxes::Mode::full)
    j["a"] = detail::axis_json(sino.axes.a_axis);
  j["h"] = detail::axis_json(sino.axes.h);
  j["theta0"] = detail::axis_json(sino.axes.theta0);
  j["z0"] = detail::axis_json(sino.axes.z0);
  std::ofstream f(detail::sidecar_path(path));
  f << j.dump(2) << "\n";
}

inline Sinogram load_sinogram(const std::string& path) {
  std::ifstream f(detail::sidecar_path(path));
  if (!f) throw std::runtime_error("missing sidecar: " + detail::sidecar_path(path));
  nlohmann::json j;
  f >> j;
  SinogramAxes ax;
  ax.mode = j.at("mode") == "full" ? SinogramAxes::Mode::full
                                   : SinogramAxes::Mode::limited;
  j.at("alpha").get_to(ax.alpha);
  if (ax.mode == SinogramAxes::Mode::full)
    ax.a_axis = detail::axis_from_json(j.at("a"));
  ax.h = detail::axis_from_json(j.at("h"));
  ax.theta0 = detail::axis_from_json(j.at("theta0"));
  ax.z0 = detail::axis_from_json(j.at("z0"));
  Sinogram sino(ax);
  sino.data = detail::read_f32(path, ax.total());
  return sino;
}

}  // namespace lct
