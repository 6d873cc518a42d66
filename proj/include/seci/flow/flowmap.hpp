#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <utility>
#include <vector>

#include "seci/core/common.hpp"
#include "seci/core/threads.hpp"
#include "seci/flow/noise.hpp"
#include "seci/flow/rough.hpp"
#include "seci/spectral/field.hpp"
#include "seci/spectral/nufft.hpp"
#include "seci/spectral/ops.hpp"
#include "seci/spectral/snapshot.hpp"

namespace seci::flow {

using spectral::Nufft;

// Evaluates one Brownian driver component: (k, t, d) -> d-th derivative of
// B_n^k at t.  The flow integrator only queries d = 1 and d = 2.
using DriverFn = std::function<double(int k, double t, int d)>;

inline DriverFn driver_of(const RoughDriver& driver, int level) {
  return [&driver, level](int k, double t, int d) { return driver.bn(level, k, t, d); };
}

namespace detail {

inline Vec3 velocity(const NoiseConfig& cfg, const std::vector<double>& coef, const Vec3& x) {
  Vec3 v{0, 0, 0};
  for (int k = 0; k < cfg.components(); ++k) {
    if (coef[k] == 0.0) continue;
    Vec3 s = cfg.sigma_at(k, x);
    for (int i = 0; i < 3; ++i) v[i] += coef[k] * s[i];
  }
  return v;
}

}  // namespace detail

// RK4 for dx/ds = sum_k coef_k(s) sigma_k(x) from s0 to s1 in equal substeps.
// coef(s) is shared by every point, so the driver is sampled once per stage.
template <class CoefFn>
std::vector<Vec3> rk4_points(std::vector<Vec3> pts, const NoiseConfig& cfg, CoefFn&& coef, double s0, double s1,
                             int substeps) {
  if (substeps < 1 || cfg.components() == 0 || s1 == s0) return pts;
  double h = (s1 - s0) / substeps;
  std::vector<double> c1(cfg.components()), c2(cfg.components()), c3(cfg.components());
  for (int step = 0; step < substeps; ++step) {
    double s = s0 + step * h;
    coef(s, c1);
    coef(s + 0.5 * h, c2);
    coef(s + h, c3);
    parallel_for(0, std::int64_t(pts.size()), [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t p = lo; p < hi; ++p) {
        Vec3 x = pts[p];
        Vec3 k1 = detail::velocity(cfg, c1, x);
        Vec3 k2 = detail::velocity(cfg, c2, x + 0.5 * h * k1);
        Vec3 k3 = detail::velocity(cfg, c2, x + 0.5 * h * k2);
        Vec3 k4 = detail::velocity(cfg, c3, x + h * k3);
        pts[p] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    });
  }
  return pts;
}

inline std::vector<Vec3> advance_points(std::vector<Vec3> pts, const NoiseConfig& cfg, const DriverFn& driver,
                                        double t0, double t1, int substeps) {
  return rk4_points(std::move(pts), cfg, [&](double s, std::vector<double>& c) {
    for (int k = 0; k < cfg.components(); ++k) c[k] = driver(k, s, 1);
  }, t0, t1, substeps);
}

// Inverse of the segment map from t0 to t1: integrates the time-reflected
// driver backwards, y(s) solving dy/ds = -sigma(y) dB_n(t1 - s).
inline std::vector<Vec3> retreat_points(std::vector<Vec3> pts, const NoiseConfig& cfg, const DriverFn& driver,
                                        double t0, double t1, int substeps) {
  return rk4_points(std::move(pts), cfg, [&](double s, std::vector<double>& c) {
    for (int k = 0; k < cfg.components(); ++k) c[k] = -driver(k, t1 - s, 1);
  }, 0.0, t1 - t0, substeps);
}

struct FlowFrame {
  double time = 0.0;
  spectral::SpectralField disp_fwd;  // phi(x) - x sampled at the grid nodes
  spectral::SpectralField disp_inv;  // phi^{-1}(x) - x
  double jac_defect = 0.0;           // max over nodes of |det grad phi - 1|
};

// Flow of the transported frame on a uniform time grid.  Frames at t <= 0 are
// the identity.  Only displacements are stored; phidot and phiddot follow
// from the coefficients analytically.
class FlowMap {
 public:
  int level = 0;
  int n = 0;
  double t0 = 0.0;
  double dt = 0.0;
  NoiseConfig noise;
  DriverFn driver;
  std::vector<FlowFrame> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  double time(int i) const { return t0 + i * dt; }

  int index_of(double t) const {
    int i = static_cast<int>(std::llround((t - t0) / dt));
    if (i < 0 || i >= frame_count() || std::abs(time(i) - t) > 1e-9)
      throw seci_error("FlowMap: time off the frame grid");
    return i;
  }

  const FlowFrame& frame_at(double t) const { return frames[index_of(t)]; }

  double jacobian_defect() const {
    double worst = 0.0;
    for (const FlowFrame& f : frames) worst = std::max(worst, f.jac_defect);
    return worst;
  }

  bool identity_frame(int i) const { return time(i) <= 1e-12 || noise.components() == 0; }

  // phi(x) at the nodes of frame i, as points.
  std::vector<Vec3> points(int i) const {
    std::vector<Vec3> pts = grid_nodes(n);
    if (identity_frame(i)) return pts;
    std::vector<double> dx = frames[i].disp_fwd.component_samples(0);
    std::vector<double> dy = frames[i].disp_fwd.component_samples(1);
    std::vector<double> dz = frames[i].disp_fwd.component_samples(2);
    for (std::size_t p = 0; p < pts.size(); ++p) pts[p] = pts[p] + Vec3{dx[p], dy[p], dz[p]};
    return pts;
  }

  // Time derivative of the flow at the nodes, component-major layout.
  std::vector<double> phidot_samples(int i) const { return phi_time_derivative(i, 1); }
  std::vector<double> phiddot_samples(int i) const { return phi_time_derivative(i, 2); }

  static std::vector<Vec3> grid_nodes(int n) {
    std::vector<Vec3> pts(static_cast<std::size_t>(n) * n * n);
    double h = two_pi / n;
    std::int64_t idx = 0;
    for (int i1 = 0; i1 < n; ++i1)
      for (int i2 = 0; i2 < n; ++i2)
        for (int i3 = 0; i3 < n; ++i3) pts[idx++] = Vec3{i1 * h, i2 * h, i3 * h};
    return pts;
  }

 private:
  std::vector<double> phi_time_derivative(int i, int order) const {
    std::vector<Vec3> pts = points(i);
    std::int64_t n3 = static_cast<std::int64_t>(pts.size());
    std::vector<double> out(3 * n3, 0.0);
    if (noise.components() == 0) return out;
    double t = time(i);
    std::vector<double> c1(noise.components()), c2(noise.components());
    for (int k = 0; k < noise.components(); ++k) {
      c1[k] = driver(k, t, 1);
      c2[k] = driver(k, t, 2);
    }
    std::vector<Vec3> dot(order == 2 ? pts.size() : 0);
    if (order == 2) {
      parallel_for(0, n3, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t p = lo; p < hi; ++p) dot[p] = detail::velocity(noise, c1, pts[p]);
      });
    }
    parallel_for(0, n3, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t p = lo; p < hi; ++p) {
        Vec3 val{0, 0, 0};
        if (order == 1) {
          val = detail::velocity(noise, c1, pts[p]);
        } else {
          for (int k = 0; k < noise.components(); ++k) {
            Vec3 s = noise.sigma_at(k, pts[p]);
            Vec3 gs = mat3_apply(noise.sigma_grad_at(k, pts[p]), dot[p]);
            for (int a = 0; a < 3; ++a) val[a] += c2[k] * s[a] + c1[k] * gs[a];
          }
        }
        for (int a = 0; a < 3; ++a) out[a * n3 + p] = val[a];
      }
    });
    return out;
  }
};

struct FlowGrid {
  double t0 = 0.0;
  double dt = 0.0;
  int frames = 0;
};

namespace detail {

inline spectral::SpectralField displacement_field(int n, const std::vector<Vec3>& nodes,
                                                  const std::vector<Vec3>& pts) {
  std::int64_t n3 = static_cast<std::int64_t>(nodes.size());
  std::vector<double> samples(3 * n3);
  for (std::int64_t p = 0; p < n3; ++p)
    for (int a = 0; a < 3; ++a) samples[a * n3 + p] = pts[p][a] - nodes[p][a];
  return spectral::SpectralField::from_samples(spectral::Shape::vector3, n, samples);
}

inline double jacobian_defect_of(const spectral::SpectralField& disp) {
  std::int64_t n3 = disp.modes();
  std::array<std::vector<double>, 9> dd;
  for (int a = 0; a < 3; ++a) {
    spectral::SpectralField comp = spectral::component_field(disp, a);
    for (int b = 0; b < 3; ++b) dd[3 * a + b] = spectral::partial(comp, b).component_samples(0);
  }
  double worst = 0.0;
  for (std::int64_t p = 0; p < n3; ++p) {
    Mat3 g = mat3_identity();
    for (int e = 0; e < 9; ++e) g[e] += dd[e][p];
    worst = std::max(worst, std::abs(det3(g) - 1.0));
  }
  return worst;
}

inline FlowMap integrate_flow_once(const NoiseConfig& cfg, const DriverFn& driver, const FlowGrid& grid, int n,
                                   double dt_flow, int level) {
  FlowMap map;
  map.level = level;
  map.n = n;
  map.t0 = grid.t0;
  map.dt = grid.dt;
  map.noise = cfg;
  map.driver = driver;
  map.frames.reserve(grid.frames);

  Nufft plan(n);
  std::vector<Vec3> nodes = FlowMap::grid_nodes(n);
  spectral::SpectralField zero(spectral::Shape::vector3, n);

  std::vector<Vec3> fwd = nodes;
  spectral::SpectralField prev_inv = zero;
  bool prev_trivial = true;
  double prev_time = 0.0;

  for (int i = 0; i < grid.frames; ++i) {
    double t = grid.t0 + i * grid.dt;
    FlowFrame frame;
    frame.time = t;
    if (t <= 1e-12 || cfg.components() == 0) {
      frame.disp_fwd = zero;
      frame.disp_inv = zero;
    } else {
      int substeps = std::max(1, static_cast<int>(std::ceil((t - prev_time) / dt_flow - 1e-9)));
      fwd = advance_points(std::move(fwd), cfg, driver, prev_time, t, substeps);
      frame.disp_fwd = detail::displacement_field(n, nodes, fwd);
      frame.jac_defect = detail::jacobian_defect_of(frame.disp_fwd);

      std::vector<Vec3> back = retreat_points(nodes, cfg, driver, prev_time, t, substeps);
      std::int64_t n3 = static_cast<std::int64_t>(nodes.size());
      std::vector<double> samples(3 * n3);
      if (prev_trivial) {
        for (std::int64_t p = 0; p < n3; ++p)
          for (int a = 0; a < 3; ++a) samples[a * n3 + p] = back[p][a] - nodes[p][a];
      } else {
        std::vector<cplx> interp = plan.eval(prev_inv, back);
        for (std::int64_t p = 0; p < n3; ++p)
          for (int a = 0; a < 3; ++a)
            samples[a * n3 + p] = back[p][a] - nodes[p][a] + interp[a * n3 + p].real();
      }
      frame.disp_inv = spectral::SpectralField::from_samples(spectral::Shape::vector3, n, samples);
      prev_inv = frame.disp_inv;
      prev_trivial = false;
      prev_time = t;
    }
    map.frames.push_back(std::move(frame));
  }
  return map;
}

}  // namespace detail

// Integrates the characteristics of the mollified driver on the frame grid.
// If the Jacobian defect exceeds the tolerance the step size is halved once;
// a second failure is an error.
inline FlowMap integrate_flow(const NoiseConfig& cfg, const DriverFn& driver, const FlowGrid& grid, int n,
                              double dt_flow, int level = 0, double jac_tol = 1e-4) {
  if (grid.frames < 1 || grid.dt <= 0) throw seci_error("integrate_flow: bad frame grid");
  FlowMap map = detail::integrate_flow_once(cfg, driver, grid, n, dt_flow, level);
  if (map.jacobian_defect() > jac_tol) {
    map = detail::integrate_flow_once(cfg, driver, grid, n, 0.5 * dt_flow, level);
    if (map.jacobian_defect() > jac_tol)
      throw seci_error("integrate_flow: Jacobian defect persists after refinement");
  }
  return map;
}

inline FlowMap identity_flow(int n, const FlowGrid& grid, int level = 0) {
  FlowMap map;
  map.level = level;
  map.n = n;
  map.t0 = grid.t0;
  map.dt = grid.dt;
  map.noise = NoiseConfig{};
  map.driver = [](int, double, int) { return 0.0; };
  spectral::SpectralField zero(spectral::Shape::vector3, n);
  for (int i = 0; i < grid.frames; ++i)
    map.frames.push_back(FlowFrame{grid.t0 + i * grid.dt, zero, zero, 0.0});
  return map;
}

// Flow snapshot: the "SECS" container with an extra level marker, frames as
// consecutive (disp_fwd, disp_inv) field snapshots.  Only displacements are
// stored; the loaded map has no driver attached.
inline void save_flow(const std::string& path, const FlowMap& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw seci_error("cannot open " + path);
  os.write("SECS", 4);
  spectral::detail::put<std::uint32_t>(os, 1);
  spectral::detail::put<std::uint32_t>(os, std::uint32_t(map.frames.size()));
  spectral::detail::put<double>(os, map.t0);
  spectral::detail::put<double>(os, map.dt);
  spectral::detail::put<std::int32_t>(os, map.level);
  for (const FlowFrame& f : map.frames) {
    spectral::detail::put<double>(os, f.time);
    spectral::detail::put<double>(os, f.jac_defect);
    spectral::write_field(os, f.disp_fwd);
    spectral::write_field(os, f.disp_inv);
  }
}

inline FlowMap load_flow(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw seci_error("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SECS", 4) != 0) throw seci_error("bad container magic");
  if (spectral::detail::get<std::uint32_t>(is) != 1) throw seci_error("unknown container version");
  auto count = spectral::detail::get<std::uint32_t>(is);
  FlowMap map;
  map.t0 = spectral::detail::get<double>(is);
  map.dt = spectral::detail::get<double>(is);
  map.level = spectral::detail::get<std::int32_t>(is);
  map.driver = [](int, double, int) { return 0.0; };
  for (std::uint32_t i = 0; i < count; ++i) {
    FlowFrame f;
    f.time = spectral::detail::get<double>(is);
    f.jac_defect = spectral::detail::get<double>(is);
    f.disp_fwd = spectral::read_field(is);
    f.disp_inv = spectral::read_field(is);
    map.n = f.disp_fwd.n();
    map.frames.push_back(std::move(f));
  }
  return map;
}

// max over frames and nodes of |phi^{-1}(phi(x)) - x|.
inline double round_trip_error(const FlowMap& map) {
  Nufft plan(map.n);
  std::vector<Vec3> nodes = FlowMap::grid_nodes(map.n);
  double worst = 0.0;
  for (int i = 0; i < map.frame_count(); ++i) {
    if (map.identity_frame(i)) continue;
    std::vector<Vec3> pts = map.points(i);
    std::vector<cplx> dinv = plan.eval(map.frames[i].disp_inv, pts);
    std::int64_t n3 = static_cast<std::int64_t>(nodes.size());
    for (std::int64_t p = 0; p < n3; ++p)
      for (int a = 0; a < 3; ++a)
        worst = std::max(worst, std::abs(pts[p][a] + dinv[a * n3 + p].real() - nodes[p][a]));
  }
  return worst;
}

}  // namespace seci::flow
