#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "seci/core/common.hpp"
#include "seci/core/rng.hpp"
#include "seci/spectral/field.hpp"
#include "seci/spectral/ops.hpp"

namespace seci::flow {

using spectral::Shape;
using spectral::SpectralField;

inline constexpr double no_stop = std::numeric_limits<double>::infinity();

// One trigonometric mode of a transport coefficient,
//   sigma(x) = a cos(m.x) + b sin(m.x),
// divergence free exactly when a.m = b.m = 0.
struct TrigMode {
  Vec3 a{0, 0, 0};
  Vec3 b{0, 0, 0};
  IVec3 m{0, 0, 0};
};

// Driver data: the coefficient fields sigma_k, one mode list per Brownian
// component, plus the sampling grid for the path itself.
struct NoiseConfig {
  std::vector<std::vector<TrigMode>> sigma;
  std::uint64_t seed = 1;
  double horizon = 1.0;
  double dt_path = 1.0 / 2048.0;
  double alpha = 0.45;

  int components() const { return static_cast<int>(sigma.size()); }

  Vec3 sigma_at(int k, const Vec3& x) const {
    Vec3 out{0, 0, 0};
    for (const TrigMode& mode : sigma[k]) {
      double phase = mode.m[0] * x[0] + mode.m[1] * x[1] + mode.m[2] * x[2];
      double cp = std::cos(phase);
      double sp = std::sin(phase);
      for (int i = 0; i < 3; ++i) out[i] += mode.a[i] * cp + mode.b[i] * sp;
    }
    return out;
  }

  // Gradient (d sigma_i / d x_j) at x, row-major.
  Mat3 sigma_grad_at(int k, const Vec3& x) const {
    Mat3 out{};
    for (const TrigMode& mode : sigma[k]) {
      double phase = mode.m[0] * x[0] + mode.m[1] * x[1] + mode.m[2] * x[2];
      double cp = std::cos(phase);
      double sp = std::sin(phase);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[3 * i + j] += (-mode.a[i] * sp + mode.b[i] * cp) * mode.m[j];
    }
    return out;
  }

  SpectralField sigma_field(int k, int n) const {
    SpectralField f(Shape::vector3, n);
    for (const TrigMode& mode : sigma[k]) {
      for (int i = 0; i < 3; ++i) {
        cplx plus = 0.5 * mode.a[i] - 0.5 * cplx(0, 1) * mode.b[i];
        f.set_coeff(i, mode.m, f.coeff(i, mode.m) + plus);
        f.set_coeff(i, negate(mode.m), f.coeff(i, negate(mode.m)) + std::conj(plus));
      }
    }
    return f;
  }

  void validate() const {
    if (dt_path <= 0) throw seci_error("NoiseConfig: dt_path must be positive");
    if (horizon <= 0) throw seci_error("NoiseConfig: horizon must be positive");
    if (!(alpha > 1.0 / 3.0 && alpha < 0.5)) throw seci_error("NoiseConfig: alpha must lie in (1/3, 1/2)");
    for (int k = 0; k < components(); ++k) {
      for (const TrigMode& mode : sigma[k]) {
        if (std::abs(dot(mode.a, Vec3{double(mode.m[0]), double(mode.m[1]), double(mode.m[2])})) > 1e-12 ||
            std::abs(dot(mode.b, Vec3{double(mode.m[0]), double(mode.m[1]), double(mode.m[2])})) > 1e-12)
          throw seci_error("NoiseConfig: sigma mode is not divergence free");
      }
      if (spectral::divergence(sigma_field(k, 16)).sup_norm() > 1e-10)
        throw seci_error("NoiseConfig: sigma field fails the divergence check");
    }
  }
};

// Brownian sample path on a uniform grid, zero for t <= 0, piecewise linear
// between nodes and frozen past the horizon.  Increments come from the
// counter generator keyed by (seed, component, step), so paths sharing a seed
// agree increment by increment.
class BrownianPath {
 public:
  BrownianPath(int components, std::uint64_t seed, double horizon, double dt_path)
      : dt_(dt_path), steps_(static_cast<int>(std::llround(horizon / dt_path))) {
    if (components < 1) throw seci_error("BrownianPath: needs at least one component");
    if (steps_ < 1 || std::abs(steps_ * dt_path - horizon) > 1e-12 * std::max(1.0, horizon))
      throw seci_error("BrownianPath: horizon must be a multiple of dt_path");
    double root_dt = std::sqrt(dt_path);
    values_.resize(components);
    for (int k = 0; k < components; ++k) {
      CounterRng rng{seed, static_cast<std::uint64_t>(k)};
      values_[k].resize(steps_ + 1);
      values_[k][0] = 0.0;
      for (int j = 0; j < steps_; ++j) values_[k][j + 1] = values_[k][j] + root_dt * rng.normal(j);
    }
  }

  BrownianPath(std::vector<std::vector<double>> increments, double dt_path) : dt_(dt_path) {
    if (increments.empty() || increments[0].empty()) throw seci_error("BrownianPath: empty increment table");
    steps_ = static_cast<int>(increments[0].size());
    values_.resize(increments.size());
    for (std::size_t k = 0; k < increments.size(); ++k) {
      if (static_cast<int>(increments[k].size()) != steps_)
        throw seci_error("BrownianPath: ragged increment table");
      values_[k].resize(steps_ + 1);
      values_[k][0] = 0.0;
      for (int j = 0; j < steps_; ++j) values_[k][j + 1] = values_[k][j] + increments[k][j];
    }
  }

  int components() const { return static_cast<int>(values_.size()); }
  double dt() const { return dt_; }
  int steps() const { return steps_; }
  double horizon() const { return steps_ * dt_; }
  const std::vector<double>& nodes(int k) const { return values_[k]; }

  double value(int k, double t) const {
    if (t <= 0) return 0.0;
    if (t >= horizon()) return values_[k][steps_];
    double u = t / dt_;
    int j = static_cast<int>(u);
    double frac = u - j;
    return values_[k][j] + frac * (values_[k][j + 1] - values_[k][j]);
  }

  double value_stopped(int k, double t, double stop) const { return value(k, std::min(t, stop)); }

 private:
  double dt_ = 0;
  int steps_ = 0;
  std::vector<std::vector<double>> values_;
};

namespace detail {

// theta(r) = 630 r^4 (1-r)^4 on [0,1] and its first two derivatives.
inline double theta_kernel(double r, int d) {
  if (r <= 0.0 || r >= 1.0) return 0.0;
  switch (d) {
    case 0: {
      double p = r * (1.0 - r);
      double p2 = p * p;
      return 630.0 * p2 * p2;
    }
    case 1: {
      double s = 1.0 - r;
      return 2520.0 * r * r * r * s * s * s * (1.0 - 2.0 * r);
    }
    default: {
      double r2 = r * r;
      return 630.0 * r2 * (12.0 + r * (-80.0 + r * (180.0 + r * (-168.0 + 56.0 * r))));
    }
  }
}

struct Gauss5 {
  static constexpr int n = 5;
  double node[5];
  double weight[5];
  Gauss5() {
    double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    node[0] = -b, node[1] = -a, node[2] = 0.0, node[3] = a, node[4] = b;
    double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
    double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
    weight[0] = wb, weight[1] = wa, weight[2] = 128.0 / 225.0, weight[3] = wa, weight[4] = wb;
  }
};

}  // namespace detail

// One-sided mollifier on (0, varsigma): B_n(t) = int theta_vs(s) B(t - s) ds,
// so B_n(t) only reads the path on [t - varsigma, t] and vanishes for t <= 0.
// Derivatives fall on the kernel; each piecewise-linear segment of the path
// is integrated against the polynomial kernel with a quadrature that is exact
// for the product, so the returned values and the finite differences of the
// returned values agree to quadrature rounding.
class PathMollifier {
 public:
  PathMollifier(double varsigma, double dt_path) : vs_(varsigma), dt_(dt_path) {
    if (varsigma < 2.0 * dt_path) throw seci_error("PathMollifier: varsigma < 2 dt_path, under-resolved");
  }

  double varsigma() const { return vs_; }

  // d-th derivative of the mollified path at t; the path is first stopped at
  // `stop` when one is supplied.
  double apply(const BrownianPath& path, int k, double t, int d = 0, double stop = no_stop) const {
    static const detail::Gauss5 gauss;
    double lo = t - vs_;
    double hi = t;
    // Breakpoints of the integrand: path grid nodes, the origin, the horizon
    // and the stopping time all create kinks in the stopped path.
    std::vector<double> cuts;
    cuts.push_back(lo);
    double first = std::ceil(lo / dt_) * dt_;
    for (double u = first; u < hi; u += dt_)
      if (u > lo) cuts.push_back(u);
    if (stop > lo && stop < hi) cuts.push_back(stop);
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());

    double scale = 1.0 / std::pow(vs_, 1 + d);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      double ua = cuts[i];
      double ub = cuts[i + 1];
      if (ub - ua < 1e-15 * vs_) continue;
      double mid = 0.5 * (ua + ub);
      double half = 0.5 * (ub - ua);
      for (int q = 0; q < detail::Gauss5::n; ++q) {
        double u = mid + half * gauss.node[q];
        double w = gauss.weight[q] * half;
        acc += w * detail::theta_kernel((t - u) / vs_, d) * path.value_stopped(k, u, stop);
      }
    }
    return acc * scale;
  }

 private:
  double vs_ = 0;
  double dt_ = 0;
};

}  // namespace seci::flow
