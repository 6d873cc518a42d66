#pragma once

#include <array>
#include <cmath>
#include <complex>

#include "seci/core/common.hpp"

namespace seci::blocks {

// Lattice transport coefficients psi_k^(j)(v, tau) built from a radial bump
// partition on the velocity lattice Z^3/mu. The bump equals 1 inside radius
// c1 and decays to 0 at c2 with c1 > sqrt(3)/2, so every point is covered by
// a plateau and lattice points in the same parity class have disjoint bumps.
struct TransportCoeffSystem {
  double c1 = 0.90;
  double c2 = 0.95;
  double mu = 0.0;

  explicit TransportCoeffSystem(double mu_, double c1_ = 0.90, double c2_ = 0.95)
      : c1(c1_), c2(c2_), mu(mu_) {
    if (!(mu > 0.0)) throw seci_error("TransportCoeffSystem: mu must be positive");
    if (!(std::sqrt(3.0) / 2.0 < c1 && c1 < c2 && c2 < 1.0))
      throw seci_error("TransportCoeffSystem: need sqrt(3)/2 < c1 < c2 < 1");
  }

  static int class_of(const IVec3& l) {
    auto bit = [](int v) { return ((v % 2) + 2) % 2; };
    return bit(l[0]) + 2 * bit(l[1]) + 4 * bit(l[2]);
  }

  double bump(double r) const {
    if (r <= c1) return 1.0;
    if (r >= c2) return 0.0;
    double s = (r - c1) / (c2 - c1);
    double w = 1.0 - s * s;
    if (w < 1e-12) return 0.0;
    return std::exp(1.0 - 1.0 / w);
  }

  struct Active {
    IVec3 l;
    double alpha;
  };
  struct ActiveSet {
    std::array<Active, 8> items;
    int count = 0;
    // index into items per parity class, -1 when the class is inactive
    std::array<int, 8> by_class{-1, -1, -1, -1, -1, -1, -1, -1};
  };

  // All lattice points whose bump is positive at u = mu v, with normalized
  // weights alpha_l = bump_l / sqrt(sum bump^2). At most one point per parity
  // class can be active because same-class points are at distance >= 2 > 2c2.
  ActiveSet actives(const Vec3& v) const {
    Vec3 u{mu * v[0], mu * v[1], mu * v[2]};
    IVec3 base{int(std::lround(u[0])), int(std::lround(u[1])), int(std::lround(u[2]))};
    ActiveSet out;
    double sum2 = 0.0;
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          IVec3 l{base[0] + dx, base[1] + dy, base[2] + dz};
          double r = std::sqrt((u[0] - l[0]) * (u[0] - l[0]) +
                               (u[1] - l[1]) * (u[1] - l[1]) +
                               (u[2] - l[2]) * (u[2] - l[2]));
          double b = bump(r);
          if (b <= 0.0) continue;
          int cls = class_of(l);
          if (out.by_class[cls] >= 0)
            throw seci_error("TransportCoeffSystem: same-class bumps overlap");
          out.by_class[cls] = out.count;
          out.items[out.count++] = {l, b};
          sum2 += b * b;
        }
    if (out.count == 0)
      throw seci_error("TransportCoeffSystem: no active lattice point (covering violated)");
    double inv = 1.0 / std::sqrt(sum2);
    for (int i = 0; i < out.count; ++i) out.items[i].alpha *= inv;
    return out;
  }

  // psi_k^(j)(v, tau) = sum over active l in class j of alpha_l(mu v)
  // e^{-i k.(l/mu) tau}; zero when class j has no active point.
  cplx psi_from(const ActiveSet& act, const IVec3& k, int j, double tau) const {
    int idx = act.by_class.at(j);
    if (idx < 0) return cplx{0.0, 0.0};
    const Active& a = act.items[idx];
    double phase = -dot(k, a.l) * tau / mu;
    return a.alpha * cplx{std::cos(phase), std::sin(phase)};
  }

  cplx psi(const IVec3& k, int j, const Vec3& v, double tau) const {
    return psi_from(actives(v), k, j, tau);
  }

  cplx psi_dtau_from(const ActiveSet& act, const IVec3& k, int j, double tau) const {
    int idx = act.by_class.at(j);
    if (idx < 0) return cplx{0.0, 0.0};
    const Active& a = act.items[idx];
    double omega = -dot(k, a.l) / mu;
    double phase = omega * tau;
    return a.alpha * cplx{0.0, omega} * cplx{std::cos(phase), std::sin(phase)};
  }

  cplx psi_dtau(const IVec3& k, int j, const Vec3& v, double tau) const {
    return psi_dtau_from(actives(v), k, j, tau);
  }
};

}  // namespace seci::blocks
