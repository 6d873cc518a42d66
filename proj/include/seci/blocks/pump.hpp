#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "seci/core/common.hpp"

namespace seci::blocks {

// Inputs for the energy pumping construction. e_profile is the target kinetic
// energy e(t); v_ell_energy is the measured space integral of |v_ell|^2 at
// time t. Derivatives and the C^2 norm of the pumping target are estimated by
// finite differences on [t_lo, t_stop] with step dt_sample.
struct PumpConfig {
  std::function<double(double)> e_profile;
  std::function<double(double)> v_ell_energy;
  double delta_next = 0.0;
  double eta = 0.0;
  double r0 = 0.0;
  double t_stop = 0.0;
  double t_lo = 0.0;
  double dt_sample = 1.0 / 128.0;
};

// Pumping target, its glued extension gamma, and the pointwise rho algebra.
// gamma(t) equals the target for t <= t_stop; afterwards it follows
// etil(t_stop) (1 + F((f - etil(t_stop)) / ||etil||_C2) / 2) with
// F = (2/pi) arctan and f the quadratic matching value and two derivatives,
// which keeps gamma twice differentiable and inside
// [etil(t_stop)/2, 3 etil(t_stop)/2].
class PumpState {
 public:
  explicit PumpState(PumpConfig cfg) : cfg_(std::move(cfg)) {
    if (!cfg_.e_profile || !cfg_.v_ell_energy)
      throw seci_error("energy_pump: missing energy callables");
    if (!(cfg_.eta > 0.0) || !(cfg_.eta < 1.0))
      throw seci_error("energy_pump: eta must lie in (0,1)");
    if (!(cfg_.r0 > 0.0)) throw seci_error("energy_pump: r0 must be positive");
    if (!(cfg_.delta_next > 0.0))
      throw seci_error("energy_pump: delta_next must be positive");
    if (!(cfg_.dt_sample > 0.0))
      throw seci_error("energy_pump: dt_sample must be positive");
    if (cfg_.t_stop < cfg_.t_lo + 6.0 * cfg_.dt_sample)
      throw seci_error("energy_pump: sampling window too short");
    build();
  }

  double e_tilde(double t) const {
    return (cfg_.e_profile(t) * (1.0 - cfg_.delta_next) - cfg_.v_ell_energy(t)) /
           (3.0 * torus_volume);
  }

  double gamma(double t) const {
    if (t <= cfg_.t_stop) return e_tilde(t);
    double s = t - cfg_.t_stop;
    double f = etil_stop_ + fp_ * s + 0.5 * fpp_ * s * s;
    double F = (2.0 / pi) * std::atan((f - etil_stop_) / c2_norm_);
    return etil_stop_ * (1.0 + 0.5 * F);
  }

  double t_stop() const { return cfg_.t_stop; }
  double eta() const { return cfg_.eta; }
  double r0() const { return cfg_.r0; }
  double delta_next() const { return cfg_.delta_next; }
  double c2_norm() const { return c2_norm_; }
  double e_tilde_at_stop() const { return etil_stop_; }

 private:
  void build() {
    const double h = cfg_.dt_sample;
    int count = int(std::floor((cfg_.t_stop - cfg_.t_lo) / h)) + 1;
    std::vector<double> ts(count), vals(count);
    for (int i = 0; i < count; ++i) {
      ts[i] = cfg_.t_stop - (count - 1 - i) * h;
      vals[i] = e_tilde(ts[i]);
      if (vals[i] <= 0.0)
        throw seci_error("energy_pump: pumping target nonpositive before the stopping time");
    }
    etil_stop_ = vals[count - 1];

    auto at = [&](int back) { return vals[count - 1 - back]; };
    d1_ = (25.0 * at(0) - 48.0 * at(1) + 36.0 * at(2) - 16.0 * at(3) + 3.0 * at(4)) /
          (12.0 * h);
    d2_ = (45.0 * at(0) - 154.0 * at(1) + 214.0 * at(2) - 156.0 * at(3) +
           61.0 * at(4) - 10.0 * at(5)) /
          (12.0 * h * h);

    double sup0 = 0.0, sup1 = 0.0, sup2 = 0.0;
    for (int i = 0; i < count; ++i) {
      sup0 = std::max(sup0, std::abs(vals[i]));
      if (i > 0 && i + 1 < count) {
        sup1 = std::max(sup1, std::abs((vals[i + 1] - vals[i - 1]) / (2.0 * h)));
        sup2 = std::max(sup2,
                        std::abs((vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / (h * h)));
      }
    }
    c2_norm_ = sup0 + sup1 + sup2;
    if (!(c2_norm_ > 0.0)) throw seci_error("energy_pump: degenerate pumping target");

    fp_ = pi * c2_norm_ * d1_ / etil_stop_;
    fpp_ = pi * c2_norm_ * d2_ / etil_stop_;
  }

  PumpConfig cfg_;
  double etil_stop_ = 0.0;
  double d1_ = 0.0;
  double d2_ = 0.0;
  double c2_norm_ = 0.0;
  double fp_ = 0.0;
  double fpp_ = 0.0;
};

inline PumpState energy_pump(PumpConfig cfg) { return PumpState(std::move(cfg)); }

// eta default from the two constraints eta <= r0 e_lo / 40 and
// eta <= e_lo / (8 C (sqrt(e_hi) + 1)), capped inside (0,1).
inline double eta_default(double r0, double e_lo, double e_hi, double c_moll) {
  double a = r0 * e_lo / 40.0;
  double b = e_lo / (8.0 * c_moll * (std::sqrt(e_hi) + 1.0));
  return std::min({0.99, a, b});
}

// Frobenius magnitude per node of a symmat3 sample block laid out
// component-major with packing (00, 01, 02, 11, 12, 22).
inline std::vector<double> sym_frobenius_samples(const std::vector<double>& r,
                                                 std::int64_t n3) {
  if (std::int64_t(r.size()) != 6 * n3)
    throw seci_error("sym_frobenius_samples: bad sample count");
  std::vector<double> out(n3);
  for (std::int64_t i = 0; i < n3; ++i) {
    double d = r[0 * n3 + i] * r[0 * n3 + i] + r[3 * n3 + i] * r[3 * n3 + i] +
               r[5 * n3 + i] * r[5 * n3 + i];
    double o = r[1 * n3 + i] * r[1 * n3 + i] + r[2 * n3 + i] * r[2 * n3 + i] +
               r[4 * n3 + i] * r[4 * n3 + i];
    out[i] = std::sqrt(d + 2.0 * o);
  }
  return out;
}

// rho_tilde = (2/r0) sqrt(eta^2 delta^2 + |R|^2) pointwise.
inline std::vector<double> rho_tilde_samples(const std::vector<double>& r_sym,
                                             std::int64_t n3, double eta,
                                             double delta_next, double r0) {
  std::vector<double> mag = sym_frobenius_samples(r_sym, n3);
  double floor2 = eta * eta * delta_next * delta_next;
  for (double& v : mag) v = (2.0 / r0) * std::sqrt(floor2 + v * v);
  return mag;
}

// rho_ell = rho_tilde + gamma_n(t) pointwise.
inline std::vector<double> rho_samples(std::vector<double> rho_tilde, double gamma_t) {
  for (double& v : rho_tilde) v += gamma_t;
  return rho_tilde;
}

// R_ell = rho Id - R pointwise, same packing as the input.
inline std::vector<double> R_ell_samples(const std::vector<double>& rho,
                                         const std::vector<double>& r_sym) {
  std::int64_t n3 = std::int64_t(rho.size());
  if (std::int64_t(r_sym.size()) != 6 * n3)
    throw seci_error("R_ell_samples: bad sample count");
  std::vector<double> out(6 * n3);
  const int diag[3] = {0, 3, 5};
  for (int c = 0; c < 6; ++c)
    for (std::int64_t i = 0; i < n3; ++i) out[c * n3 + i] = -r_sym[c * n3 + i];
  for (int d : diag)
    for (std::int64_t i = 0; i < n3; ++i) out[d * n3 + i] += rho[i];
  return out;
}

// max over nodes of |Id - R_ell/rho|_F = |R|_F / rho; the pump keeps this
// below r0/2.
inline double ball_defect(const std::vector<double>& rho,
                          const std::vector<double>& r_sym) {
  std::int64_t n3 = std::int64_t(rho.size());
  std::vector<double> mag = sym_frobenius_samples(r_sym, n3);
  double worst = 0.0;
  for (std::int64_t i = 0; i < n3; ++i) worst = std::max(worst, mag[i] / rho[i]);
  return worst;
}

}  // namespace seci::blocks
