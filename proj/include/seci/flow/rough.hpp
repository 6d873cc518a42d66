#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <vector>

#include "seci/core/common.hpp"
#include "seci/flow/noise.hpp"

namespace seci::flow {

// A path on a uniform grid together with its second-order lift
//   BB_{kl}(s,t) = int_s^t (X_k(u) - X_k(s)) dX_l(u),
// accumulated with the midpoint rule, which is the Stratonovich reading for
// the Brownian path and the trapezoid rule for smooth ones.
class LiftedPath {
 public:
  LiftedPath(std::vector<std::vector<double>> nodes, double dt) : dt_(dt), values_(std::move(nodes)) {
    int I = components();
    if (I == 0 || values_[0].empty()) throw seci_error("LiftedPath: empty path");
    int m = static_cast<int>(values_[0].size()) - 1;
    prefix_.assign(static_cast<std::size_t>(I) * I, std::vector<double>(m + 1, 0.0));
    for (int k = 0; k < I; ++k)
      for (int l = 0; l < I; ++l) {
        std::vector<double>& s = prefix_[k * I + l];
        for (int j = 0; j < m; ++j) {
          double mid = 0.5 * (values_[k][j] + values_[k][j + 1]);
          s[j + 1] = s[j] + mid * (values_[l][j + 1] - values_[l][j]);
        }
      }
  }

  int components() const { return static_cast<int>(values_.size()); }
  int steps() const { return static_cast<int>(values_[0].size()) - 1; }
  double dt() const { return dt_; }
  double horizon() const { return steps() * dt_; }

  double node(int k, int j) const { return values_[k][j]; }
  double increment(int k, int js, int jt) const { return values_[k][jt] - values_[k][js]; }

  double lift(int k, int l, int js, int jt) const {
    const std::vector<double>& s = prefix_[k * components() + l];
    return s[jt] - s[js] - values_[k][js] * increment(l, js, jt);
  }

 private:
  double dt_ = 0;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<double>> prefix_;
};

inline LiftedPath lift_brownian(const BrownianPath& path, double stop = no_stop) {
  std::vector<std::vector<double>> nodes(path.components());
  for (int k = 0; k < path.components(); ++k) {
    nodes[k].resize(path.steps() + 1);
    for (int j = 0; j <= path.steps(); ++j) nodes[k][j] = path.value_stopped(k, j * path.dt(), stop);
  }
  return LiftedPath(std::move(nodes), path.dt());
}

inline LiftedPath lift_mollified(const BrownianPath& path, const PathMollifier& moll, double stop = no_stop) {
  std::vector<std::vector<double>> nodes(path.components());
  for (int k = 0; k < path.components(); ++k) {
    nodes[k].resize(path.steps() + 1);
    for (int j = 0; j <= path.steps(); ++j) nodes[k][j] = moll.apply(path, k, j * path.dt(), 0, stop);
  }
  return LiftedPath(std::move(nodes), path.dt());
}

// Largest Chen defect BB(s,t) - BB(s,u) - BB(u,t) - dX(s,u) (x) dX(u,t) over
// grid triples s < u < t drawn from the given stride mesh.
inline double chen_defect(const LiftedPath& X, int stride = 1) {
  double worst = 0.0;
  int m = X.steps();
  for (int js = 0; js <= m; js += stride)
    for (int ju = js + stride; ju <= m; ju += stride)
      for (int jt = ju + stride; jt <= m; jt += stride)
        for (int k = 0; k < X.components(); ++k)
          for (int l = 0; l < X.components(); ++l) {
            double defect = X.lift(k, l, js, jt) - X.lift(k, l, js, ju) - X.lift(k, l, ju, jt) -
                            X.increment(k, js, ju) * X.increment(l, ju, jt);
            worst = std::max(worst, std::abs(defect));
          }
  return worst;
}

struct RoughDistance {
  double path = 0.0;  // sup |d(X-Y)(s,t)| / |t-s|^beta
  double lift = 0.0;  // sup |BB_X - BB_Y|(s,t) / |t-s|^(2 beta)
  double total() const { return std::max(path, lift); }
};

// Inhomogeneous beta-Hoelder distance evaluated over all pairs s < t of the
// stride mesh restricted to [0, t_stop].
inline RoughDistance rough_distance(const LiftedPath& X, const LiftedPath& Y, double beta, double t_stop,
                                    int stride = 1) {
  if (X.components() != Y.components() || X.steps() != Y.steps())
    throw seci_error("rough_distance: incompatible paths");
  if (t_stop > X.horizon() * (1.0 + 1e-12)) throw seci_error("rough_distance: t_stop beyond the path horizon");
  int jmax = std::min(X.steps(), static_cast<int>(std::floor(t_stop / X.dt() + 1e-9)));
  RoughDistance out;
  for (int js = 0; js < jmax; js += stride)
    for (int jt = js + stride; jt <= jmax; jt += stride) {
      double gap = (jt - js) * X.dt();
      double wp = std::pow(gap, -beta);
      double wl = wp * wp;
      for (int k = 0; k < X.components(); ++k) {
        out.path = std::max(out.path, std::abs(X.increment(k, js, jt) - Y.increment(k, js, jt)) * wp);
        for (int l = 0; l < X.components(); ++l)
          out.lift = std::max(out.lift, std::abs(X.lift(k, l, js, jt) - Y.lift(k, l, js, jt)) * wl);
      }
    }
  return out;
}

// Hoelder norms of a single lifted path on the window [0, tau], same mesh
// convention as rough_distance.
inline RoughDistance rough_norm(const LiftedPath& X, double beta, double tau, int stride = 1) {
  int jmax = std::min(X.steps(), static_cast<int>(std::floor(tau / X.dt() + 1e-9)));
  RoughDistance out;
  for (int js = 0; js < jmax; js += stride)
    for (int jt = js + stride; jt <= jmax; jt += stride) {
      double gap = (jt - js) * X.dt();
      double wp = std::pow(gap, -beta);
      double wl = wp * wp;
      for (int k = 0; k < X.components(); ++k) {
        out.path = std::max(out.path, std::abs(X.increment(k, js, jt)) * wp);
        for (int l = 0; l < X.components(); ++l)
          out.lift = std::max(out.lift, std::abs(X.lift(k, l, js, jt)) * wl);
      }
    }
  return out;
}

// First mesh time at which either window norm exceeds the threshold K; the
// reported time is the last mesh time whose window still satisfies the bound,
// so K = 0 gives 0 and K = infinity gives the horizon.
inline double stopping_time(const LiftedPath& X, double alpha, double K, int stride = 1) {
  int m = X.steps();
  double best = 0.0;
  for (int jt = stride; jt <= m; jt += stride) {
    double pathn = 0.0;
    double liftn = 0.0;
    for (int js = 0; js < jt; js += stride) {
      double gap = (jt - js) * X.dt();
      double wp = std::pow(gap, -alpha);
      double wl = wp * wp;
      for (int k = 0; k < X.components(); ++k) {
        pathn = std::max(pathn, std::abs(X.increment(k, js, jt)) * wp);
        for (int l = 0; l < X.components(); ++l) liftn = std::max(liftn, std::abs(X.lift(k, l, js, jt)) * wl);
      }
    }
    if (std::max(pathn, liftn) > K) return best;
    best = jt * X.dt();
  }
  return X.horizon();
}

// Smallest K0 (to the given bisection tolerance) such that the fraction of
// pilot seeds whose level-one stopping time reaches the horizon is at least
// kappa.  The seed set is fixed, so the answer is deterministic.
inline double calibrate_K0(const NoiseConfig& cfg, double kappa, int n_seeds, int stride = 4,
                           std::uint64_t seed0 = 9000) {
  std::vector<LiftedPath> lifts;
  lifts.reserve(n_seeds);
  for (int s = 0; s < n_seeds; ++s)
    lifts.push_back(lift_brownian(BrownianPath(std::max(1, cfg.components()), seed0 + s, cfg.horizon, cfg.dt_path)));
  auto fraction_surviving = [&](double K) {
    int good = 0;
    for (const LiftedPath& X : lifts)
      if (stopping_time(X, cfg.alpha, K, stride) >= cfg.horizon - 1e-12) ++good;
    return double(good) / n_seeds;
  };
  double lo = 0.0;
  double hi = 1.0;
  while (fraction_surviving(hi) < kappa) {
    hi *= 2.0;
    if (hi > 1e6) throw seci_error("calibrate_K0: threshold search diverged");
  }
  for (int it = 0; it < 40 && hi - lo > 1e-3 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (fraction_surviving(mid) >= kappa ? hi : lo) = mid;
  }
  return hi;
}

// Bundle used by the iteration: one Brownian path, its lift, the per level
// mollified drivers B_n, and stopping times for thresholds K_L = K0 * L.
class RoughDriver {
 public:
  struct Config {
    NoiseConfig noise;
    std::vector<double> varsigma;  // one entry per level n = 0, 1, ...
    double K0 = 1.0;
    int mesh_stride = 4;
  };

  explicit RoughDriver(Config cfg) : cfg_(std::move(cfg)), path_(make_path(cfg_.noise)), lift_(lift_brownian(path_)) {
    cfg_.noise.validate();
    for (double vs : cfg_.varsigma)
      mollifiers_.emplace_back(vs, cfg_.noise.dt_path);
    level_stop_.assign(std::max<std::size_t>(1, cfg_.varsigma.size()), cfg_.noise.horizon);
  }

  const NoiseConfig& noise() const { return cfg_.noise; }
  const BrownianPath& path() const { return path_; }
  const LiftedPath& lift() const { return lift_; }
  int levels() const { return static_cast<int>(mollifiers_.size()); }
  double varsigma(int level) const { return mollifiers_.at(level).varsigma(); }

  double b(int k, double t) const { return path_.value(k, t); }

  // Mollified driver of level n, stopped at that level's stopping time.
  double bn(int level, int k, double t, int d = 0) const {
    return mollifiers_.at(level).apply(path_, k, t, d, level_stop_.at(level));
  }

  double stopping_time_for(int L) const {
    if (L <= 0) return 0.0;
    return flow::stopping_time(lift_, cfg_.noise.alpha, cfg_.K0 * L, cfg_.mesh_stride);
  }

  void set_level_stop(int level, double t) { level_stop_.at(level) = t; }
  double level_stop(int level) const { return level_stop_.at(level); }

  LiftedPath lift_n(int level) const {
    return lift_mollified(path_, mollifiers_.at(level), level_stop_.at(level));
  }

 private:
  static BrownianPath make_path(const NoiseConfig& noise) {
    return BrownianPath(std::max(1, noise.components()), noise.seed, noise.horizon, noise.dt_path);
  }

  Config cfg_;
  BrownianPath path_;
  LiftedPath lift_;
  std::vector<PathMollifier> mollifiers_;
  std::vector<double> level_stop_;
};

// Text dump of the raw and mollified drivers on a uniform output grid.
inline void dump_path_csv(std::ostream& os, const RoughDriver& driver, double dt_out) {
  int I = driver.path().components();
  os << "t";
  for (int k = 0; k < I; ++k) os << ",b" << k;
  for (int n = 0; n < driver.levels(); ++n)
    for (int k = 0; k < I; ++k) os << ",bn" << n << "_" << k;
  os << "\n";
  int rows = static_cast<int>(std::floor(driver.path().horizon() / dt_out + 1e-9));
  os.precision(17);
  for (int j = 0; j <= rows; ++j) {
    double t = j * dt_out;
    os << t;
    for (int k = 0; k < I; ++k) os << "," << driver.b(k, t);
    for (int n = 0; n < driver.levels(); ++n)
      for (int k = 0; k < I; ++k) os << "," << driver.bn(n, k, t);
    os << "\n";
  }
}

}  // namespace seci::flow
