#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "seci/core/rng.hpp"
#include "seci/spectral/field.hpp"
#include "seci/spectral/ops.hpp"

namespace seci::spectral {

struct NormReport {
  double sup_norm = 0.0;
  double holder_exponent = 0.0;
  double holder_value = 0.0;
  double holder_seminorm = 0.0;
  double holder_time_exponent = 0.0;
  double holder_time_value = 0.0;
  double besov_alpha = 0.0;
  double besov_p = std::numeric_limits<double>::infinity();
  double besov_q = std::numeric_limits<double>::infinity();
  double besov_value = 0.0;
  bool underresolved = false;
};

// |f| per grid node: absolute value, euclidean length, or Frobenius norm
inline std::vector<double> pointwise_magnitudes(const SpectralField& f) {
  std::vector<cplx> full = f.complex_samples();
  const std::int64_t n3 = f.modes();
  std::vector<double> out(n3);
  for (std::int64_t i = 0; i < n3; ++i) {
    double m2 = 0.0;
    if (f.shape() == Shape::symmat3) {
      for (int c = 0; c < 6; ++c) {
        double w = (c == 0 || c == 3 || c == 5) ? 1.0 : 2.0;
        m2 += w * std::norm(full[c * n3 + i]);
      }
    } else {
      for (int c = 0; c < f.components(); ++c) m2 += std::norm(full[c * n3 + i]);
    }
    out[i] = std::sqrt(m2);
  }
  return out;
}

namespace detail {

inline SpectralField partial_derivative(const SpectralField& f, int axis) {
  SpectralField g(f.shape(), f.n(), f.is_real());
  for (std::int64_t i = 0; i < f.modes(); ++i) {
    IVec3 k = freq_of_linear(i, f.n());
    cplx ik{0.0, double(k[axis])};
    for (int c = 0; c < f.components(); ++c) g.c(c, i) = ik * f.c(c, i);
  }
  return g;
}

// max over 512 random base nodes and 26 lattice directions of the difference
// quotient at separation `steps` grid cells, for exponent delta
inline double quotient_scan(const std::vector<std::vector<double>>& comp_samples, int N,
                            int steps, double delta) {
  CounterRng rng{7777, 3};
  const double h = two_pi / N;
  double best = 0.0;
  auto wrap = [N](int i) { return ((i % N) + N) % N; };
  for (int b = 0; b < 512; ++b) {
    int i1 = int(rng.bits(3 * b) % N);
    int i2 = int(rng.bits(3 * b + 1) % N);
    int i3 = int(rng.bits(3 * b + 2) % N);
    std::int64_t base = (std::int64_t(i1) * N + i2) * N + i3;
    for (int d1 = -1; d1 <= 1; ++d1)
      for (int d2 = -1; d2 <= 1; ++d2)
        for (int d3 = -1; d3 <= 1; ++d3) {
          if (d1 == 0 && d2 == 0 && d3 == 0) continue;
          std::int64_t other =
              (std::int64_t(wrap(i1 + d1 * steps)) * N + wrap(i2 + d2 * steps)) * N +
              wrap(i3 + d3 * steps);
          double diff2 = 0.0;
          for (const auto& s : comp_samples) {
            double d = s[other] - s[base];
            diff2 += d * d;
          }
          double dist = h * steps * std::sqrt(double(d1 * d1 + d2 * d2 + d3 * d3));
          best = std::max(best, std::sqrt(diff2) / std::pow(dist, delta));
        }
  }
  return best;
}

}  // namespace detail

// C^{m+delta} estimate: max derivative sup-norm through order m, plus the
// largest sampled difference quotient of the order-m derivatives. A grid
// estimator bounds the true norm from below.
inline NormReport holder_norm(const SpectralField& f, double exponent) {
  if (exponent <= 0.0 || exponent > 3.0) throw seci_error("holder exponent out of range");
  const int N = f.n();
  int m = int(std::floor(exponent));
  double delta = exponent - m;
  if (delta == 0.0) {
    m -= 1;
    delta = 1.0;
  }

  NormReport rep;
  rep.holder_exponent = exponent;
  rep.sup_norm = f.sup_norm();

  std::vector<SpectralField> level{f};
  double deriv_sup = rep.sup_norm;
  for (int order = 1; order <= m; ++order) {
    std::vector<SpectralField> next;
    for (const auto& g : level)
      for (int a = 0; a < 3; ++a) next.push_back(detail::partial_derivative(g, a));
    level = std::move(next);
    for (const auto& g : level) deriv_sup = std::max(deriv_sup, g.sup_norm());
  }

  std::vector<std::vector<double>> comp_samples;
  for (const auto& g : level)
    for (int c = 0; c < g.components(); ++c) comp_samples.push_back(g.component_samples(c));

  double quot = 0.0, quot_fine = 0.0, quot_next = 0.0;
  for (int steps = 1; steps <= N / 2; steps *= 2) {
    double q = detail::quotient_scan(comp_samples, N, steps, delta);
    if (steps == 1) quot_fine = q;
    if (steps == 2) quot_next = q;
    quot = std::max(quot, q);
  }
  rep.holder_seminorm = quot;
  rep.holder_value = deriv_sup + quot;
  rep.underresolved = quot_fine > 2.0 * quot_next;
  return rep;
}

inline int besov_block_of(const IVec3& k) {
  double m = std::sqrt(double(k[0]) * k[0] + double(k[1]) * k[1] + double(k[2]) * k[2]);
  if (m == 0.0) return -1;
  return int(std::floor(std::log2(m))) + 1;
}

// Littlewood-Paley block: sharp annulus 2^{j-1} <= |k| < 2^j, ball at j = -1
inline SpectralField lp_block(const SpectralField& f, int j) {
  SpectralField g(f.shape(), f.n(), f.is_real());
  for (std::int64_t i = 0; i < f.modes(); ++i) {
    if (besov_block_of(freq_of_linear(i, f.n())) != j) continue;
    for (int c = 0; c < f.components(); ++c) g.c(c, i) = f.c(c, i);
  }
  return g;
}

inline double lp_norm(const SpectralField& f, double p) {
  std::vector<double> mag = pointwise_magnitudes(f);
  if (std::isinf(p)) return *std::max_element(mag.begin(), mag.end());
  double acc = 0.0;
  for (double v : mag) acc += std::pow(v, p);
  return std::pow(acc / double(mag.size()), 1.0 / p);
}

inline NormReport besov_norm(const SpectralField& f, double alpha, double p, double q) {
  const int N = f.n();
  NormReport rep;
  rep.sup_norm = f.sup_norm();
  rep.besov_alpha = alpha;
  rep.besov_p = p;
  rep.besov_q = q;

  const int jmax = int(std::ceil(std::log2(std::sqrt(3.0) * N / 2.0)));
  const int jres = int(std::round(std::log2(double(N) / 2.0)));
  double acc = 0.0, best = 0.0;
  int best_j = -1;
  for (int j = -1; j <= jmax; ++j) {
    SpectralField blk = lp_block(f, j);
    double a = std::pow(2.0, j * alpha) * lp_norm(blk, p);
    if (std::isinf(q)) {
      if (a > best) {
        best = a;
        best_j = j;
      }
    } else {
      acc += std::pow(a, q);
    }
    if (a > 0.0 && j >= jres) rep.underresolved = true;
  }
  rep.besov_value = std::isinf(q) ? best : std::pow(acc, 1.0 / q);
  if (std::isinf(q)) rep.underresolved = rep.underresolved && best_j >= jres;
  return rep;
}

// sup over frame pairs at dyadic index separations of
// sup_x |f(t+s) - f(t)| / s^beta
inline NormReport holder_time_norm(const SpaceTimeField& f, double beta) {
  NormReport rep;
  rep.holder_time_exponent = beta;
  const int n = f.frame_count();
  for (int i = 0; i < n; ++i) rep.sup_norm = std::max(rep.sup_norm, f.frames[i].sup_norm());
  for (int sep = 1; sep < n; sep *= 2) {
    int stride = std::max(1, (n - sep) / 64);
    for (int i = 0; i + sep < n; i += stride) {
      SpectralField diff = f.frames[i + sep] - f.frames[i];
      double q = diff.sup_norm() / std::pow(sep * f.dt, beta);
      rep.holder_time_value = std::max(rep.holder_time_value, q);
    }
  }
  return rep;
}

}  // namespace seci::spectral
