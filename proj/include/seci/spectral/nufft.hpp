#pragma once

#include <cmath>
#include <vector>

#include "seci/core/common.hpp"
#include "seci/core/threads.hpp"
#include "seci/spectral/fft.hpp"
#include "seci/spectral/field.hpp"

namespace seci::spectral {

// Type-2 NUFFT: evaluates a band-limited field at arbitrary points.
// Kaiser-Bessel window, oversampling 2, width 12, beta = 2.30 * width.
class Nufft {
 public:
  explicit Nufft(int n)
      : n_(n),
        m_(2 * n),
        h_(two_pi / double(m_)),
        a_(0.5 * kWidth * h_),
        i0_beta_(std::cyl_bessel_i(0.0, kBeta)) {
    if (!is_power_of_two(n)) throw seci_error("Nufft: N must be a power of two");
    deconv_.resize(std::size_t(n_));
    for (int i = 0; i < n_; ++i) deconv_[std::size_t(i)] = 1.0 / window_hat(freq_of_index(i, n_));
    // I0(beta sqrt(w)) is entire in w, so the window is a short power series
    // in w = 1 - (y/a)^2 with positive coefficients; no cancellation occurs
    // and evaluation is machine accurate.
    double term = 1.0 / i0_beta_;
    for (int k = 1; term > 1e-22; ++k) {
      series_.push_back(term);
      term *= (kBeta * kBeta / 4.0) / (double(k) * k);
    }
  }

  int n() const { return n_; }

  // Precomputed spreading stencil for a fixed point set, reusable across
  // components and fields evaluated at the same points.
  struct PointPlan {
    std::vector<int> index;     // 3 * kWidth wrapped fine-grid indices per point
    std::vector<double> weight;  // matching window weights
    std::size_t count = 0;
  };

  PointPlan prepare(const std::vector<Vec3>& points) const {
    PointPlan plan;
    plan.count = points.size();
    plan.index.resize(3 * kWidth * points.size());
    plan.weight.resize(3 * kWidth * points.size());
    parallel_for(0, std::int64_t(points.size()), [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t p = lo; p < hi; ++p) {
        for (int axis = 0; axis < 3; ++axis) {
          const double xi = points[p][axis] / h_;
          const int base = int(std::ceil(xi - 0.5 * kWidth));
          std::size_t off = std::size_t(p) * 3 * kWidth + std::size_t(axis) * kWidth;
          for (int j = 0; j < kWidth; ++j) {
            plan.index[off + j] = ((base + j) % m_ + m_) % m_;
            plan.weight[off + j] = window((xi - (base + j)) * h_);
          }
        }
      }
    });
    return plan;
  }

  // Values of one component at the given points, in point order.
  std::vector<cplx> eval_component(const SpectralField& f, int comp,
                                   const std::vector<Vec3>& points) const {
    return eval_component(f, comp, prepare(points));
  }

  std::vector<cplx> eval_component(const SpectralField& f, int comp, const PointPlan& pts) const {
    if (f.n() != n_) throw seci_error("Nufft: field resolution mismatch");
    std::vector<cplx> fine = spread_to_fine(f, comp);
    std::vector<cplx> out(pts.count);
    parallel_for(0, std::int64_t(pts.count), [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t p = lo; p < hi; ++p) out[p] = gather_prepared(fine, pts, std::size_t(p));
    });
    return out;
  }

  // All components, comp-major: result[comp * points.size() + p].
  std::vector<cplx> eval(const SpectralField& f, const std::vector<Vec3>& points) const {
    return eval(f, prepare(points));
  }

  std::vector<cplx> eval(const SpectralField& f, const PointPlan& pts) const {
    const int nc = f.components();
    std::vector<cplx> out(std::size_t(nc) * pts.count);
    for (int c = 0; c < nc; ++c) {
      std::vector<cplx> one = eval_component(f, c, pts);
      std::copy(one.begin(), one.end(), out.begin() + std::size_t(c) * pts.count);
    }
    return out;
  }

 private:
  static constexpr int kWidth = 12;
  static constexpr double kBeta = 2.30 * kWidth;

  double window_hat(int k) const {
    const double t = kBeta * kBeta - (k * a_) * (k * a_);
    const double s = std::sqrt(t);
    return (2.0 * a_ / i0_beta_) * (std::sinh(s) / s);
  }

  double window(double y) const {
    const double u = 1.0 - (y / a_) * (y / a_);
    if (u <= 0.0) return (u < -1e-12) ? 0.0 : 1.0 / i0_beta_;
    double acc = 0.0;
    for (std::size_t k = series_.size(); k-- > 0;) acc = acc * u + series_[k];
    return acc;
  }

  // Deconvolved coefficients zero-padded to the fine grid, then transformed.
  std::vector<cplx> spread_to_fine(const SpectralField& f, int comp) const {
    std::vector<cplx> fine(std::size_t(m_) * m_ * m_, cplx{0.0, 0.0});
    for (int i1 = 0; i1 < n_; ++i1)
      for (int i2 = 0; i2 < n_; ++i2)
        for (int i3 = 0; i3 < n_; ++i3) {
          const cplx c = f.c(comp, (std::int64_t(i1) * n_ + i2) * n_ + i3);
          const double d = deconv_[std::size_t(i1)] * deconv_[std::size_t(i2)] *
                           deconv_[std::size_t(i3)];
          const int j1 = (freq_of_index(i1, n_) + m_) % m_;
          const int j2 = (freq_of_index(i2, n_) + m_) % m_;
          const int j3 = (freq_of_index(i3, n_) + m_) % m_;
          fine[(std::size_t(j1) * m_ + j2) * m_ + j3] = d * c;
        }
    fft3_coeffs_to_samples(m_, fine.data());
    return fine;
  }

  cplx gather_prepared(const std::vector<cplx>& fine, const PointPlan& pts, std::size_t p) const {
    const int* idx = pts.index.data() + p * 3 * kWidth;
    const double* w = pts.weight.data() + p * 3 * kWidth;
    cplx acc{0.0, 0.0};
    for (int j1 = 0; j1 < kWidth; ++j1) {
      const std::size_t o1 = std::size_t(idx[j1]) * m_;
      for (int j2 = 0; j2 < kWidth; ++j2) {
        const std::size_t o2 = (o1 + std::size_t(idx[kWidth + j2])) * m_;
        const double w12 = w[j1] * w[kWidth + j2];
        cplx row{0.0, 0.0};
        for (int j3 = 0; j3 < kWidth; ++j3) row += w[2 * kWidth + j3] * fine[o2 + std::size_t(idx[2 * kWidth + j3])];
        acc += w12 * row;
      }
    }
    return (h_ * h_ * h_) * acc;
  }

  int n_;
  int m_;
  double h_;
  double a_;
  double i0_beta_;
  std::vector<double> deconv_;
  std::vector<double> series_;
};

}  // namespace seci::spectral
