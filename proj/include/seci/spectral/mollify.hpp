#pragma once

#include <cmath>
#include <vector>

#include "seci/spectral/field.hpp"

namespace seci::spectral {

// One-sided space-time mollifier: space kernel is a product of (1-u^2)^4
// bumps of radius ell, time kernel (s(1-s))^4 scaled to (0, ell) and reaching
// only into the past. Discrete weights are normalized so constants are fixed
// exactly and the time-derivative weights sum to zero exactly.
class SpaceTimeMollifier {
 public:
  SpaceTimeMollifier(int N, double ell, double dt) : n_(N), ell_(ell), dt_(dt) {
    const double h = two_pi / N;
    if (ell < 2.0 * dt || ell < 2.0 * h) throw seci_error("mollifier under-resolved");
    if (ell > pi) throw seci_error("mollifier wider than half the torus");

    auto bump = [](double u) {
      double s = 1.0 - u * u;
      return s > 0.0 ? s * s * s * s : 0.0;
    };

    std::vector<cplx> samples(std::int64_t(N) * N * N);
    double mass = 0.0;
    for (int i1 = 0; i1 < N; ++i1)
      for (int i2 = 0; i2 < N; ++i2)
        for (int i3 = 0; i3 < N; ++i3) {
          double y1 = freq_of_index(i1, N) * h, y2 = freq_of_index(i2, N) * h,
                 y3 = freq_of_index(i3, N) * h;
          double v = bump(y1 / ell) * bump(y2 / ell) * bump(y3 / ell);
          samples[(std::int64_t(i1) * N + i2) * N + i3] = cplx{v, 0.0};
          mass += v;
        }
    for (auto& v : samples) v /= mass;
    FftPlanCache::instance().execute(N, FFTW_FORWARD, samples.data());
    symbol_ = std::move(samples);

    auto chi = [](double u) {
      if (u <= 0.0 || u >= 1.0) return 0.0;
      double s = u * (1.0 - u);
      return s * s * s * s;
    };
    auto dchi = [](double u) {
      if (u <= 0.0 || u >= 1.0) return 0.0;
      double s = u * (1.0 - u);
      return 4.0 * s * s * s * (1.0 - 2.0 * u);
    };

    int taps = int(std::ceil(ell / dt)) + 1;
    w_.resize(taps);
    u_.resize(taps);
    double wsum = 0.0;
    for (int i = 0; i < taps; ++i) {
      w_[i] = chi(i * dt / ell);
      wsum += w_[i];
    }
    for (int i = 0; i < taps; ++i) {
      u_[i] = dchi(i * dt / ell) / (ell * wsum);
      w_[i] /= wsum;
    }
    double usum = 0.0;
    for (double u : u_) usum += u;
    for (auto& u : u_) u -= usum / taps;
  }

  int past_frames() const { return int(w_.size()) - 1; }
  double ell() const { return ell_; }
  const std::vector<double>& value_weights() const { return w_; }
  const std::vector<double>& dt_weights() const { return u_; }

  // value mollification at frame index (needs past_frames() history)
  SpectralField apply(const SpaceTimeField& f, int frame) const {
    return combine(f, frame, w_, true);
  }

  // time derivative of the mollified field
  SpectralField apply_dt(const SpaceTimeField& f, int frame) const {
    return combine(f, frame, u_, true);
  }

  // space-only mollification of a single field
  SpectralField apply_space(const SpectralField& f) const {
    SpectralField out = f;
    smooth(out);
    return out;
  }

 private:
  SpectralField combine(const SpaceTimeField& f, int frame, const std::vector<double>& wts,
                        bool do_space) const {
    if (frame - past_frames() < 0 || frame >= f.frame_count())
      throw seci_error("mollifier needs more history frames");
    SpectralField out(f.frames[frame].shape(), n_, f.frames[frame].is_real());
    for (int i = 0; i < int(wts.size()); ++i) {
      if (wts[i] == 0.0) continue;
      const SpectralField& src = f.frames[frame - i];
      for (std::size_t m = 0; m < out.data().size(); ++m)
        out.data()[m] += wts[i] * src.data()[m];
    }
    if (do_space) smooth(out);
    return out;
  }

  void smooth(SpectralField& g) const {
    const std::int64_t n3 = g.modes();
    for (int c = 0; c < g.components(); ++c)
      for (std::int64_t i = 0; i < n3; ++i) g.c(c, i) *= symbol_[i];
  }

  int n_;
  double ell_, dt_;
  std::vector<double> w_, u_;
  std::vector<cplx> symbol_;
};

}  // namespace seci::spectral
