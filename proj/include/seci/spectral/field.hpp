#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <utility>
#include <vector>

#include "seci/core/common.hpp"
#include "seci/core/threads.hpp"
#include "seci/spectral/fft.hpp"

namespace seci::spectral {

enum class Shape : std::uint8_t { scalar = 0, vector3 = 1, symmat3 = 2 };

inline int component_count(Shape s) {
  switch (s) {
    case Shape::scalar: return 1;
    case Shape::vector3: return 3;
    case Shape::symmat3: return 6;
  }
  throw seci_error("bad shape");
}

// symmetric 3x3 components stored as 11, 12, 13, 22, 23, 33
inline int sym_index(int i, int j) {
  static const int table[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  return table[i][j];
}

inline int freq_of_index(int i, int N) { return i < N / 2 ? i : i - N; }
inline int index_of_freq(int k, int N) { return k >= 0 ? k : k + N; }

inline IVec3 freq_of_linear(std::int64_t idx, int N) {
  int i3 = int(idx % N);
  int i2 = int((idx / N) % N);
  int i1 = int(idx / (std::int64_t(N) * N));
  return {freq_of_index(i1, N), freq_of_index(i2, N), freq_of_index(i3, N)};
}

inline std::int64_t linear_of_freq(const IVec3& k, int N) {
  return (std::int64_t(index_of_freq(k[0], N)) * N + index_of_freq(k[1], N)) * N +
         index_of_freq(k[2], N);
}

// Band-limited field on the periodic cube [0,2pi)^3, stored as Fourier
// coefficients of f(x) = sum_k c_k e^{i k.x}, k in {-N/2..N/2-1}^3,
// component-major with FFTW index order.
class SpectralField {
 public:
  SpectralField() = default;

  SpectralField(Shape shape, int N, bool is_real = true)
      : shape_(shape), n_(N), real_(is_real) {
    if (!is_power_of_two(N)) throw seci_error("resolution must be a power of two");
    coeffs_.assign(std::int64_t(component_count(shape)) * N * N * N, cplx{0.0, 0.0});
  }

  static SpectralField from_samples(Shape shape, int N, const std::vector<double>& samples) {
    SpectralField f(shape, N, true);
    const std::int64_t n3 = f.modes();
    if (std::int64_t(samples.size()) != n3 * f.components())
      throw seci_error("sample count mismatch");
    for (double v : samples)
      if (!std::isfinite(v)) throw seci_error("non-finite sample");
    for (int c = 0; c < f.components(); ++c) {
      cplx* dst = f.coeffs_.data() + c * n3;
      const double* src = samples.data() + c * n3;
      for (std::int64_t i = 0; i < n3; ++i) dst[i] = cplx{src[i], 0.0};
      fft3_samples_to_coeffs(N, dst);
    }
    f.symmetrize();
    return f;
  }

  static SpectralField from_complex_samples(Shape shape, int N, std::vector<cplx> samples) {
    SpectralField f(shape, N, false);
    const std::int64_t n3 = f.modes();
    if (std::int64_t(samples.size()) != n3 * f.components())
      throw seci_error("sample count mismatch");
    for (int c = 0; c < f.components(); ++c)
      fft3_samples_to_coeffs(N, samples.data() + c * n3);
    f.coeffs_ = std::move(samples);
    return f;
  }

  Shape shape() const { return shape_; }
  int n() const { return n_; }
  bool is_real() const { return real_; }
  void set_real(bool r) { real_ = r; }
  int components() const { return component_count(shape_); }
  std::int64_t modes() const { return std::int64_t(n_) * n_ * n_; }

  cplx& c(int comp, std::int64_t idx) { return coeffs_[comp * modes() + idx]; }
  const cplx& c(int comp, std::int64_t idx) const { return coeffs_[comp * modes() + idx]; }

  cplx coeff(int comp, const IVec3& k) const { return c(comp, linear_of_freq(k, n_)); }
  void set_coeff(int comp, const IVec3& k, cplx v) { c(comp, linear_of_freq(k, n_)) = v; }

  std::vector<cplx>& data() { return coeffs_; }
  const std::vector<cplx>& data() const { return coeffs_; }

  std::vector<cplx> complex_samples() const {
    std::vector<cplx> out = coeffs_;
    for (int c = 0; c < components(); ++c)
      fft3_coeffs_to_samples(n_, out.data() + c * modes());
    return out;
  }

  std::vector<double> samples() const {
    std::vector<cplx> full = complex_samples();
    std::vector<double> out(full.size());
    for (std::size_t i = 0; i < full.size(); ++i) out[i] = full[i].real();
    return out;
  }

  std::vector<double> component_samples(int comp) const {
    std::vector<cplx> buf(coeffs_.begin() + comp * modes(),
                          coeffs_.begin() + (comp + 1) * modes());
    fft3_coeffs_to_samples(n_, buf.data());
    std::vector<double> out(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i].real();
    return out;
  }

  // Projects onto the Hermitian-symmetric part so samples are exactly real.
  void symmetrize() {
    const std::int64_t n3 = modes();
    for (int c = 0; c < components(); ++c) {
      cplx* d = coeffs_.data() + c * n3;
      for (std::int64_t i = 0; i < n3; ++i) {
        IVec3 k = freq_of_linear(i, n_);
        IVec3 mk;
        for (int a = 0; a < 3; ++a) mk[a] = (k[a] == -n_ / 2) ? -n_ / 2 : -k[a];
        bool rep = true;
        for (int a = 0; a < 3; ++a) {
          if (k[a] < mk[a]) break;
          if (k[a] > mk[a]) {
            rep = false;
            break;
          }
        }
        std::int64_t j = linear_of_freq(mk, n_);
        if (i == j) {
          d[i] = cplx{d[i].real(), 0.0};
        } else if (rep) {
          cplx avg = 0.5 * (d[i] + std::conj(d[j]));
          d[i] = avg;
          d[j] = std::conj(avg);
        }
      }
    }
    real_ = true;
  }

  double component_mean(int comp) const { return c(comp, 0).real(); }

  void subtract_mean() {
    for (int c = 0; c < components(); ++c) this->c(c, 0) = cplx{0.0, 0.0};
  }

  // max over grid nodes of |f| (scalar), |v|_2 (vector), |A|_F (matrix)
  double sup_norm() const {
    std::vector<cplx> full = complex_samples();
    const std::int64_t n3 = modes();
    double best = 0.0;
    for (std::int64_t i = 0; i < n3; ++i) {
      double m2 = 0.0;
      if (shape_ == Shape::symmat3) {
        for (int c = 0; c < 6; ++c) {
          double w = (c == 0 || c == 3 || c == 5) ? 1.0 : 2.0;
          m2 += w * std::norm(full[c * n3 + i]);
        }
      } else {
        for (int c = 0; c < components(); ++c) m2 += std::norm(full[c * n3 + i]);
      }
      best = std::max(best, m2);
    }
    return std::sqrt(best);
  }

  // direct mode summation, the slow evaluation used as a test oracle
  cplx eval_direct(int comp, const Vec3& x) const {
    const std::int64_t n3 = modes();
    const cplx* d = coeffs_.data() + comp * n3;
    cplx acc{0.0, 0.0};
    for (std::int64_t i = 0; i < n3; ++i) {
      IVec3 k = freq_of_linear(i, n_);
      double ph = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
      acc += d[i] * cplx{std::cos(ph), std::sin(ph)};
    }
    return acc;
  }

  SpectralField& operator+=(const SpectralField& o) {
    check_same(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    real_ = real_ && o.real_;
    return *this;
  }
  SpectralField& operator-=(const SpectralField& o) {
    check_same(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
    real_ = real_ && o.real_;
    return *this;
  }
  SpectralField& operator*=(double s) {
    for (auto& v : coeffs_) v *= s;
    return *this;
  }

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double s, SpectralField f) { return f *= s; }

 private:
  void check_same(const SpectralField& o) const {
    if (shape_ != o.shape_ || n_ != o.n_) throw seci_error("field shape/size mismatch");
  }

  Shape shape_ = Shape::scalar;
  int n_ = 0;
  bool real_ = true;
  std::vector<cplx> coeffs_;
};

// zero-padded physical samples of one component on an M >= N grid
inline std::vector<cplx> padded_component_samples(const SpectralField& f, int comp, int M) {
  const int N = f.n();
  if (M < N) throw seci_error("pad target smaller than source");
  std::vector<cplx> buf(std::int64_t(M) * M * M, cplx{0.0, 0.0});
  const std::int64_t n3 = f.modes();
  for (std::int64_t i = 0; i < n3; ++i) {
    IVec3 k = freq_of_linear(i, N);
    std::int64_t j = (std::int64_t(index_of_freq(k[0], M)) * M + index_of_freq(k[1], M)) * M +
                     index_of_freq(k[2], M);
    buf[j] = f.c(comp, i);
  }
  FftPlanCache::instance().execute(M, FFTW_BACKWARD, buf.data());
  return buf;
}

// forward transform on the M grid, then truncation to the N band
inline void truncate_component(int N, int M, std::vector<cplx>& padded, SpectralField& out,
                               int comp) {
  FftPlanCache::instance().execute(M, FFTW_FORWARD, padded.data());
  const double scale = 1.0 / (double(M) * M * M);
  const std::int64_t n3 = std::int64_t(N) * N * N;
  for (std::int64_t i = 0; i < n3; ++i) {
    IVec3 k = freq_of_linear(i, N);
    std::int64_t j = (std::int64_t(index_of_freq(k[0], M)) * M + index_of_freq(k[1], M)) * M +
                     index_of_freq(k[2], M);
    out.c(comp, i) = padded[j] * scale;
  }
}

inline int dealias_grid(int N) { return 3 * N / 2; }

namespace detail {

// pointwise product machinery on the dealiased grid: each output component is
// a sum of products of one component of a and one of b
struct ProductTerm {
  int out, ca, cb;
  double weight;
};

inline SpectralField combine(const SpectralField& a, const SpectralField& b, Shape out_shape,
                             const std::vector<ProductTerm>& terms) {
  if (a.n() != b.n()) throw seci_error("field size mismatch");
  const int N = a.n();
  const int M = dealias_grid(N);
  const std::int64_t m3 = std::int64_t(M) * M * M;

  std::vector<std::vector<cplx>> pa(a.components()), pb(b.components());
  for (int c = 0; c < a.components(); ++c) pa[c] = padded_component_samples(a, c, M);
  for (int c = 0; c < b.components(); ++c) pb[c] = padded_component_samples(b, c, M);

  SpectralField out(out_shape, N, a.is_real() && b.is_real());
  std::vector<cplx> acc;
  for (int oc = 0; oc < out.components(); ++oc) {
    acc.assign(m3, cplx{0.0, 0.0});
    for (const auto& t : terms) {
      if (t.out != oc) continue;
      const cplx* xa = pa[t.ca].data();
      const cplx* xb = pb[t.cb].data();
      for (std::int64_t i = 0; i < m3; ++i) acc[i] += t.weight * xa[i] * xb[i];
    }
    truncate_component(N, M, acc, out, oc);
  }
  if (out.is_real()) out.symmetrize();
  return out;
}

}  // namespace detail

inline SpectralField product(const SpectralField& a, const SpectralField& b) {
  if (a.shape() != Shape::scalar || b.shape() != Shape::scalar)
    throw seci_error("product expects scalar fields");
  return detail::combine(a, b, Shape::scalar, {{0, 0, 0, 1.0}});
}

inline SpectralField scalar_times(const SpectralField& s, const SpectralField& f) {
  if (s.shape() != Shape::scalar) throw seci_error("scalar_times expects a scalar first");
  std::vector<detail::ProductTerm> terms;
  for (int c = 0; c < f.components(); ++c) terms.push_back({c, 0, c, 1.0});
  return detail::combine(s, f, f.shape(), terms);
}

inline SpectralField dot_product(const SpectralField& u, const SpectralField& v) {
  if (u.shape() != Shape::vector3 || v.shape() != Shape::vector3)
    throw seci_error("dot_product expects vector fields");
  return detail::combine(u, v, Shape::scalar,
                         {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}, {0, 2, 2, 1.0}});
}

// symmetric part of u (x) v
inline SpectralField sym_outer(const SpectralField& u, const SpectralField& v) {
  if (u.shape() != Shape::vector3 || v.shape() != Shape::vector3)
    throw seci_error("sym_outer expects vector fields");
  std::vector<detail::ProductTerm> terms;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      int oc = sym_index(i, j);
      terms.push_back({oc, i, j, 0.5});
      terms.push_back({oc, j, i, 0.5});
    }
  return detail::combine(u, v, Shape::symmat3, terms);
}

inline SpectralField outer_sym(const SpectralField& u) { return sym_outer(u, u); }

// A v for symmetric A
inline SpectralField matvec(const SpectralField& A, const SpectralField& v) {
  if (A.shape() != Shape::symmat3 || v.shape() != Shape::vector3)
    throw seci_error("matvec expects symmat and vector");
  std::vector<detail::ProductTerm> terms;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) terms.push_back({i, sym_index(i, j), j, 1.0});
  return detail::combine(A, v, Shape::vector3, terms);
}

// Uniformly spaced frames over [t0, t0 + (frames-1) dt].
struct SpaceTimeField {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<SpectralField> frames;

  double time(int i) const { return t0 + i * dt; }
  int frame_count() const { return int(frames.size()); }
};

}  // namespace seci::spectral
