#pragma once

#include "seci/spectral/field.hpp"

namespace seci::spectral {

inline SpectralField gradient(const SpectralField& f) {
  if (f.shape() != Shape::scalar) throw seci_error("gradient expects a scalar field");
  const int N = f.n();
  SpectralField g(Shape::vector3, N, f.is_real());
  const std::int64_t n3 = f.modes();
  for (std::int64_t i = 0; i < n3; ++i) {
    IVec3 k = freq_of_linear(i, N);
    cplx v = f.c(0, i);
    for (int a = 0; a < 3; ++a) g.c(a, i) = cplx{0.0, double(k[a])} * v;
  }
  return g;
}

inline SpectralField divergence(const SpectralField& F) {
  const int N = F.n();
  const std::int64_t n3 = F.modes();
  if (F.shape() == Shape::vector3) {
    SpectralField d(Shape::scalar, N, F.is_real());
    for (std::int64_t i = 0; i < n3; ++i) {
      IVec3 k = freq_of_linear(i, N);
      cplx acc{0.0, 0.0};
      for (int a = 0; a < 3; ++a) acc += cplx{0.0, double(k[a])} * F.c(a, i);
      d.c(0, i) = acc;
    }
    return d;
  }
  if (F.shape() == Shape::symmat3) {
    SpectralField d(Shape::vector3, N, F.is_real());
    for (std::int64_t i = 0; i < n3; ++i) {
      IVec3 k = freq_of_linear(i, N);
      for (int a = 0; a < 3; ++a) {
        cplx acc{0.0, 0.0};
        for (int b = 0; b < 3; ++b) acc += cplx{0.0, double(k[b])} * F.c(sym_index(a, b), i);
        d.c(a, i) = acc;
      }
    }
    return d;
  }
  throw seci_error("divergence expects a vector or matrix field");
}

inline SpectralField laplacian(const SpectralField& f) {
  const int N = f.n();
  SpectralField g(f.shape(), N, f.is_real());
  const std::int64_t n3 = f.modes();
  for (std::int64_t i = 0; i < n3; ++i) {
    IVec3 k = freq_of_linear(i, N);
    double k2 = double(k[0]) * k[0] + double(k[1]) * k[1] + double(k[2]) * k[2];
    for (int c = 0; c < f.components(); ++c) g.c(c, i) = -k2 * f.c(c, i);
  }
  return g;
}

// zero-mean solution of  laplacian(u) = f - mean(f)
inline SpectralField inverse_laplacian(const SpectralField& f) {
  const int N = f.n();
  SpectralField u(f.shape(), N, f.is_real());
  const std::int64_t n3 = f.modes();
  for (std::int64_t i = 0; i < n3; ++i) {
    IVec3 k = freq_of_linear(i, N);
    double k2 = double(k[0]) * k[0] + double(k[1]) * k[1] + double(k[2]) * k[2];
    if (k2 == 0.0) continue;
    for (int c = 0; c < f.components(); ++c) u.c(c, i) = f.c(c, i) / (-k2);
  }
  return u;
}

// Q v = grad(psi) + mean(v) with laplacian(psi) = div v;  P v = v - Q v
inline SpectralField leray_Q(const SpectralField& v) {
  if (v.shape() != Shape::vector3) throw seci_error("leray expects a vector field");
  const int N = v.n();
  SpectralField q(Shape::vector3, N, v.is_real());
  const std::int64_t n3 = v.modes();
  for (std::int64_t i = 0; i < n3; ++i) {
    IVec3 k = freq_of_linear(i, N);
    double k2 = double(k[0]) * k[0] + double(k[1]) * k[1] + double(k[2]) * k[2];
    if (k2 == 0.0) {
      for (int a = 0; a < 3; ++a) q.c(a, i) = v.c(a, i);
      continue;
    }
    cplx kv{0.0, 0.0};
    for (int a = 0; a < 3; ++a) kv += double(k[a]) * v.c(a, i);
    for (int a = 0; a < 3; ++a) q.c(a, i) = kv * double(k[a]) / k2;
  }
  return q;
}

inline SpectralField leray_P(const SpectralField& v) { return v - leray_Q(v); }

// R v = 1/4 (grad P u + (grad P u)^T) + 3/4 (grad u + (grad u)^T)
//       - 1/2 (div u) Id,  with  laplacian(u) = v - mean(v);
// symmetric, traceless, and div(R v) = v - mean(v).
inline SpectralField inverse_divergence_R(const SpectralField& v) {
  if (v.shape() != Shape::vector3) throw seci_error("inverse divergence expects a vector field");
  const int N = v.n();
  SpectralField u = inverse_laplacian(v);
  SpectralField pu = leray_P(u);
  SpectralField R(Shape::symmat3, N, v.is_real());
  const std::int64_t n3 = v.modes();
  for (std::int64_t i = 0; i < n3; ++i) {
    IVec3 k = freq_of_linear(i, N);
    cplx divu{0.0, 0.0};
    for (int a = 0; a < 3; ++a) divu += cplx{0.0, double(k[a])} * u.c(a, i);
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) {
        cplx grad_pu = cplx{0.0, double(k[a])} * pu.c(b, i) + cplx{0.0, double(k[b])} * pu.c(a, i);
        cplx grad_u = cplx{0.0, double(k[a])} * u.c(b, i) + cplx{0.0, double(k[b])} * u.c(a, i);
        cplx val = 0.25 * grad_pu + 0.75 * grad_u;
        if (a == b) val -= 0.5 * divu;
        R.c(sym_index(a, b), i) = val;
      }
  }
  return R;
}

inline SpectralField trace(const SpectralField& A) {
  if (A.shape() != Shape::symmat3) throw seci_error("trace expects a matrix field");
  SpectralField t(Shape::scalar, A.n(), A.is_real());
  const std::int64_t n3 = A.modes();
  for (std::int64_t i = 0; i < n3; ++i)
    t.c(0, i) = A.c(sym_index(0, 0), i) + A.c(sym_index(1, 1), i) + A.c(sym_index(2, 2), i);
  return t;
}

inline SpectralField component_field(const SpectralField& f, int comp) {
  SpectralField out(Shape::scalar, f.n(), f.is_real());
  const std::int64_t n3 = f.modes();
  for (std::int64_t i = 0; i < n3; ++i) out.c(0, i) = f.c(comp, i);
  return out;
}

// Spectral partial derivative along one axis, any shape.
inline SpectralField partial(const SpectralField& f, int axis) {
  SpectralField g(f.shape(), f.n(), f.is_real());
  const std::int64_t n3 = f.modes();
  for (std::int64_t i = 0; i < n3; ++i) {
    IVec3 k = freq_of_linear(i, f.n());
    cplx ik{0.0, double(k[axis])};
    for (int c = 0; c < f.components(); ++c) g.c(c, i) = ik * f.c(c, i);
  }
  return g;
}

}  // namespace seci::spectral
