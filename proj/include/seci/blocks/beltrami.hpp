#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <utility>
#include <vector>

#include "seci/core/common.hpp"
#include "seci/core/rng.hpp"
#include "seci/flow/conjugate.hpp"
#include "seci/spectral/field.hpp"

namespace seci::blocks {

// Symmetric 3x3 matrices packed as (00, 01, 02, 11, 12, 22), matching the
// component order of Shape::symmat3 fields.
using Sym6 = std::array<double, 6>;

inline Sym6 sym6_of(const Mat3& m) {
  return {m[0], m[1], m[2], m[4], m[5], m[8]};
}

inline Mat3 mat3_of_sym6(const Sym6& s) {
  return {s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5]};
}

inline double sym6_frobenius(const Sym6& s) {
  double d = s[0] * s[0] + s[3] * s[3] + s[5] * s[5];
  double o = s[1] * s[1] + s[2] * s[2] + s[4] * s[4];
  return std::sqrt(d + 2.0 * o);
}

namespace detail {

inline Vec3 unit_of(const IVec3& k) {
  double n = norm(k);
  return {k[0] / n, k[1] / n, k[2] / n};
}

// Solves a 6x6 system by Gaussian elimination with partial pivoting.
inline std::array<double, 6> solve6(std::array<double, 36> a, std::array<double, 6> b) {
  for (int col = 0; col < 6; ++col) {
    int piv = col;
    for (int r = col + 1; r < 6; ++r)
      if (std::abs(a[6 * r + col]) > std::abs(a[6 * piv + col])) piv = r;
    if (std::abs(a[6 * piv + col]) < 1e-14)
      throw seci_error("solve6: singular system");
    if (piv != col) {
      for (int c = 0; c < 6; ++c) std::swap(a[6 * piv + c], a[6 * col + c]);
      std::swap(b[piv], b[col]);
    }
    for (int r = col + 1; r < 6; ++r) {
      double f = a[6 * r + col] / a[6 * col + col];
      for (int c = col; c < 6; ++c) a[6 * r + c] -= f * a[6 * col + c];
      b[r] -= f * b[col];
    }
  }
  std::array<double, 6> x{};
  for (int r = 5; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < 6; ++c) acc -= a[6 * r + c] * x[c];
    x[r] = acc / a[6 * r + r];
  }
  return x;
}

inline double det6(std::array<double, 36> a) {
  double det = 1.0;
  for (int col = 0; col < 6; ++col) {
    int piv = col;
    for (int r = col + 1; r < 6; ++r)
      if (std::abs(a[6 * r + col]) > std::abs(a[6 * piv + col])) piv = r;
    if (piv != col) {
      for (int c = 0; c < 6; ++c) std::swap(a[6 * piv + c], a[6 * col + c]);
      det = -det;
    }
    double p = a[6 * col + col];
    if (p == 0.0) return 0.0;
    det *= p;
    for (int r = col + 1; r < 6; ++r) {
      double f = a[6 * r + col] / p;
      for (int c = col; c < 6; ++c) a[6 * r + c] -= f * a[6 * col + c];
    }
  }
  return det;
}

inline IVec3 canonical_pair_rep(const IVec3& k) {
  IVec3 n = negate(k);
  return k > n ? k : n;
}

}  // namespace detail

struct BeltramiPair {
  IVec3 k;
  Vec3 A;
};

// Pairwise disjoint six-pair families on an integer sphere, each family
// reconstructing symmetric matrices near the identity with positive weights.
// A family joins two cyclic-permutation orbits of signed triples whose
// off-diagonal sums have opposite signs, which makes the six directions a
// weighted tight frame; spanning and positivity are still verified
// numerically before a family is accepted.
class BeltramiSystem {
 public:
  static constexpr int pairs_per_family = 6;

  static BeltramiSystem build(int norm2, int max_families = 8) {
    if (norm2 < 1) throw seci_error("BeltramiSystem: sphere norm must be positive");
    BeltramiSystem sys;
    sys.norm2_ = norm2;
    sys.lambda0_ = std::sqrt(double(norm2));
    for (const auto& t : generic_triples(norm2)) {
      if (int(sys.families_.size()) >= max_families) break;
      sys.add_families_of_triple(t, max_families);
    }
    if (sys.families_.empty())
      throw seci_error("BeltramiSystem: no spanning family with positive weights on this sphere");
    sys.compute_r0();
    return sys;
  }

  int norm2() const { return norm2_; }
  double lambda0() const { return lambda0_; }
  double r0() const { return r0_; }
  int family_count() const { return int(families_.size()); }

  const std::array<BeltramiPair, 6>& family(int j) const { return families_.at(j); }

  std::array<IVec3, 12> signed_members(int j) const {
    std::array<IVec3, 12> out;
    for (int p = 0; p < 6; ++p) {
      out[2 * p] = families_.at(j)[p].k;
      out[2 * p + 1] = negate(families_.at(j)[p].k);
    }
    return out;
  }

  static Mat3 M_of(const IVec3& k) {
    Vec3 kh = detail::unit_of(k);
    Mat3 m = mat3_identity();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m[3 * i + j] -= kh[i] * kh[j];
    return m;
  }

  // Looks up the pair containing k; throws if k is not in any family.
  const BeltramiPair& pair_of(const IVec3& k, int* family_out = nullptr,
                              int* pair_out = nullptr) const {
    IVec3 rep = detail::canonical_pair_rep(k);
    for (int j = 0; j < int(families_.size()); ++j)
      for (int p = 0; p < 6; ++p)
        if (families_[j][p].k == rep) {
          if (family_out) *family_out = j;
          if (pair_out) *pair_out = p;
          return families_[j][p];
        }
    throw seci_error("BeltramiSystem: wavevector not in any family");
  }

  // E_k = A_k + i khat x A_k with A_{-k} = A_k, so E_{-k} = conj(E_k).
  std::array<cplx, 3> E_of(const IVec3& k) const {
    const BeltramiPair& pr = pair_of(k);
    Vec3 kh = detail::unit_of(k);
    Vec3 b = cross(kh, pr.A);
    return {cplx{pr.A[0], b[0]}, cplx{pr.A[1], b[1]}, cplx{pr.A[2], b[2]}};
  }

  // Coordinates of R in the family's {M_k} basis; gamma_k(R)^2 per pair, so
  // that R = (1/2) sum over signed k of gamma_k(R)^2 M_k.
  Sym6 ell(int j, const Mat3& R) const {
    const Sym6 rhs = sym6_of(R);
    const auto& inv = dual_.at(j);
    Sym6 out{};
    for (int p = 0; p < 6; ++p) {
      double acc = 0.0;
      for (int q = 0; q < 6; ++q) acc += inv[6 * p + q] * rhs[q];
      out[p] = acc;
    }
    return out;
  }

  Sym6 gamma(int j, const Mat3& R) const {
    Sym6 l = ell(j, R);
    Sym6 g{};
    for (int p = 0; p < 6; ++p) {
      if (l[p] <= 0.0)
        throw seci_error("BeltramiSystem: matrix outside the decomposition ball");
      g[p] = std::sqrt(l[p]);
    }
    return g;
  }

  // Upper bound for gamma over the closed ball of radius r0 around Id.
  double gamma_sup() const {
    double worst = 0.0;
    for (int j = 0; j < family_count(); ++j)
      for (int p = 0; p < 6; ++p)
        worst = std::max(worst, std::sqrt(ell_id_[j][p] + r0_ * dual_norm_[j][p]));
    return worst;
  }

  void write_manifest(std::ostream& os) const {
    os << std::setprecision(17);
    os << "sphere_norm2 = " << norm2_ << "\n";
    os << "lambda0 = " << lambda0_ << "\n";
    os << "r0 = " << r0_ << "\n";
    os << "families = " << families_.size() << "\n";
    for (int j = 0; j < int(families_.size()); ++j)
      for (int p = 0; p < 6; ++p) {
        const BeltramiPair& pr = families_[j][p];
        os << "family " << j << " pair " << p << " k = " << pr.k[0] << " " << pr.k[1]
           << " " << pr.k[2] << " A = " << pr.A[0] << " " << pr.A[1] << " " << pr.A[2]
           << "\n";
      }
  }

 private:
  struct Triple {
    int a, b, c;
  };

  static std::vector<Triple> generic_triples(int norm2) {
    std::vector<Triple> out;
    for (int a = 1; a * a * 3 < norm2; ++a)
      for (int b = a + 1; a * a + 2 * b * b < norm2; ++b) {
        int c2 = norm2 - a * a - b * b;
        int c = int(std::lround(std::sqrt(double(c2))));
        if (c > b && c * c == c2) out.push_back({a, b, c});
      }
    return out;
  }

  static Vec3 make_A(const IVec3& k) {
    Vec3 kh = detail::unit_of(k);
    const Vec3 refs[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (const Vec3& r : refs) {
      Vec3 proj = r - dot(r, kh) * kh;
      double n = norm(proj);
      if (n > 1e-9) return (1.0 / (n * std::sqrt(2.0))) * proj;
    }
    throw seci_error("BeltramiSystem: no reference transverse to k");
  }

  void add_families_of_triple(const Triple& t, int max_families) {
    struct Orbit {
      long long sigma;
      std::array<IVec3, 3> ks;
    };
    std::vector<Orbit> pos, neg, zero;
    const int signs[4][3] = {{1, 1, 1}, {1, 1, -1}, {1, -1, 1}, {1, -1, -1}};
    for (const auto& s : signs) {
      long long va = (long long)s[0] * t.a, vb = (long long)s[1] * t.b,
                vc = (long long)s[2] * t.c;
      long long sigma = va * vb + vb * vc + vc * va;
      auto cyc = [](long long x, long long y, long long z) {
        return std::array<IVec3, 3>{IVec3{int(x), int(y), int(z)},
                                    IVec3{int(z), int(x), int(y)},
                                    IVec3{int(y), int(z), int(x)}};
      };
      for (const auto& orb : {cyc(va, vb, vc), cyc(vb, va, vc)}) {
        Orbit o{sigma, orb};
        (sigma > 0 ? pos : sigma < 0 ? neg : zero).push_back(o);
      }
    }
    auto emit = [&](const Orbit& x, const Orbit& y) {
      if (int(families_.size()) >= max_families) return;
      std::array<BeltramiPair, 6> fam;
      for (int i = 0; i < 3; ++i) {
        fam[i] = {detail::canonical_pair_rep(x.ks[i]), Vec3{}};
        fam[3 + i] = {detail::canonical_pair_rep(y.ks[i]), Vec3{}};
      }
      for (auto& pr : fam) pr.A = make_A(pr.k);
      accept_family(fam);
    };
    for (std::size_t i = 0; i < pos.size() && i < neg.size(); ++i) emit(pos[i], neg[i]);
    for (std::size_t i = 0; i + 1 < zero.size(); i += 2) emit(zero[i], zero[i + 1]);
  }

  void accept_family(const std::array<BeltramiPair, 6>& fam) {
    std::array<double, 36> basis{};
    for (int p = 0; p < 6; ++p) {
      Sym6 col = sym6_of(M_of(fam[p].k));
      for (int q = 0; q < 6; ++q) basis[6 * q + p] = col[q];
    }
    if (std::abs(detail::det6(basis)) < 1e-10) return;
    std::array<double, 36> inv{};
    for (int q = 0; q < 6; ++q) {
      std::array<double, 6> e{};
      e[q] = 1.0;
      auto col = detail::solve6(basis, e);
      for (int p = 0; p < 6; ++p) inv[6 * p + q] = col[p];
    }
    Sym6 id = sym6_of(mat3_identity());
    Sym6 lid{};
    for (int p = 0; p < 6; ++p) {
      double acc = 0.0;
      for (int q = 0; q < 6; ++q) acc += inv[6 * p + q] * id[q];
      lid[p] = acc;
    }
    for (double v : lid)
      if (v <= 1e-6) return;
    families_.push_back(fam);
    dual_.push_back(inv);
    ell_id_.push_back(lid);
    Sym6 norms{};
    for (int p = 0; p < 6; ++p) {
      double d = inv[6 * p + 0] * inv[6 * p + 0] + inv[6 * p + 3] * inv[6 * p + 3] +
                 inv[6 * p + 5] * inv[6 * p + 5];
      double o = inv[6 * p + 1] * inv[6 * p + 1] + inv[6 * p + 2] * inv[6 * p + 2] +
                 inv[6 * p + 4] * inv[6 * p + 4];
      norms[p] = std::sqrt(d + o / 2.0);
    }
    dual_norm_.push_back(norms);
  }

  // Largest radius with all ell_k positive, probed along the exact dual
  // directions plus random symmetric ones, then shrunk by ten percent.
  void compute_r0() {
    std::vector<Sym6> dirs;
    for (int j = 0; j < family_count(); ++j)
      for (int p = 0; p < 6; ++p) {
        const auto& inv = dual_[j];
        Sym6 g = {inv[6 * p + 0], inv[6 * p + 1] / 2.0, inv[6 * p + 2] / 2.0,
                  inv[6 * p + 3], inv[6 * p + 4] / 2.0, inv[6 * p + 5]};
        double n = sym6_frobenius(g);
        for (int q = 0; q < 6; ++q) g[q] /= -n;
        dirs.push_back(g);
      }
    CounterRng rng{std::uint64_t(norm2_), 29};
    for (int s = 0; s < 512; ++s) {
      Sym6 d{};
      for (int q = 0; q < 6; ++q) d[q] = rng.normal(std::uint64_t(6 * s + q));
      double n = sym6_frobenius(d);
      for (int q = 0; q < 6; ++q) d[q] /= n;
      dirs.push_back(d);
    }
    double rho = std::numeric_limits<double>::infinity();
    for (const Sym6& d : dirs) {
      Mat3 dm = mat3_of_sym6(d);
      for (int j = 0; j < family_count(); ++j) {
        Sym6 ld = ell(j, dm);
        for (int p = 0; p < 6; ++p)
          if (ld[p] < 0.0) rho = std::min(rho, ell_id_[j][p] / (-ld[p]));
      }
    }
    if (!std::isfinite(rho)) throw seci_error("BeltramiSystem: unbounded decomposition ball");
    r0_ = 0.9 * rho;
  }

  int norm2_ = 0;
  double lambda0_ = 0.0;
  double r0_ = 0.0;
  std::vector<std::array<BeltramiPair, 6>> families_;
  std::vector<std::array<double, 36>> dual_;
  std::vector<Sym6> ell_id_;
  std::vector<Sym6> dual_norm_;
};

// Default system: eight families on the sphere |k|^2 = 1106, searching upward
// if that sphere cannot host them.
inline BeltramiSystem construct_beltrami_system() {
  for (int norm2 = 1106; norm2 < 1606; ++norm2) {
    try {
      BeltramiSystem sys = BeltramiSystem::build(norm2, 8);
      if (sys.family_count() == 8) return sys;
    } catch (const seci_error&) {
    }
  }
  throw seci_error("construct_beltrami_system: no sphere with eight families found");
}

// W(x) = sum_k a_k E_k e^{i lambda k.phi(x)} synthesized at resolution n. The
// flat overload places coefficients directly; the slice overload composes the
// flat field with the forward flow.
inline spectral::SpectralField beltrami_field(
    const BeltramiSystem& sys, const std::vector<std::pair<IVec3, cplx>>& coeffs,
    int lambda, int n) {
  using spectral::Shape;
  using spectral::SpectralField;
  if (lambda < 1) throw seci_error("beltrami_field: lambda must be a positive integer");
  for (const auto& [k, a] : coeffs) {
    bool found = false;
    for (const auto& [k2, a2] : coeffs)
      if (k2 == negate(k)) {
        if (std::abs(a2 - std::conj(a)) > 1e-12 * (1.0 + std::abs(a)))
          throw seci_error("beltrami_field: coefficient conjugacy violated");
        found = true;
        break;
      }
    if (!found) throw seci_error("beltrami_field: coefficient conjugacy violated");
  }
  SpectralField f(Shape::vector3, n, true);
  for (const auto& [k, a] : coeffs) {
    IVec3 m{lambda * k[0], lambda * k[1], lambda * k[2]};
    int width = std::max({std::abs(m[0]), std::abs(m[1]), std::abs(m[2])});
    if (width > n / 2 - 1) throw seci_error("beltrami_field: mode exceeds the grid band");
    auto E = sys.E_of(k);
    for (int c = 0; c < 3; ++c) f.set_coeff(c, m, f.coeff(c, m) + a * E[c]);
  }
  return f;
}

inline spectral::SpectralField beltrami_field(
    const BeltramiSystem& sys, const std::vector<std::pair<IVec3, cplx>>& coeffs,
    int lambda, const flow::FlowSlice& slice, int n) {
  return flow::compose_forward(beltrami_field(sys, coeffs, lambda, n), slice);
}

}  // namespace seci::blocks
