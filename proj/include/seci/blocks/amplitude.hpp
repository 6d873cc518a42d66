#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <utility>
#include <vector>

#include "seci/blocks/beltrami.hpp"
#include "seci/blocks/pump.hpp"
#include "seci/blocks/transport.hpp"
#include "seci/core/threads.hpp"

namespace seci::blocks {

// Node-wise amplitudes a_k = sqrt(rho) gamma_k(R_ell/rho) psi_k^(j)(v~, tau)
// for the six pair representatives of family j. Negated wavevectors carry the
// conjugate values. rho and r_sym hold samples of rho_ell and the traceless
// stress, v_tilde the advecting velocity, all on the same grid.
inline std::array<std::vector<cplx>, 6> family_amplitudes(
    const BeltramiSystem& sys, const TransportCoeffSystem& psi, int j,
    const std::vector<double>& rho, const std::vector<double>& r_sym,
    const std::array<std::vector<double>, 3>& v_tilde, double tau) {
  const std::int64_t n3 = std::int64_t(rho.size());
  if (std::int64_t(r_sym.size()) != 6 * n3 ||
      std::int64_t(v_tilde[0].size()) != n3 ||
      std::int64_t(v_tilde[1].size()) != n3 || std::int64_t(v_tilde[2].size()) != n3)
    throw seci_error("family_amplitudes: sample layouts disagree");
  const auto& fam = sys.family(j);
  std::array<std::vector<cplx>, 6> out;
  for (auto& v : out) v.assign(n3, cplx{0.0, 0.0});
  parallel_for(0, n3, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      double r = rho[i];
      Mat3 ratio = mat3_identity();
      const Sym6 s = {r_sym[0 * n3 + i], r_sym[1 * n3 + i], r_sym[2 * n3 + i],
                      r_sym[3 * n3 + i], r_sym[4 * n3 + i], r_sym[5 * n3 + i]};
      Mat3 rd = mat3_of_sym6(s);
      for (int c = 0; c < 9; ++c) ratio[c] -= rd[c] / r;
      Sym6 g = sys.gamma(j, ratio);
      Vec3 v{v_tilde[0][i], v_tilde[1][i], v_tilde[2][i]};
      auto act = psi.actives(v);
      double root = std::sqrt(r);
      for (int p = 0; p < 6; ++p)
        out[p][i] = root * g[p] * psi.psi_from(act, fam[p].k, j, tau);
    }
  });
  return out;
}

// Amplitude field for one signed wavevector; the conjugate of the pair
// representative when k is negated.
inline std::vector<cplx> amplitude_ak(const BeltramiSystem& sys,
                                      const TransportCoeffSystem& psi, const IVec3& k,
                                      const std::vector<double>& rho,
                                      const std::vector<double>& r_sym,
                                      const std::array<std::vector<double>, 3>& v_tilde,
                                      double tau) {
  int j = 0, p = 0;
  const BeltramiPair& pr = sys.pair_of(k, &j, &p);
  auto fam = family_amplitudes(sys, psi, j, rho, r_sym, v_tilde, tau);
  std::vector<cplx> a = std::move(fam[p]);
  if (!(k == pr.k))
    for (cplx& v : a) v = std::conj(v);
  return a;
}

struct UkTerm {
  IVec3 s;
  std::array<cplx, 9> U;
};

// Fourier decomposition of W (x) W in the fast phase: W ⊗ W = sum_s U_s
// e^{i s.xi} with U_s = sum_{k+k'=s} a_k a_{k'} E_k ⊗ E_{k'}. Amplitudes are
// given per signed wavevector and must be conjugate-closed; the s = 0 term is
// the geometric reconstruction of R_ell. Terms come back sorted by |s|^2 then
// lexicographically, with s = 0 first when present.
inline std::vector<UkTerm> compute_Uk(const BeltramiSystem& sys,
                                      const std::vector<std::pair<IVec3, cplx>>& amps) {
  for (const auto& [k, a] : amps) {
    bool found = false;
    for (const auto& [k2, a2] : amps)
      if (k2 == negate(k)) {
        if (std::abs(a2 - std::conj(a)) > 1e-12 * (1.0 + std::abs(a)))
          throw seci_error("compute_Uk: amplitude conjugacy violated");
        found = true;
        break;
      }
    if (!found) throw seci_error("compute_Uk: amplitude conjugacy violated");
  }
  std::map<IVec3, std::array<cplx, 9>> acc;
  for (const auto& [k1, a1] : amps) {
    auto E1 = sys.E_of(k1);
    for (const auto& [k2, a2] : amps) {
      auto E2 = sys.E_of(k2);
      IVec3 s = k1 + k2;
      auto& U = acc[s];
      cplx w = a1 * a2;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) U[3 * i + j] += w * E1[i] * E2[j];
    }
  }
  std::vector<UkTerm> out;
  out.reserve(acc.size());
  for (const auto& [s, U] : acc) out.push_back({s, U});
  std::sort(out.begin(), out.end(), [](const UkTerm& a, const UkTerm& b) {
    double na = dot(a.s, a.s), nb = dot(b.s, b.s);
    if (na != nb) return na < nb;
    return a.s < b.s;
  });
  return out;
}

}  // namespace seci::blocks
