#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "seci/blocks/beltrami.hpp"
#include "seci/flow/flowmap.hpp"
#include "seci/flow/rough.hpp"
#include "seci/spectral/ops.hpp"
#include "test_util.hpp"

using namespace seci;
using namespace seci::blocks;
using spectral::Shape;
using spectral::SpectralField;
using testutil::max_coeff_diff;

namespace {

// Test-local Gaussian elimination, the oracle for the system's dual forms.
std::array<double, 6> gauss_solve6(std::array<std::array<double, 6>, 6> a,
                                   std::array<double, 6> b) {
  for (int col = 0; col < 6; ++col) {
    int piv = col;
    for (int r = col + 1; r < 6; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    REQUIRE(std::abs(a[piv][col]) > 1e-10);
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (int r = col + 1; r < 6; ++r) {
      double f = a[r][col] / a[col][col];
      for (int c = col; c < 6; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::array<double, 6> x{};
  for (int r = 5; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < 6; ++c) acc -= a[r][c] * x[c];
    x[r] = acc / a[r][r];
  }
  return x;
}

Mat3 oracle_M(const IVec3& k) {
  double n2 = dot(k, k);
  Mat3 m = mat3_identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[3 * i + j] -= k[i] * k[j] / n2;
  return m;
}

double frob(const Mat3& m) {
  double s = 0.0;
  for (double v : m) s += v * v;
  return std::sqrt(s);
}

Mat3 random_sym(CounterRng& rng, std::uint64_t& ctr) {
  Sym6 s{};
  for (double& v : s) v = rng.normal(ctr++);
  return mat3_of_sym6(s);
}

// Reconstruction residual R - (1/2) sum over signed k of gamma_k^2 M_k.
double reconstruction_error(const BeltramiSystem& sys, int j, const Mat3& R) {
  Sym6 g = sys.gamma(j, R);
  Mat3 acc{};
  for (int p = 0; p < 6; ++p) {
    Mat3 m = oracle_M(sys.family(j)[p].k);
    for (int c = 0; c < 9; ++c) acc[c] += g[p] * g[p] * m[c];
  }
  Mat3 diff = R;
  for (int c = 0; c < 9; ++c) diff[c] -= acc[c];
  return frob(diff);
}

std::vector<std::pair<IVec3, cplx>> conjugate_closed_coeffs(const BeltramiSystem& sys,
                                                            int families,
                                                            double amplitude,
                                                            std::uint64_t seed) {
  CounterRng rng{seed, 3};
  std::uint64_t ctr = 0;
  std::vector<std::pair<IVec3, cplx>> coeffs;
  for (int j = 0; j < families; ++j)
    for (const auto& pr : sys.family(j)) {
      cplx a = amplitude * cplx{rng.normal(ctr), rng.normal(ctr + 1)};
      ctr += 2;
      coeffs.emplace_back(pr.k, a);
      coeffs.emplace_back(negate(pr.k), std::conj(a));
    }
  return coeffs;
}

// Exactly measure-preserving shear x -> x + f(x2) e1.
flow::FlowFrame shear_frame(int n, double a1, double a2) {
  const std::int64_t n3 = std::int64_t(n) * n * n;
  std::vector<double> fwd(3 * n3, 0.0), inv(3 * n3, 0.0);
  for (int i1 = 0; i1 < n; ++i1)
    for (int i2 = 0; i2 < n; ++i2)
      for (int i3 = 0; i3 < n; ++i3) {
        double x2 = two_pi * i2 / n;
        double f = a1 * std::sin(x2) + a2 * std::cos(2.0 * x2);
        std::int64_t idx = (std::int64_t(i1) * n + i2) * n + i3;
        fwd[idx] = f;
        inv[idx] = -f;
      }
  flow::FlowFrame frame;
  frame.time = 1.0;
  frame.disp_fwd = SpectralField::from_samples(Shape::vector3, n, fwd);
  frame.disp_inv = SpectralField::from_samples(Shape::vector3, n, inv);
  frame.jac_defect = 0.0;
  return frame;
}

flow::FlowMap mild_flow(int n, double amp, std::uint64_t seed) {
  flow::NoiseConfig cfg;
  cfg.sigma = {{flow::TrigMode{{0, 0, 0}, {amp, 0, 0}, {0, 1, 0}}},
               {flow::TrigMode{{0, amp, 0}, {0, 0, 0}, {0, 0, 1}}}};
  cfg.seed = seed;
  cfg.horizon = 1.0;
  cfg.dt_path = 1.0 / 1024.0;
  flow::RoughDriver::Config dc;
  dc.noise = cfg;
  dc.varsigma = {0.125};
  flow::RoughDriver driver(dc);
  return flow::integrate_flow(cfg, flow::driver_of(driver, 0), flow::FlowGrid{0.0, 0.25, 4},
                              n, 1.0 / 128.0, 1);
}

}  // namespace

TEST_CASE("sphere 62 families are disjoint, spanning, and positive") {
  BeltramiSystem sys = BeltramiSystem::build(62);
  CHECK(sys.family_count() == 8);
  CHECK(sys.norm2() == 62);
  CHECK(sys.lambda0() == Catch::Approx(std::sqrt(62.0)).epsilon(1e-15));

  std::set<IVec3> seen;
  for (int j = 0; j < 8; ++j) {
    for (const auto& pr : sys.family(j)) {
      CHECK(dot(pr.k, pr.k) == 62.0);
      CHECK(seen.insert(pr.k).second);
      CHECK(std::abs(dot(pr.A, detail::unit_of(pr.k))) < 1e-14);
      CHECK(norm(pr.A) == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-13));
    }
    auto members = sys.signed_members(j);
    std::set<IVec3> signedset(members.begin(), members.end());
    CHECK(signedset.size() == 12);
    for (const auto& k : members) CHECK(signedset.count(negate(k)) == 1);
  }
  CHECK(seen.size() == 48);

  for (int j = 0; j < 8; ++j) {
    // dual forms against a test-local linear solve
    std::array<std::array<double, 6>, 6> basis{};
    for (int p = 0; p < 6; ++p) {
      Sym6 col = sym6_of(oracle_M(sys.family(j)[p].k));
      for (int q = 0; q < 6; ++q) basis[q][p] = col[q];
    }
    CounterRng rng{std::uint64_t(100 + j), 5};
    std::uint64_t ctr = 0;
    Mat3 R = random_sym(rng, ctr);
    auto oracle = gauss_solve6(basis, sym6_of(R));
    Sym6 got = sys.ell(j, R);
    for (int p = 0; p < 6; ++p) CHECK(got[p] == Catch::Approx(oracle[p]).margin(1e-11));

    Sym6 lid = sys.ell(j, mat3_identity());
    for (double v : lid) CHECK(v > 0.0);
    CHECK(reconstruction_error(sys, j, mat3_identity()) < 1e-12);
  }

  CHECK(sys.r0() > 0.0);

  // closed-form radius: min over dual forms of ell(Id) / |G|_F, minus 10%
  double rho = std::numeric_limits<double>::infinity();
  for (int j = 0; j < 8; ++j) {
    Sym6 lid = sys.ell(j, mat3_identity());
    for (int p = 0; p < 6; ++p) {
      // recover the functional's matrix representer entry by entry
      Mat3 g{};
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          Mat3 unit{};
          unit[3 * a + b] = unit[3 * b + a] = (a == b) ? 1.0 : 0.5;
          g[3 * a + b] = sys.ell(j, unit)[p];
        }
      double norm2 = 0.0;
      for (double v : g) norm2 += v * v;
      rho = std::min(rho, lid[p] / std::sqrt(norm2));
    }
  }
  CHECK(sys.r0() == Catch::Approx(0.9 * rho).epsilon(1e-10));

  // reconstruction of 1000 random matrices in the ball
  CounterRng rng{62, 7};
  std::uint64_t ctr = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Mat3 d = random_sym(rng, ctr);
    double scale = rng.uniform(ctr++) * sys.r0() / frob(d);
    Mat3 R = mat3_identity();
    for (int c = 0; c < 9; ++c) R[c] += scale * d[c];
    int j = trial % 8;
    CHECK(reconstruction_error(sys, j, R) < 1e-9);
  }

  // outside the ball the square roots lose positivity
  CHECK_THROWS_AS(sys.gamma(0, mat3_of_sym6(Sym6{-2, 0, 0, -2, 0, -2})), seci_error);
  CHECK(sys.gamma_sup() > 0.0);
}

TEST_CASE("small spheres, the default system, and the golden manifest") {
  BeltramiSystem s14 = BeltramiSystem::build(14);
  CHECK(s14.family_count() == 4);
  CounterRng rng{14, 9};
  std::uint64_t ctr = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Mat3 d = random_sym(rng, ctr);
    double scale = rng.uniform(ctr++) * s14.r0() / frob(d);
    Mat3 R = mat3_identity();
    for (int c = 0; c < 9; ++c) R[c] += scale * d[c];
    CHECK(reconstruction_error(s14, trial % 4, R) < 1e-9);
  }

  CHECK_THROWS_AS(BeltramiSystem::build(3), seci_error);
  CHECK_THROWS_AS(BeltramiSystem::build(7), seci_error);

  BeltramiSystem def = construct_beltrami_system();
  CHECK(def.norm2() == 1106);
  CHECK(def.family_count() == 8);
  CHECK(def.r0() > 0.0);
  CHECK(reconstruction_error(def, 3, mat3_identity()) < 1e-12);

  std::ostringstream out;
  def.write_manifest(out);
  std::ifstream golden(std::string(TESTS_GOLDEN_DIR) + "/beltrami_1106.txt");
  REQUIRE(golden.good());
  std::stringstream want;
  want << golden.rdbuf();
  CHECK(out.str() == want.str());
}

TEST_CASE("beltrami fields satisfy the flat identities") {
  BeltramiSystem sys = BeltramiSystem::build(14);
  const int n = 32;
  const int lambda = 2;

  // single pair, real coefficient
  IVec3 k0 = sys.family(0)[0].k;
  std::vector<std::pair<IVec3, cplx>> single = {{k0, cplx{0.3, 0.0}},
                                                {negate(k0), cplx{0.3, 0.0}}};
  SpectralField E1 = beltrami_field(sys, single, lambda, n);
  CHECK(spectral::divergence(E1).sup_norm() < 1e-11);

  auto coeffs = conjugate_closed_coeffs(sys, 2, 0.05, 21);
  SpectralField E = beltrami_field(sys, coeffs, lambda, n);

  double imag_worst = 0.0;
  for (const cplx& v : E.complex_samples()) imag_worst = std::max(imag_worst, std::abs(v.imag()));
  CHECK(imag_worst < 1e-13);
  CHECK(spectral::divergence(E).sup_norm() < 1e-11);

  SpectralField EE = spectral::sym_outer(E, E);
  SpectralField half_sq = spectral::trace(EE);
  for (cplx& c : half_sq.data()) c *= 0.5;
  SpectralField lhs = spectral::divergence(EE);
  lhs -= spectral::gradient(half_sq);
  double scale = spectral::divergence(EE).sup_norm() + 1.0;
  CHECK(lhs.sup_norm() < 1e-10 * scale);

  // mean of E (x) E against (1/2) sum |a_k|^2 M_k over signed modes
  Mat3 expected{};
  for (const auto& [k, a] : coeffs) {
    Mat3 m = oracle_M(k);
    for (int c = 0; c < 9; ++c) expected[c] += 0.5 * std::norm(a) * m[c];
  }
  Sym6 want = sym6_of(expected);
  for (int c = 0; c < 6; ++c)
    CHECK(std::abs(EE.coeff(c, IVec3{0, 0, 0}) - want[c]) < 1e-12);

  // validation: broken conjugacy and out-of-band modes
  CHECK_THROWS_AS(beltrami_field(sys, {{k0, cplx{1.0, 0.0}}}, lambda, n), seci_error);
  std::vector<std::pair<IVec3, cplx>> bad = {{k0, cplx{0.3, 0.2}},
                                             {negate(k0), cplx{0.3, 0.2}}};
  CHECK_THROWS_AS(beltrami_field(sys, bad, lambda, n), seci_error);
  CHECK_THROWS_AS(beltrami_field(sys, single, 0, n), seci_error);
  CHECK_THROWS_AS(beltrami_field(sys, single, 6, n), seci_error);
}

TEST_CASE("beltrami fields through a flow") {
  BeltramiSystem sys = BeltramiSystem::build(14);

  // exact measure-preserving shear: the space average survives composition
  {
    const int n = 64;
    spectral::Nufft plan(n);
    flow::FlowFrame frame = shear_frame(n, 0.35, 0.2);
    flow::FlowSlice slice(frame, plan);
    auto coeffs = conjugate_closed_coeffs(sys, 2, 0.05, 22);
    SpectralField W = beltrami_field(sys, coeffs, 2, slice, n);
    SpectralField WW = spectral::sym_outer(W, W);
    Mat3 expected{};
    for (const auto& [k, a] : coeffs) {
      Mat3 m = oracle_M(k);
      for (int c = 0; c < 9; ++c) expected[c] += 0.5 * std::norm(a) * m[c];
    }
    Sym6 want = sym6_of(expected);
    for (int c = 0; c < 6; ++c)
      CHECK(std::abs(WW.coeff(c, IVec3{0, 0, 0}) - want[c]) < 1e-8);
  }

  // conjugated Beltrami pressure identity under a Brownian flow
  {
    const int n = 32;
    flow::FlowMap map = mild_flow(n, 0.04, 5);
    spectral::Nufft plan(n);
    flow::FlowSlice slice(map.frames.back(), plan);
    auto coeffs = conjugate_closed_coeffs(sys, 2, 0.05, 23);
    SpectralField W = beltrami_field(sys, coeffs, 1, slice, n);
    SpectralField WW = spectral::sym_outer(W, W);
    SpectralField half_sq = spectral::trace(WW);
    for (cplx& c : half_sq.data()) c *= 0.5;
    SpectralField lhs = flow::div_phi(WW, slice);
    lhs -= flow::grad_phi(half_sq, slice);
    CHECK(lhs.sup_norm() < 1e-4);
    CHECK(flow::div_phi(W, slice).sup_norm() < 1e-4);
  }
}

TEST_CASE("stationary phase decay") {
  BeltramiSystem sys = BeltramiSystem::build(14);
  IVec3 k = sys.family(0)[0].k;

  // measure-preserving reduction: the composed oscillatory average equals the
  // flat Fourier coefficient
  {
    const int n = 128;
    spectral::Nufft plan(n);
    flow::FlowFrame frame = shear_frame(n, 0.25, 0.15);
    flow::FlowSlice slice(frame, plan);
    SpectralField a(Shape::scalar, n, true);
    CounterRng rng{55, 1};
    int modeidx = 0;
    for (int lam : {2, 4, 8}) {
      IVec3 m{-lam * k[0], -lam * k[1], -lam * k[2]};
      cplx c{0.2 + 0.1 * rng.uniform(modeidx), 0.1 * rng.uniform(modeidx + 1)};
      modeidx += 2;
      a.set_coeff(0, m, c);
      a.set_coeff(0, negate(m), std::conj(c));
    }
    a.set_coeff(0, IVec3{1, -2, 0}, cplx{0.05, 0.02});
    a.set_coeff(0, IVec3{-1, 2, 0}, cplx{0.05, -0.02});

    std::vector<double> a_phi = flow::compose_forward(a, slice).samples();
    std::vector<double> disp = frame.disp_fwd.samples();
    const std::int64_t n3 = std::int64_t(n) * n * n;
    for (int lam : {2, 4, 8}) {
      cplx acc{0.0, 0.0};
      for (int i1 = 0; i1 < n; ++i1)
        for (int i2 = 0; i2 < n; ++i2)
          for (int i3 = 0; i3 < n; ++i3) {
            std::int64_t idx = (std::int64_t(i1) * n + i2) * n + i3;
            double x1 = two_pi * i1 / n + disp[idx];
            double x2 = two_pi * i2 / n + disp[n3 + idx];
            double x3 = two_pi * i3 / n + disp[2 * n3 + idx];
            double ph = lam * (k[0] * x1 + k[1] * x2 + k[2] * x3);
            acc += a_phi[idx] * cplx{std::cos(ph), std::sin(ph)};
          }
      acc /= double(n3);
      cplx want = a.coeff(0, IVec3{-lam * k[0], -lam * k[1], -lam * k[2]});
      CHECK(std::abs(acc - want) < 1e-8);
    }
  }

  // Fourier decay bound |avg a e^{i lam k.x}| <= [a]_{C^r} / lam^r for a
  // factorized analytic amplitude, evaluated by 1D quadrature
  {
    const int m1d = 4096;
    auto g1 = [](double t) { return std::exp(0.7 * std::sin(t)); };
    auto g2 = [](double t) { return 1.0 + 0.4 * std::cos(t); };
    auto g3 = [](double t) { return std::exp(0.5 * std::cos(2.0 * t)); };
    auto coeff1d = [&](auto&& g, int mode) {
      cplx acc{0.0, 0.0};
      for (int i = 0; i < m1d; ++i) {
        double t = two_pi * i / m1d;
        acc += g(t) * cplx{std::cos(mode * t), -std::sin(mode * t)};
      }
      return acc / double(m1d);
    };
    // derivative sups per axis and order via banded spectral synthesis
    std::array<std::array<double, 4>, 3> dsup{};
    auto fill_dsup = [&](auto&& g, int axis) {
      const int band = 48;
      std::vector<cplx> ch(2 * band + 1);
      for (int mo = -band; mo <= band; ++mo) ch[mo + band] = coeff1d(g, mo);
      for (int d = 0; d <= 3; ++d) {
        double sup = 0.0;
        for (int i = 0; i < 512; ++i) {
          double t = two_pi * i / 512.0;
          cplx acc{0.0, 0.0};
          for (int mo = -band; mo <= band; ++mo) {
            cplx im{0.0, double(mo)};
            cplx w = ch[mo + band];
            for (int dd = 0; dd < d; ++dd) w *= im;
            acc += w * cplx{std::cos(mo * t), std::sin(mo * t)};
          }
          sup = std::max(sup, std::abs(acc));
        }
        dsup[axis][d] = sup;
      }
    };
    fill_dsup(g1, 0);
    fill_dsup(g2, 1);
    fill_dsup(g3, 2);
    auto holder_seminorm = [&](int r) {
      double worst = 0.0;
      for (int b1 = 0; b1 <= r; ++b1)
        for (int b2 = 0; b1 + b2 <= r; ++b2) {
          int b3 = r - b1 - b2;
          worst = std::max(worst, dsup[0][b1] * dsup[1][b2] * dsup[2][b3]);
        }
      return worst;
    };
    for (int lam = 2; lam <= 64; lam *= 2) {
      double mag = std::abs(coeff1d(g1, -lam * k[0])) *
                   std::abs(coeff1d(g2, -lam * k[1])) *
                   std::abs(coeff1d(g3, -lam * k[2]));
      for (int r = 1; r <= 3; ++r)
        CHECK(mag <= holder_seminorm(r) / std::pow(double(lam), r) + 1e-12);
    }
  }
}
