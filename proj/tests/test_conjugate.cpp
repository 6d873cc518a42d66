#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "seci/flow/conjugate.hpp"
#include "seci/flow/flowmap.hpp"
#include "seci/flow/rough.hpp"
#include "test_util.hpp"

using namespace seci;
using namespace seci::flow;
using spectral::Shape;
using spectral::SpectralField;
using testutil::max_coeff_diff;
using testutil::random_field;

namespace {

// Parseval mass of a field, (2 pi)^-3 int |f|^2.
double mass(const SpectralField& f) {
  double acc = 0.0;
  for (const cplx& c : f.data()) acc += std::norm(c);
  return acc;
}

FlowMap mild_flow(int n, double amp, std::uint64_t seed) {
  NoiseConfig cfg;
  cfg.sigma = {{TrigMode{{0, 0, 0}, {amp, 0, 0}, {0, 1, 0}}},
               {TrigMode{{0, amp, 0}, {0, 0, 0}, {0, 0, 1}}}};
  cfg.seed = seed;
  cfg.horizon = 1.0;
  cfg.dt_path = 1.0 / 1024.0;
  RoughDriver::Config dc;
  dc.noise = cfg;
  dc.varsigma = {0.125};
  RoughDriver driver(dc);
  return integrate_flow(cfg, driver_of(driver, 0), FlowGrid{0.0, 0.25, 4}, n, 1.0 / 128.0, 1);
}

}  // namespace

TEST_CASE("identity slice reduces to the flat operators") {
  spectral::Nufft plan(16);
  FlowSlice id = FlowSlice::identity(plan);
  SpectralField v = random_field(Shape::vector3, 16, 4, 11);
  SpectralField f = random_field(Shape::scalar, 16, 4, 12);
  SpectralField S = random_field(Shape::symmat3, 16, 4, 13);

  CHECK(max_coeff_diff(compose_forward(v, id), v) == 0.0);
  CHECK(max_coeff_diff(compose_inverse(S, id), S) == 0.0);
  CHECK(max_coeff_diff(div_phi(v, id), spectral::divergence(v)) == 0.0);
  CHECK(max_coeff_diff(grad_phi(f, id), spectral::gradient(f)) == 0.0);
  CHECK(max_coeff_diff(Q_phi(v, id), spectral::leray_Q(v)) == 0.0);
  CHECK(max_coeff_diff(P_phi(v, id), spectral::leray_P(v)) == 0.0);
  CHECK(max_coeff_diff(R_phi(v, id), spectral::inverse_divergence_R(v)) == 0.0);
  CHECK(max_coeff_diff(laplace_phi_solve(f, id), spectral::inverse_laplacian(f)) == 0.0);

  // A zero-displacement frame is detected as trivial.
  FlowFrame frame;
  frame.disp_fwd = SpectralField(Shape::vector3, 16);
  frame.disp_inv = SpectralField(Shape::vector3, 16);
  FlowSlice zero(frame, plan);
  CHECK(zero.trivial());
}

TEST_CASE("composition preserves measure and inverts") {
  const int n = 32;
  FlowMap map = mild_flow(n, 0.05, 21);
  spectral::Nufft plan(n);
  FlowSlice s(map.frames[3], plan);
  REQUIRE(!s.trivial());

  SpectralField f = random_field(Shape::scalar, n, 5, 31);
  SpectralField fi = compose_inverse(f, s);
  CHECK(mass(fi) == Catch::Approx(mass(f)).epsilon(1e-6));

  SpectralField round = compose_forward(fi, s);
  double scale = f.sup_norm();
  CHECK((round - f).sup_norm() < 1e-6 * scale);
}

TEST_CASE("pointwise chain rule matches the composition sandwich") {
  const int n = 32;
  FlowMap map = mild_flow(n, 0.04, 5);
  spectral::Nufft plan(n);
  FlowSlice s(map.frames[2], plan);

  SpectralField H = random_field(Shape::symmat3, n, 4, 77);
  SpectralField lhs = div_phi(compose_forward(H, s), s);
  SpectralField rhs = compose_forward(spectral::divergence(H), s);
  double scale = rhs.sup_norm();
  CHECK((lhs - rhs).sup_norm() < 5e-5 * scale);

  SpectralField g = random_field(Shape::scalar, n, 4, 78);
  SpectralField glhs = grad_phi(compose_forward(g, s), s);
  SpectralField grhs = compose_forward(spectral::gradient(g), s);
  CHECK((glhs - grhs).sup_norm() < 5e-5 * grhs.sup_norm());
}

TEST_CASE("conjugated leray and inverse divergence") {
  const int n = 32;
  FlowMap map = mild_flow(n, 0.05, 9);
  spectral::Nufft plan(n);
  FlowSlice s(map.frames[3], plan);

  SpectralField v = random_field(Shape::vector3, n, 5, 41);
  double scale = v.sup_norm();

  SpectralField q = Q_phi(v, s);
  SpectralField p = P_phi(v, s);
  CHECK(((p + q) - v).sup_norm() < 1e-10 * scale);
  CHECK(div_phi(p, s).sup_norm() < 1e-5 * scale);

  SpectralField r = R_phi(v, s);
  SpectralField vc = v;
  for (int a = 0; a < 3; ++a) vc.set_coeff(a, {0, 0, 0}, 0.0);
  CHECK((div_phi(r, s) - vc).sup_norm() < 1e-5 * scale);
  CHECK(spectral::trace(r).sup_norm() < 1e-8 * scale);

  SpectralField curl = curl_phi(v, s);
  CHECK(Q_phi(curl, s).sup_norm() < 1e-5 * curl.sup_norm());
}

TEST_CASE("conjugated laplace solve") {
  const int n = 32;
  FlowMap map = mild_flow(n, 0.02, 14);
  spectral::Nufft plan(n);
  FlowSlice s(map.frames[2], plan);

  SpectralField f = random_field(Shape::scalar, n, 4, 55);
  f.set_coeff(0, {0, 0, 0}, 0.0);
  SpectralField u = laplace_phi_solve(f, s);
  SpectralField back = div_phi(grad_phi(u, s), s);
  back.set_coeff(0, {0, 0, 0}, back.coeff(0, {0, 0, 0}) - back.component_mean(0));
  double scale = f.sup_norm();
  CHECK((back - f).sup_norm() < 1e-4 * scale);
}
