#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "seci/spectral/norms.hpp"
#include "test_util.hpp"

using namespace seci;
using namespace seci::spectral;
using testutil::random_field;

namespace {

const double inf = std::numeric_limits<double>::infinity();

SpectralField sine_x1(int N) {
  std::vector<double> s(std::int64_t(N) * N * N);
  for (int i1 = 0; i1 < N; ++i1)
    for (int i2 = 0; i2 < N; ++i2)
      for (int i3 = 0; i3 < N; ++i3)
        s[(std::int64_t(i1) * N + i2) * N + i3] = std::sin(two_pi * i1 / N);
  return SpectralField::from_samples(Shape::scalar, N, s);
}

}  // namespace

TEST_CASE("constant fields have zero seminorms") {
  SpectralField f(Shape::scalar, 16);
  f.set_coeff(0, {0, 0, 0}, cplx{3.0, 0.0});
  NormReport h = holder_norm(f, 0.5);
  CHECK(h.holder_seminorm == 0.0);
  CHECK(h.sup_norm == Catch::Approx(3.0));
  SpectralField f0 = f;
  f0.subtract_mean();
  CHECK(besov_norm(f0, 0.5, inf, inf).besov_value == 0.0);
  NormReport h2 = holder_norm(f, 2.5);
  CHECK(h2.holder_seminorm == 0.0);
  CHECK(h2.holder_value == Catch::Approx(3.0));
}

TEST_CASE("sin x1 estimates dominate the separation-pi quotient") {
  const int N = 32;
  SpectralField f = sine_x1(N);
  NormReport h = holder_norm(f, 0.5);
  double oracle = 0.0;
  for (int i = 0; i < N; ++i) {
    double x = two_pi * i / N;
    oracle = std::max(oracle, std::abs(std::sin(x + pi) - std::sin(x)) / std::sqrt(pi));
  }
  CHECK(oracle == Catch::Approx(2.0 / std::sqrt(pi)));
  CHECK(h.holder_seminorm >= oracle - 1e-12);
  CHECK_FALSE(h.underresolved);

  NormReport b = besov_norm(f, 0.0, inf, inf);
  CHECK(b.besov_value >= 0.5);
  CHECK(b.besov_value <= 1.5);
}

TEST_CASE("besov and holder agree within a factor of 4 on band-limited fields") {
  const int N = 32;
  for (int trial = 0; trial < 20; ++trial) {
    double alpha = 0.3 + 0.02 * trial;
    SpectralField f = random_field(Shape::scalar, N, 6, 9000 + trial);
    f.subtract_mean();
    double hb = holder_norm(f, alpha).holder_value;
    double bb = besov_norm(f, alpha, inf, inf).besov_value;
    REQUIRE(hb > 0.0);
    REQUIRE(bb > 0.0);
    CHECK(bb / hb < 4.0);
    CHECK(hb / bb < 4.0);
  }
}

TEST_CASE("periodic rescaling shifts blocks exactly at p = infinity") {
  const int Nf = 8, L = 2, Ng = 32;
  const double ell = std::pow(2.0, -L);
  SpectralField f = random_field(Shape::scalar, Nf, 3, 321);
  f.subtract_mean();
  SpectralField g(Shape::scalar, Ng);
  for (std::int64_t i = 0; i < f.modes(); ++i) {
    IVec3 h = freq_of_linear(i, Nf);
    IVec3 k = {h[0] * (1 << L), h[1] * (1 << L), h[2] * (1 << L)};
    g.set_coeff(0, k, f.c(0, i) / (ell * ell * ell));
  }
  for (double alpha : {0.4, 1.0, -0.6}) {
    double a = besov_norm(g, alpha, inf, inf).besov_value;
    double b = std::pow(ell, -3.0 - alpha) * besov_norm(f, alpha, inf, inf).besov_value;
    CHECK(a == Catch::Approx(b).epsilon(1e-10));
  }
}

TEST_CASE("concentrated rescaling follows the full scaling exponent") {
  const int N = 64;
  auto bump = [](double u) {
    double s = 1.0 - u * u;
    return s > 0.0 ? std::exp(1.0 - 1.0 / s) : 0.0;
  };
  auto profile = [&](double x, double y, double z) {
    double u1 = (x - pi) / (0.8 * pi), u2 = (y - pi) / (0.8 * pi), u3 = (z - pi) / (0.8 * pi);
    return bump(u1) * bump(u2) * bump(u3) * std::cos(6.0 * x) * std::cos(5.0 * y);
  };
  auto sample_one_copy = [&](double ell) {
    std::vector<double> s(std::int64_t(N) * N * N, 0.0);
    for (int i1 = 0; i1 < N; ++i1)
      for (int i2 = 0; i2 < N; ++i2)
        for (int i3 = 0; i3 < N; ++i3) {
          double x = two_pi * i1 / N, y = two_pi * i2 / N, z = two_pi * i3 / N;
          if (x < two_pi * ell && y < two_pi * ell && z < two_pi * ell)
            s[(std::int64_t(i1) * N + i2) * N + i3] =
                profile(x / ell, y / ell, z / ell) / (ell * ell * ell);
        }
    return SpectralField::from_samples(Shape::scalar, N, s);
  };

  SpectralField f = sample_one_copy(1.0);
  f.subtract_mean();
  const double ell = 0.25;
  SpectralField fl = sample_one_copy(ell);
  fl.subtract_mean();

  for (auto [alpha, p] : {std::pair{0.5, 2.0}, std::pair{0.5, inf}, std::pair{1.0, 2.0}}) {
    double lhs = besov_norm(fl, alpha, p, inf).besov_value;
    double rhs = std::pow(ell, 3.0 / p - 3.0 - alpha) * besov_norm(f, alpha, p, inf).besov_value;
    CHECK(lhs / rhs > 0.8);
    CHECK(lhs / rhs < 1.2);
  }
}

TEST_CASE("underresolved flag fires on top-block content only") {
  const int N = 16;
  SpectralField hi(Shape::scalar, N);
  hi.set_coeff(0, {7, 3, 2}, cplx{0.0, 1.0});
  hi.symmetrize();
  CHECK(besov_norm(hi, 0.5, inf, inf).underresolved);
  SpectralField lo(Shape::scalar, N);
  lo.set_coeff(0, {1, 0, 0}, cplx{0.0, 1.0});
  lo.symmetrize();
  CHECK_FALSE(besov_norm(lo, 0.5, inf, inf).underresolved);
}

TEST_CASE("time holder quotient of a linear ramp peaks at the largest lag") {
  const int N = 8, frames = 17;
  const double dt = 0.125, beta = 0.4;
  SpectralField g = random_field(Shape::vector3, N, 2, 55);
  SpaceTimeField f;
  f.t0 = 0.0;
  f.dt = dt;
  for (int i = 0; i < frames; ++i) f.frames.push_back((i * dt) * g);
  NormReport rep = holder_time_norm(f, beta);
  double expected = std::pow((frames - 1) * dt, 1.0 - beta) * g.sup_norm();
  CHECK(rep.holder_time_value == Catch::Approx(expected).epsilon(1e-10));
}
