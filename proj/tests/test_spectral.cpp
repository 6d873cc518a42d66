#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "seci/spectral/field.hpp"
#include "seci/spectral/ops.hpp"
#include "test_util.hpp"

using namespace seci;
using namespace seci::spectral;
using testutil::random_field;

namespace {

std::vector<double> sample_scalar(int N, double (*f)(double, double, double)) {
  std::vector<double> s(std::int64_t(N) * N * N);
  for (int i1 = 0; i1 < N; ++i1)
    for (int i2 = 0; i2 < N; ++i2)
      for (int i3 = 0; i3 < N; ++i3)
        s[(std::int64_t(i1) * N + i2) * N + i3] =
            f(two_pi * i1 / N, two_pi * i2 / N, two_pi * i3 / N);
  return s;
}

}  // namespace

TEST_CASE("constant field transforms to a pure DC mode") {
  const int N = 8;
  std::vector<double> ones(N * N * N, 1.0);
  SpectralField f = SpectralField::from_samples(Shape::scalar, N, ones);
  CHECK(std::abs(f.coeff(0, {0, 0, 0}) - cplx{1.0, 0.0}) < 1e-14);
  double off = 0.0;
  for (std::int64_t i = 1; i < f.modes(); ++i) off = std::max(off, std::abs(f.c(0, i)));
  CHECK(off < 1e-14);
}

TEST_CASE("sin(x1) transforms to -i/2 and +i/2 at k = (+-1,0,0)") {
  const int N = 16;
  auto s = sample_scalar(N, [](double x, double, double) { return std::sin(x); });
  SpectralField f = SpectralField::from_samples(Shape::scalar, N, s);
  CHECK(std::abs(f.coeff(0, {1, 0, 0}) - cplx{0.0, -0.5}) < 1e-14);
  CHECK(std::abs(f.coeff(0, {-1, 0, 0}) - cplx{0.0, 0.5}) < 1e-14);
  double rest = 0.0;
  for (std::int64_t i = 0; i < f.modes(); ++i) {
    IVec3 k = freq_of_linear(i, N);
    if (std::abs(k[0]) == 1 && k[1] == 0 && k[2] == 0) continue;
    rest = std::max(rest, std::abs(f.c(0, i)));
  }
  CHECK(rest < 1e-14);
}

TEST_CASE("transform agrees with the direct DFT oracle and round-trips") {
  const int N = 8;
  SpectralField f = random_field(Shape::scalar, N, 3, 991);
  std::vector<double> s = f.samples();

  SpectralField g = SpectralField::from_samples(Shape::scalar, N, s);
  CHECK(testutil::max_coeff_diff(f, g) < 1e-12);

  auto oracle = testutil::dft_oracle(N, s);
  double d = 0.0;
  for (std::int64_t i = 0; i < f.modes(); ++i) d = std::max(d, std::abs(oracle[i] - g.c(0, i)));
  CHECK(d < 1e-12);

  std::vector<double> back = g.samples();
  CHECK(testutil::max_abs_diff(s, back) < 1e-12);
}

TEST_CASE("grid samples agree with direct mode summation") {
  const int N = 8;
  SpectralField f = random_field(Shape::vector3, N, 2, 1234);
  auto s = f.samples();
  for (int c = 0; c < 3; ++c)
    for (int trial = 0; trial < 5; ++trial) {
      int i1 = (trial * 3) % N, i2 = (trial * 5) % N, i3 = (trial * 7) % N;
      Vec3 x{two_pi * i1 / N, two_pi * i2 / N, two_pi * i3 / N};
      cplx direct = f.eval_direct(c, x);
      CHECK(std::abs(direct.real() - s[c * f.modes() + testutil::grid_index(i1, i2, i3, N)]) <
            1e-12);
      CHECK(std::abs(direct.imag()) < 1e-12);
    }
}

TEST_CASE("from_samples rejects bad input") {
  CHECK_THROWS_AS(SpectralField(Shape::scalar, 12), seci_error);
  std::vector<double> s(8 * 8 * 8, 0.0);
  s[5] = std::nan("");
  CHECK_THROWS_AS(SpectralField::from_samples(Shape::scalar, 8, s), seci_error);
  CHECK_THROWS_AS(SpectralField::from_samples(Shape::vector3, 8, std::vector<double>(10)),
                  seci_error);
}

TEST_CASE("gradient of sin x1 is (cos x1, 0, 0)") {
  const int N = 16;
  auto s = sample_scalar(N, [](double x, double, double) { return std::sin(x); });
  SpectralField f = SpectralField::from_samples(Shape::scalar, N, s);
  SpectralField g = gradient(f);
  auto gs = g.samples();
  double err = 0.0;
  for (int i1 = 0; i1 < N; ++i1)
    for (int i2 = 0; i2 < N; ++i2)
      for (int i3 = 0; i3 < N; ++i3) {
        std::int64_t idx = testutil::grid_index(i1, i2, i3, N);
        err = std::max(err, std::abs(gs[idx] - std::cos(two_pi * i1 / N)));
        err = std::max(err, std::abs(gs[g.modes() + idx]));
        err = std::max(err, std::abs(gs[2 * g.modes() + idx]));
      }
  CHECK(err < 1e-13);
}

TEST_CASE("divergence of gradient equals laplacian coefficientwise") {
  const int N = 16;
  SpectralField f = random_field(Shape::scalar, N, 6, 77);
  SpectralField a = divergence(gradient(f));
  SpectralField b = laplacian(f);
  CHECK(testutil::max_coeff_diff(a, b) < 1e-12);
}

TEST_CASE("divergence matches central differences at second order") {
  auto fd_divergence = [](const SpectralField& F, int N) {
    auto s = F.samples();
    const double h = two_pi / N;
    std::vector<double> d(F.modes(), 0.0);
    for (int i1 = 0; i1 < N; ++i1)
      for (int i2 = 0; i2 < N; ++i2)
        for (int i3 = 0; i3 < N; ++i3) {
          std::int64_t idx = testutil::grid_index(i1, i2, i3, N);
          double acc = 0.0;
          acc += (s[0 * F.modes() + testutil::grid_index(i1 + 1, i2, i3, N)] -
                  s[0 * F.modes() + testutil::grid_index(i1 - 1, i2, i3, N)]);
          acc += (s[1 * F.modes() + testutil::grid_index(i1, i2 + 1, i3, N)] -
                  s[1 * F.modes() + testutil::grid_index(i1, i2 - 1, i3, N)]);
          acc += (s[2 * F.modes() + testutil::grid_index(i1, i2, i3 + 1, N)] -
                  s[2 * F.modes() + testutil::grid_index(i1, i2, i3 - 1, N)]);
          d[idx] = acc / (2.0 * h);
        }
    return d;
  };

  auto resample = [](const SpectralField& f, int M) {
    SpectralField g(f.shape(), M, true);
    for (int c = 0; c < f.components(); ++c)
      for (std::int64_t i = 0; i < f.modes(); ++i)
        g.set_coeff(c, freq_of_linear(i, f.n()), f.c(c, i));
    return g;
  };

  SpectralField coarse = random_field(Shape::vector3, 16, 4, 31);
  SpectralField fine = resample(coarse, 32);

  double err16 = 0.0, err32 = 0.0;
  {
    auto truth = divergence(coarse).samples();
    auto fd = fd_divergence(coarse, 16);
    err16 = testutil::max_abs_diff(truth, fd);
  }
  {
    auto truth = divergence(fine).samples();
    auto fd = fd_divergence(fine, 32);
    err32 = testutil::max_abs_diff(truth, fd);
  }
  CHECK(err16 / err32 > 2.5);
  CHECK(err16 / err32 < 6.0);
}

TEST_CASE("leray decomposition: P + Q = v, div P v = 0, idempotence") {
  const int N = 16;
  SpectralField v = random_field(Shape::vector3, N, 5, 404);
  SpectralField p = leray_P(v), q = leray_Q(v);
  CHECK(testutil::max_coeff_diff(p + q, v) < 1e-13);
  CHECK(divergence(p).sup_norm() < 1e-11);
  CHECK(testutil::max_coeff_diff(leray_P(p), p) < 1e-11);
  SpectralField curl_free = gradient(random_field(Shape::scalar, N, 5, 405));
  CHECK(leray_P(curl_free).sup_norm() < 1e-11);
}

TEST_CASE("inverse divergence: zero on constants, inverts div, traceless") {
  const int N = 16;

  SpectralField c(Shape::vector3, N);
  c.set_coeff(0, {0, 0, 0}, cplx{2.0, 0.0});
  c.set_coeff(1, {0, 0, 0}, cplx{-1.0, 0.0});
  CHECK(inverse_divergence_R(c).sup_norm() < 1e-14);

  auto s = sample_scalar(N, [](double, double y, double) { return std::sin(y); });
  SpectralField v(Shape::vector3, N);
  SpectralField sy = SpectralField::from_samples(Shape::scalar, N, s);
  for (std::int64_t i = 0; i < v.modes(); ++i) v.c(0, i) = sy.c(0, i);
  SpectralField R = inverse_divergence_R(v);
  CHECK(testutil::max_coeff_diff(divergence(R), v) < 1e-10);

  SpectralField w = random_field(Shape::vector3, N, 5, 808);
  SpectralField Rw = inverse_divergence_R(w);
  SpectralField w0 = w;
  w0.subtract_mean();
  CHECK(testutil::max_coeff_diff(divergence(Rw), w0) < 1e-10);
  CHECK(trace(Rw).sup_norm() < 1e-10);
}

TEST_CASE("padded products dealias: sin(15 x1)^2 keeps only resolved modes") {
  const int N = 32;
  auto s = sample_scalar(N, [](double x, double, double) { return std::sin(15.0 * x); });
  SpectralField f = SpectralField::from_samples(Shape::scalar, N, s);
  SpectralField p = product(f, f);
  CHECK(std::abs(p.coeff(0, {0, 0, 0}) - cplx{0.5, 0.0}) < 1e-13);
  CHECK(std::abs(p.coeff(0, {2, 0, 0})) < 1e-13);
  CHECK(std::abs(p.coeff(0, {-2, 0, 0})) < 1e-13);
}

TEST_CASE("product helpers agree with pointwise sample arithmetic in-band") {
  const int N = 16;
  SpectralField u = random_field(Shape::vector3, N, 3, 51);
  SpectralField v = random_field(Shape::vector3, N, 3, 52);

  SpectralField d = dot_product(u, v);
  auto us = u.samples(), vs = v.samples(), ds = d.samples();
  std::vector<double> expect(d.modes());
  for (std::int64_t i = 0; i < d.modes(); ++i)
    expect[i] = us[i] * vs[i] + us[u.modes() + i] * vs[u.modes() + i] +
                us[2 * u.modes() + i] * vs[2 * u.modes() + i];
  SpectralField e = SpectralField::from_samples(Shape::scalar, N, expect);
  for (std::int64_t i = 0; i < d.modes(); ++i) {
    IVec3 k = freq_of_linear(i, N);
    if (std::abs(k[0]) > 6 || std::abs(k[1]) > 6 || std::abs(k[2]) > 6) continue;
    CHECK(std::abs(d.c(0, i) - e.c(0, i)) < 1e-12);
  }

  SpectralField outer = sym_outer(u, v);
  SpectralField tr = trace(outer);
  CHECK(testutil::max_coeff_diff(tr, d) < 1e-12);

  SpectralField uu = outer_sym(u);
  SpectralField Au = matvec(uu, v);
  SpectralField lhs = scalar_times(dot_product(u, v), u);
  CHECK(testutil::max_coeff_diff(Au, lhs) < 1e-10);
}
