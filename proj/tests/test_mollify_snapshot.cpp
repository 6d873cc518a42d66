#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "seci/spectral/mollify.hpp"
#include "seci/spectral/snapshot.hpp"
#include "test_util.hpp"

using namespace seci;
using namespace seci::spectral;
using testutil::random_field;

namespace {

SpaceTimeField ramp_field(const SpectralField& g, int frames, double t0, double dt) {
  SpaceTimeField f;
  f.t0 = t0;
  f.dt = dt;
  for (int i = 0; i < frames; ++i) f.frames.push_back((1.0 + t0 + i * dt) * g);
  return f;
}

}  // namespace

TEST_CASE("mollifier fixes constants and kills their time derivative") {
  const int N = 16;
  SpectralField c(Shape::scalar, N);
  c.set_coeff(0, {0, 0, 0}, cplx{2.5, 0.0});
  SpaceTimeField f;
  f.t0 = -1.0;
  f.dt = 1.0 / 32;
  for (int i = 0; i < 40; ++i) f.frames.push_back(c);
  SpaceTimeMollifier mol(N, 1.0, f.dt);
  SpectralField out = mol.apply(f, 39);
  CHECK(testutil::max_coeff_diff(out, c) < 1e-14);
  CHECK(mol.apply_dt(f, 39).sup_norm() < 1e-13);
}

TEST_CASE("mollifier rejects under-resolved scales") {
  CHECK_THROWS_AS(SpaceTimeMollifier(16, 1.5 * (1.0 / 32), 1.0 / 32), seci_error);
  CHECK_THROWS_AS(SpaceTimeMollifier(16, 0.5 * two_pi / 16, 1.0 / 256), seci_error);
  CHECK_THROWS_AS(SpaceTimeMollifier(16, 4.0, 1.0 / 32), seci_error);
}

TEST_CASE("mollification error is first order with a stable constant") {
  const int N = 32;
  const double dt = 1.0 / 32;
  SpectralField g = 0.2 * random_field(Shape::scalar, N, 1, 2024);
  g.set_coeff(0, {0, 0, 0}, g.coeff(0, {0, 0, 0}) + 1.0);
  const int frames = 60;
  SpaceTimeField f = ramp_field(g, frames, -1.0, dt);
  const int last = frames - 1;

  std::vector<double> ells, errs;
  for (double ell : {1.6, 0.8, 0.4}) {
    SpaceTimeMollifier mol(N, ell, dt);
    SpectralField diff = mol.apply(f, last) - f.frames[last];
    ells.push_back(ell);
    errs.push_back(diff.sup_norm());
  }

  double smin = 1e9, smax = -1e9;
  for (std::size_t i = 0; i + 1 < ells.size(); ++i) {
    double slope = std::log(errs[i] / errs[i + 1]) / std::log(ells[i] / ells[i + 1]);
    smin = std::min(smin, slope);
    smax = std::max(smax, slope);
  }
  CHECK(smin > 0.8);
  CHECK(smax < 1.6);

  double c0 = errs[0] / ells[0];
  for (std::size_t i = 0; i < ells.size(); ++i) {
    double c = errs[i] / ells[i];
    CHECK(c / c0 < 2.0);
    CHECK(c0 / c < 2.0);
  }
}

TEST_CASE("time derivative of the mollification matches finite differences") {
  const int N = 16;
  const double dt = std::pow(2.0, -8);
  SpectralField g = random_field(Shape::scalar, N, 2, 11);
  SpaceTimeField f;
  f.t0 = -1.5;
  f.dt = dt;
  const int frames = 3 + (1 << 8);
  for (int i = 0; i < frames; ++i) {
    double t = f.t0 + i * dt;
    f.frames.push_back(std::sin(3.0 * t) * g);
  }
  SpaceTimeMollifier mol(N, 1.0, dt);
  const int at = frames - 2;
  SpectralField fd = (1.0 / (2.0 * dt)) * (mol.apply(f, at + 1) - mol.apply(f, at - 1));
  SpectralField an = mol.apply_dt(f, at);
  CHECK((an - fd).sup_norm() < 5e-4 * an.sup_norm());
}

TEST_CASE("mollified past is untouched by future edits") {
  const int N = 8;
  const double dt = 1.0 / 8;
  SpaceTimeField f;
  f.t0 = -4.0;
  f.dt = dt;
  for (int i = 0; i < 64; ++i) f.frames.push_back(random_field(Shape::scalar, N, 2, 100 + i));
  SpaceTimeMollifier mol(N, 2.0, dt);

  std::vector<SpectralField> before;
  for (int m = mol.past_frames(); m < 40; ++m) before.push_back(mol.apply(f, m));
  f.frames[40] = random_field(Shape::scalar, N, 2, 999);
  for (int m = mol.past_frames(); m < 40; ++m) {
    SpectralField after = mol.apply(f, m);
    CHECK(testutil::max_coeff_diff(after, before[m - mol.past_frames()]) == 0.0);
  }
}

TEST_CASE("snapshot round trip is exact for every shape") {
  for (Shape shape : {Shape::scalar, Shape::vector3, Shape::symmat3}) {
    SpectralField f = random_field(shape, 8, 3, 7 + int(shape));
    std::stringstream buf;
    write_field(buf, f);
    SpectralField g = read_field(buf);
    CHECK(g.shape() == f.shape());
    CHECK(g.n() == f.n());
    CHECK(g.is_real());
    CHECK(testutil::max_coeff_diff(f, g) == 0.0);
  }
}

TEST_CASE("frame container round trip keeps times and frames") {
  SpaceTimeField f;
  f.t0 = -0.25;
  f.dt = 0.125;
  for (int i = 0; i < 3; ++i) f.frames.push_back(random_field(Shape::vector3, 8, 2, 40 + i));
  const std::string path = "seci_test_container.bin";
  save_spacetime(path, f);
  SpaceTimeField g = load_spacetime(path);
  std::remove(path.c_str());
  REQUIRE(g.frame_count() == 3);
  CHECK(g.t0 == f.t0);
  CHECK(g.dt == f.dt);
  for (int i = 0; i < 3; ++i) CHECK(testutil::max_coeff_diff(f.frames[i], g.frames[i]) == 0.0);
}

TEST_CASE("snapshot reader rejects corrupt input") {
  std::stringstream bad("XXXXgarbage");
  CHECK_THROWS_AS(read_field(bad), seci_error);
  SpectralField f = random_field(Shape::scalar, 8, 2, 3);
  std::stringstream buf;
  write_field(buf, f);
  std::string bytes = buf.str();
  std::stringstream cut(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(read_field(cut), seci_error);
}
