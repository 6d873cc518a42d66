#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "seci/spectral/field.hpp"

namespace seci::spectral {

// Field snapshot: magic "SECI", u32 version, u8 shape, u32 N, then per
// component little-endian f64 (re, im) pairs with k ascending from -N/2 to
// N/2-1 on each axis, last axis fastest.
//
// Frame container: magic "SECS", u32 version, u32 frame count, f64 t0,
// f64 dt, then the frames as consecutive field snapshots.

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "snapshot format assumes a little-endian host");

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw seci_error("truncated snapshot");
  return v;
}

}  // namespace detail

inline void write_field(std::ostream& os, const SpectralField& f) {
  os.write("SECI", 4);
  detail::put<std::uint32_t>(os, 1);
  detail::put<std::uint8_t>(os, std::uint8_t(f.shape()));
  detail::put<std::uint32_t>(os, std::uint32_t(f.n()));
  const int N = f.n();
  for (int c = 0; c < f.components(); ++c)
    for (int k1 = -N / 2; k1 < N / 2; ++k1)
      for (int k2 = -N / 2; k2 < N / 2; ++k2)
        for (int k3 = -N / 2; k3 < N / 2; ++k3) {
          cplx v = f.coeff(c, {k1, k2, k3});
          detail::put<double>(os, v.real());
          detail::put<double>(os, v.imag());
        }
}

inline SpectralField read_field(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SECI", 4) != 0) throw seci_error("bad snapshot magic");
  auto version = detail::get<std::uint32_t>(is);
  if (version != 1) throw seci_error("unsupported snapshot version");
  auto shape_raw = detail::get<std::uint8_t>(is);
  if (shape_raw > 2) throw seci_error("bad snapshot shape");
  auto N = int(detail::get<std::uint32_t>(is));
  SpectralField f(Shape(shape_raw), N, false);
  bool real_ok = true;
  for (int c = 0; c < f.components(); ++c)
    for (int k1 = -N / 2; k1 < N / 2; ++k1)
      for (int k2 = -N / 2; k2 < N / 2; ++k2)
        for (int k3 = -N / 2; k3 < N / 2; ++k3) {
          double re = detail::get<double>(is);
          double im = detail::get<double>(is);
          f.set_coeff(c, {k1, k2, k3}, cplx{re, im});
        }
  for (int c = 0; c < f.components() && real_ok; ++c)
    for (std::int64_t i = 0; i < f.modes(); ++i) {
      IVec3 k = freq_of_linear(i, N);
      IVec3 mk;
      for (int a = 0; a < 3; ++a) mk[a] = (k[a] == -N / 2) ? -N / 2 : -k[a];
      if (std::abs(f.c(c, i) - std::conj(f.coeff(c, mk))) > 1e-14) {
        real_ok = false;
        break;
      }
    }
  f.set_real(real_ok);
  return f;
}

inline void save_field(const std::string& path, const SpectralField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw seci_error("cannot open " + path);
  write_field(os, f);
}

inline SpectralField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw seci_error("cannot open " + path);
  return read_field(is);
}

inline void save_spacetime(const std::string& path, const SpaceTimeField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw seci_error("cannot open " + path);
  os.write("SECS", 4);
  detail::put<std::uint32_t>(os, 1);
  detail::put<std::uint32_t>(os, std::uint32_t(f.frames.size()));
  detail::put<double>(os, f.t0);
  detail::put<double>(os, f.dt);
  for (const auto& frame : f.frames) write_field(os, frame);
}

inline SpaceTimeField load_spacetime(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw seci_error("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SECS", 4) != 0) throw seci_error("bad container magic");
  auto version = detail::get<std::uint32_t>(is);
  if (version != 1) throw seci_error("unsupported container version");
  auto count = detail::get<std::uint32_t>(is);
  SpaceTimeField f;
  f.t0 = detail::get<double>(is);
  f.dt = detail::get<double>(is);
  f.frames.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) f.frames.push_back(read_field(is));
  return f;
}

}  // namespace seci::spectral
