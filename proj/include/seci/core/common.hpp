#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace seci {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;
using IVec3 = std::array<int, 3>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
inline constexpr double torus_volume = two_pi * two_pi * two_pi;

struct seci_error : std::runtime_error {
  explicit seci_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline double wrap_angle(double x) {
  x = std::fmod(x, two_pi);
  return x < 0 ? x + two_pi : x;
}

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Row-major 3x3 matrix, M[3 * row + col].
using Mat3 = std::array<double, 9>;

inline constexpr Mat3 mat3_identity() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

inline double det3(const Mat3& m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

inline Mat3 inv3(const Mat3& m) {
  double d = det3(m);
  if (std::abs(d) < 1e-300) throw seci_error("inv3: singular matrix");
  double r = 1.0 / d;
  return {r * (m[4] * m[8] - m[5] * m[7]), r * (m[2] * m[7] - m[1] * m[8]), r * (m[1] * m[5] - m[2] * m[4]),
          r * (m[5] * m[6] - m[3] * m[8]), r * (m[0] * m[8] - m[2] * m[6]), r * (m[2] * m[3] - m[0] * m[5]),
          r * (m[3] * m[7] - m[4] * m[6]), r * (m[1] * m[6] - m[0] * m[7]), r * (m[0] * m[4] - m[1] * m[3])};
}

inline Vec3 mat3_apply(const Mat3& m, const Vec3& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

inline double dot(const IVec3& a, const IVec3& b) {
  return double(a[0]) * b[0] + double(a[1]) * b[1] + double(a[2]) * b[2];
}
inline double norm(const IVec3& a) { return std::sqrt(dot(a, a)); }
inline IVec3 operator+(const IVec3& a, const IVec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline IVec3 negate(const IVec3& a) { return {-a[0], -a[1], -a[2]}; }

}  // namespace seci
