#pragma once

// Small forward-mode autodiff scalar and 3-vector helpers used by the
// crane dynamics. Grad<T, N> carries a value and N partial derivatives and
// nests (Grad<Grad<double, 7>, 1> gives a time derivative of a gradient),
// which is all the machinery the Lagrangian assembly needs.

#include <array>
#include <cmath>
#include <cstddef>
#include <type_traits>

namespace crane {

template <class T, int N>
struct Grad {
  T v{};
  std::array<T, N> d{};

  Grad() = default;
  Grad(double x) : v(x) {}  // NOLINT: implicit promotion is the point
  template <class U = T>
    requires(!std::is_same_v<U, double>)
  Grad(const T& value) : v(value) {}

  static Grad seeded(const T& value, int channel) {
    Grad g(value);
    g.d[static_cast<std::size_t>(channel)] = T(1.0);
    return g;
  }

  Grad operator-() const {
    Grad r;
    r.v = -v;
    for (int i = 0; i < N; ++i) r.d[i] = -d[i];
    return r;
  }
  Grad& operator+=(const Grad& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Grad& operator-=(const Grad& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Grad& operator*=(const Grad& o) { return *this = *this * o; }

  friend Grad operator+(Grad a, const Grad& b) { return a += b; }
  friend Grad operator-(Grad a, const Grad& b) { return a -= b; }
  friend Grad operator*(const Grad& a, const Grad& b) {
    Grad r;
    r.v = a.v * b.v;
    for (int i = 0; i < N; ++i) r.d[i] = a.v * b.d[i] + a.d[i] * b.v;
    return r;
  }
  friend Grad operator/(const Grad& a, const Grad& b) {
    Grad r;
    const T inv = T(1.0) / b.v;
    r.v = a.v * inv;
    for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
    return r;
  }
};

template <class T, int N>
Grad<T, N> sin(const Grad<T, N>& a) {
  using std::cos;
  using std::sin;
  Grad<T, N> r;
  r.v = sin(a.v);
  const T c = cos(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = c * a.d[i];
  return r;
}

template <class T, int N>
Grad<T, N> cos(const Grad<T, N>& a) {
  using std::cos;
  using std::sin;
  Grad<T, N> r;
  r.v = cos(a.v);
  const T ms = -sin(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = ms * a.d[i];
  return r;
}

template <class T, int N>
Grad<T, N> sqrt(const Grad<T, N>& a) {
  using std::sqrt;
  Grad<T, N> r;
  r.v = sqrt(a.v);
  const T half_inv = T(0.5) / r.v;
  for (int i = 0; i < N; ++i) r.d[i] = half_inv * a.d[i];
  return r;
}

template <class T, int N>
Grad<T, N> exp(const Grad<T, N>& a) {
  using std::exp;
  Grad<T, N> r;
  r.v = exp(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = r.v * a.d[i];
  return r;
}

// Strips the derivative structure down to the underlying double value.
inline double value_of(double x) { return x; }
template <class T, int N>
double value_of(const Grad<T, N>& g) {
  return value_of(g.v);
}

using G7 = Grad<double, 7>;
using TimeG7 = Grad<G7, 1>;

template <class S>
struct V3 {
  S x{}, y{}, z{};

  V3() = default;
  V3(S px, S py, S pz) : x(px), y(py), z(pz) {}

  V3 operator-() const { return {-x, -y, -z}; }
  friend V3 operator+(const V3& a, const V3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend V3 operator-(const V3& a, const V3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend V3 operator*(const S& s, const V3& a) { return {s * a.x, s * a.y, s * a.z}; }
  V3& operator+=(const V3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
};

template <class S>
S dot(const V3<S>& a, const V3<S>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <class S>
V3<S> cross(const V3<S>& a, const V3<S>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Axis rotations applied directly to vectors; cheaper than 3x3 products and
// they template cleanly over autodiff scalars.
template <class S>
V3<S> rot_x(const S& a, const V3<S>& v) {
  using std::cos;
  using std::sin;
  const S c = cos(a), s = sin(a);
  return {v.x, c * v.y - s * v.z, s * v.y + c * v.z};
}

template <class S>
V3<S> rot_y(const S& a, const V3<S>& v) {
  using std::cos;
  using std::sin;
  const S c = cos(a), s = sin(a);
  return {c * v.x + s * v.z, v.y, -s * v.x + c * v.z};
}

template <class S>
V3<S> rot_z(const S& a, const V3<S>& v) {
  using std::cos;
  using std::sin;
  const S c = cos(a), s = sin(a);
  return {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
}

// ZYX (yaw-pitch-roll) rotation of a vector.
template <class S>
V3<S> rot_zyx(const S& yaw, const S& pitch, const S& roll, const V3<S>& v) {
  return rot_z(yaw, rot_y(pitch, rot_x(roll, v)));
}

// Portable deterministic uniforms: identical bit streams on every platform,
// unlike std::uniform_real_distribution.
template <class Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class Rng>
double uniform_sym(Rng& rng, double amplitude) {
  return amplitude * (2.0 * uniform01(rng) - 1.0);
}

}  // namespace crane
