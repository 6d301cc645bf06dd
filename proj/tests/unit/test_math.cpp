// Forward-mode autodiff scalar, 3-vector helpers and the deterministic
// uniform generator.

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "crane/math.hpp"

using namespace crane;

namespace {

// f(a, b) exercising every overloaded operation and elementary function.
template <class S>
S composite(const S& a, const S& b) {
  using std::cos;
  using std::exp;
  using std::sin;
  using std::sqrt;
  return sin(a * b) + cos(a - b) * exp(S(0.3) * a) - sqrt(a * a + b * b + S(1.0)) + a / (b + S(2.0));
}

}  // namespace

TEST_CASE("Grad first derivatives match central finite differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const double av = 4.0 * uniform01(rng) - 2.0;
    const double bv = 4.0 * uniform01(rng) - 2.0;
    using G2 = Grad<double, 2>;
    const G2 a = G2::seeded(av, 0);
    const G2 b = G2::seeded(bv, 1);
    const G2 f = composite(a, b);

    const double h = 1e-6;
    const double dfa = (composite(av + h, bv) - composite(av - h, bv)) / (2.0 * h);
    const double dfb = (composite(av, bv + h) - composite(av, bv - h)) / (2.0 * h);
    REQUIRE(f.v == Catch::Approx(composite(av, bv)).epsilon(1e-14));
    REQUIRE(f.d[0] == Catch::Approx(dfa).margin(1e-8));
    REQUIRE(f.d[1] == Catch::Approx(dfb).margin(1e-8));
  }
}

TEST_CASE("nested Grad gives the time derivative of a gradient") {
  // q(t) = q0 + qd t; outer channel is time, inner is the q-gradient.
  const double q0 = 0.4, qd = 1.3;
  using TG = Grad<Grad<double, 1>, 1>;
  TG q(Grad<double, 1>::seeded(q0, 0));
  q.d[0] = Grad<double, 1>(qd);
  const TG f = sin(q) * q;  // f = q sin q; df/dq = sin q + q cos q
  // d/dt (df/dq) = qd * (2 cos q - q sin q)
  const double expect = qd * (2.0 * std::cos(q0) - q0 * std::sin(q0));
  REQUIRE(f.d[0].d[0] == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("V3 algebra matches Eigen") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Vector3d ea, eb;
    for (int i = 0; i < 3; ++i) {
      ea[i] = uniform_sym(rng, 2.0);
      eb[i] = uniform_sym(rng, 2.0);
    }
    const V3<double> a{ea[0], ea[1], ea[2]}, b{eb[0], eb[1], eb[2]};
    REQUIRE(dot(a, b) == Catch::Approx(ea.dot(eb)).epsilon(1e-14));
    const auto c = cross(a, b);
    const Eigen::Vector3d ec = ea.cross(eb);
    REQUIRE(c.x == Catch::Approx(ec[0]).margin(1e-14));
    REQUIRE(c.y == Catch::Approx(ec[1]).margin(1e-14));
    REQUIRE(c.z == Catch::Approx(ec[2]).margin(1e-14));
  }
}

TEST_CASE("rot_zyx matches Eigen angle-axis composition") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const double yaw = uniform_sym(rng, 3.0), pitch = uniform_sym(rng, 1.5),
                 roll = uniform_sym(rng, 3.0);
    Eigen::Vector3d v;
    for (int i = 0; i < 3; ++i) v[i] = uniform_sym(rng, 2.0);
    const Eigen::Matrix3d R =
        (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
         Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
         Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
            .toRotationMatrix();
    const Eigen::Vector3d expect = R * v;
    const auto got = rot_zyx(yaw, pitch, roll, V3<double>{v[0], v[1], v[2]});
    REQUIRE(got.x == Catch::Approx(expect[0]).margin(1e-13));
    REQUIRE(got.y == Catch::Approx(expect[1]).margin(1e-13));
    REQUIRE(got.z == Catch::Approx(expect[2]).margin(1e-13));
  }
}

TEST_CASE("uniform01 is deterministic and in [0, 1)") {
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(a);
    REQUIRE(u == uniform01(b));
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  std::mt19937_64 c(42);
  for (int i = 0; i < 1000; ++i) {
    const double s = uniform_sym(c, 0.3);
    REQUIRE(std::abs(s) <= 0.3);
  }
}
