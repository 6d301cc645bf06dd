// Safety functions: funnel limits and a direct-formula regression value, the
// exact gradient against finite differences, box distances and the composed
// safe set, and free-space box generation from obstacle blocks.

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "crane/math.hpp"
#include "crane/safety.hpp"

using namespace crane;

namespace {

std::mt19937_64 g_rng(77);

CraneState random_state() {
  CraneState x;
  x.q.beta = uniform_sym(g_rng, 3.0);
  x.q.theta = 0.1 + 1.1 * uniform01(g_rng);
  x.q.tether_len = 0.3 + 1.7 * uniform01(g_rng);
  x.q.rope_roll = uniform_sym(g_rng, 0.3);
  x.q.rope_pitch = uniform_sym(g_rng, 0.3);
  x.q.payload_roll = uniform_sym(g_rng, 0.3);
  x.q.payload_pitch = uniform_sym(g_rng, 0.3);
  for (int i = 0; i < 7; ++i) x.qdot[i] = uniform_sym(g_rng, 0.5);
  return x;
}

TargetSafetyParams funnel_at(const Vec3& target) {
  TargetSafetyParams p;
  p.target_pos = [target](double) { return target; };
  return p;
}

/// Independent sigmoid-formula evaluation of h_t from a payload position.
double direct_h(const Vec3& p, const Vec3& target, const TargetSafetyParams& prm) {
  const double rho_sq = (p[0] - target[0]) * (p[0] - target[0]) +
                        (p[1] - target[1]) * (p[1] - target[1]);
  const auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const double surface =
      prm.peak_amp * sig(prm.steepness * (rho_sq - prm.rho2 * prm.rho2)) -
      (prm.peak_amp - prm.plateau_gap) * sig(prm.steepness * (rho_sq - prm.rho1 * prm.rho1));
  return (p[2] - target[2]) - surface;
}

}  // namespace

TEST_CASE("funnel limits: far-field plateau and aligned throat") {
  const TargetSafetyParams prm = funnel_at(Vec3(0, 0, 0));
  // Far from the axis both sigmoids saturate at 1: surface -> c_0.
  const double far = target_safety_from_payload(0, Vec3(5.0, 0.0, 1.0), prm);
  REQUIRE(far == Catch::Approx(1.0 - prm.plateau_gap).margin(1e-9));
  // Aligned with the axis both sigmoids are nearly 0: payload may descend.
  const double aligned = target_safety_from_payload(0, Vec3(0.0, 0.0, 0.2), prm);
  REQUIRE(aligned == Catch::Approx(0.2).margin(0.01));
  // Between the throat and the cone radius the wall stands near peak_amp.
  const double wall = target_safety_from_payload(0, Vec3(0.055, 0.0, 0.2), prm);
  REQUIRE(0.2 - wall == Catch::Approx(prm.peak_amp).margin(0.02));
}

TEST_CASE("h_t equals the direct formula at random points") {
  for (int trial = 0; trial < 200; ++trial) {
    Vec3 target(uniform_sym(g_rng, 2.0), uniform_sym(g_rng, 2.0), uniform_sym(g_rng, 0.5));
    const TargetSafetyParams prm = funnel_at(target);
    Vec3 p = target + Vec3(uniform_sym(g_rng, 0.2), uniform_sym(g_rng, 0.2),
                           0.5 * uniform01(g_rng));
    REQUIRE(target_safety_from_payload(0, p, prm) ==
            Catch::Approx(direct_h(p, target, prm)).margin(1e-14));
  }
  // Regression fixture: aligned payload 0.10 m above the target.
  const TargetSafetyParams prm = funnel_at(Vec3(1.0, -0.5, 0.2));
  const Vec3 p(1.0, -0.5, 0.3);
  REQUIRE(target_safety_from_payload(0, p, prm) ==
          Catch::Approx(direct_h(p, Vec3(1.0, -0.5, 0.2), prm)).margin(1e-15));
}

TEST_CASE("target_safety_gradient matches central finite differences") {
  const CraneParameters crane_prm;
  for (int trial = 0; trial < 100; ++trial) {
    const CraneState x = random_state();
    const BaseMotionSample base;
    // target near the payload so the funnel terms are active
    const Vec3 p = payload_pose(x.q, base, crane_prm);
    const TargetSafetyParams prm =
        funnel_at(p + Vec3(uniform_sym(g_rng, 0.05), uniform_sym(g_rng, 0.05), -0.2));
    const Vec14 g = target_safety_gradient(0, x, prm, base, crane_prm);
    const double h = 1e-6;
    for (int j = 0; j < 14; ++j) {
      Vec14 xp = x.vector(), xm = x.vector();
      xp[j] += h;
      xm[j] -= h;
      const double fd = (target_safety(0, CraneState::from_vector(xp), prm, base, crane_prm) -
                         target_safety(0, CraneState::from_vector(xm), prm, base, crane_prm)) /
                        (2.0 * h);
      REQUIRE(g[j] == Catch::Approx(fd).margin(1e-5 * (1.0 + std::abs(fd))));
    }
    // Structural sparsity: h_t does not depend on the rates.
    REQUIRE(g.tail<7>().lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("box_safety distances and sign flip across a face") {
  const SafetyBox box{Vec3(-1, -2, 0), Vec3(1, 2, 3)};
  const Vec3 p(0.2, -0.5, 1.0);
  const auto h = box_safety_from_payload(p, box);
  REQUIRE(h[0] == Catch::Approx(1.2));
  REQUIRE(h[1] == Catch::Approx(1.5));
  REQUIRE(h[2] == Catch::Approx(1.0));
  REQUIRE(h[3] == Catch::Approx(0.8));
  REQUIRE(h[4] == Catch::Approx(2.5));
  REQUIRE(h[5] == Catch::Approx(2.0));
  // Sweep p_x across the upper x face: h4 changes sign exactly there.
  for (double px = 0.8; px <= 1.2; px += 0.05) {
    const auto hh = box_safety_from_payload(Vec3(px, 0, 1), box);
    REQUIRE((hh[3] >= 0) == (px <= 1.0));
  }
}

TEST_CASE("composite_safety equals the brute-force minimum") {
  const CraneParameters crane_prm;
  const SafetyBox box{Vec3(-5, -5, -0.05), Vec3(5, 5, 5)};
  for (int trial = 0; trial < 50; ++trial) {
    const CraneState x = random_state();
    const BaseMotionSample base;
    const Vec3 p = payload_pose(x.q, base, crane_prm);
    const TargetSafetyParams prm = funnel_at(p + Vec3(0.02, -0.01, -0.3));
    const double got = composite_safety(0, x, prm, box, base, crane_prm);
    double expect = target_safety(0, x, prm, base, crane_prm);
    const auto hb = box_safety(0, x, box, base, crane_prm);
    for (int i = 0; i < 6; ++i) expect = std::min(expect, hb[i]);
    REQUIRE(got == expect);
  }
}

TEST_CASE("update_box: identity base returns the nominal box") {
  const SafetyBox nominal{Vec3(-2, -3, 0), Vec3(2, 3, 4)};
  const BaseMotionSample still;
  const SafetyBox out = update_box(0, still, ObstacleSet{}, nominal, 0.0);
  REQUIRE((out.lower - nominal.lower).lpNorm<Eigen::Infinity>() < 1e-12);
  REQUIRE((out.upper - nominal.upper).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("update_box: one block intruding from +x cuts the upper x face") {
  const SafetyBox nominal{Vec3(-2, -2, 0), Vec3(2, 2, 4)};
  ObstacleSet obs;
  obs.blocks.push_back({Vec3(1.5, -3, -1), Vec3(3, 3, 5)});  // spans y and z fully
  const double margin = 0.1;
  const SafetyBox out = update_box(0, BaseMotionSample{}, obs, nominal, margin);
  REQUIRE(out.upper[0] == Catch::Approx(1.5 - margin).margin(1e-12));
  REQUIRE((out.lower - nominal.lower).lpNorm<Eigen::Infinity>() < 1e-12);
  REQUIRE(out.upper[1] == Catch::Approx(nominal.upper[1]).margin(1e-12));
  REQUIRE(out.upper[2] == Catch::Approx(nominal.upper[2]).margin(1e-12));
}

TEST_CASE("update_box: translated base moves the free box") {
  const SafetyBox nominal{Vec3(-1, -1, 0), Vec3(1, 1, 2)};
  BaseMotionSample b;
  b.translation = Vec3(0.3, -0.2, 0.1);
  const SafetyBox out = update_box(0, b, ObstacleSet{}, nominal, 0.0);
  REQUIRE((out.lower - (nominal.lower + b.translation)).lpNorm<Eigen::Infinity>() < 1e-12);
  REQUIRE((out.upper - (nominal.upper + b.translation)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("update_box rejects degenerate input and exhausted free space") {
  const SafetyBox bad{Vec3(1, 0, 0), Vec3(-1, 1, 1)};
  REQUIRE_THROWS_AS(update_box(0, BaseMotionSample{}, ObstacleSet{}, bad, 0.0),
                    std::invalid_argument);
  const SafetyBox nominal{Vec3(-1, -1, 0), Vec3(1, 1, 2)};
  ObstacleSet covering;
  covering.blocks.push_back({Vec3(-2, -2, -1), Vec3(2, 2, 3)});
  REQUIRE_THROWS_AS(update_box(0, BaseMotionSample{}, covering, nominal, 0.0),
                    std::runtime_error);
}
