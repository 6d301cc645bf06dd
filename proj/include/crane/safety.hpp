#pragma once

// Crane safety functions: the smooth target-insertion function h_t, the six
// time-varying bounding-box constraints, their gradients and the min-composed
// safe set, plus free-space box generation from declared obstacle blocks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "crane/dynamics.hpp"
#include "crane/types.hpp"

namespace crane {

/// Parameters of the target funnel h_t. The gamma_0 sigmoid switches at the
/// inner radius rho2 (the funnel throat) and the (gamma_0 - c_0) sigmoid at
/// the cone radius rho1, producing the funnel profile: descent is allowed at
/// the aligned center, walled by a lip of height gamma_0 around the throat,
/// with an outer plateau c_0 above the deck.
struct TargetSafetyParams {
  double peak_amp = 0.30;    ///< gamma_0 [m]
  double steepness = 5000.0; ///< gamma_1 [1/m^2]
  double plateau_gap = 0.05; ///< c_0 [m]
  double rho1 = 0.075;       ///< cone radius [m]
  double rho2 = 0.030;       ///< throat radius [m]
  std::function<Vec3(double)> target_pos;  ///< t -> p_t(t), inertial frame [m]
  double target_radius = 0.025;  ///< r_t [m]
  double payload_radius = 0.02;  ///< r_p [m]

  void validate() const {
    if (peak_amp <= 0 || steepness <= 0 || plateau_gap <= 0)
      throw std::invalid_argument("TargetSafetyParams: gamma_0, gamma_1, c_0 must be > 0");
    if (!(rho1 > rho2 && rho2 > 0))
      throw std::invalid_argument("TargetSafetyParams: need rho1 > rho2 > 0");
    if (peak_amp <= plateau_gap)
      throw std::invalid_argument("TargetSafetyParams: need gamma_0 > c_0");
    if (payload_radius >= target_radius)
      throw std::invalid_argument("TargetSafetyParams: need r_p < r_t");
    if (!target_pos) throw std::invalid_argument("TargetSafetyParams: target_pos unset");
  }
};

/// Time-varying free-space box B(t), lower(t) < upper(t) component-wise.
struct SafetyBox {
  Vec3 lower;
  Vec3 upper;
};

struct ObstacleBlock {
  Vec3 lower;  ///< platform frame [m]
  Vec3 upper;
};

struct ObstacleSet {
  std::vector<ObstacleBlock> blocks;

  void validate() const {
    for (const auto& b : blocks)
      if ((b.lower.array() >= b.upper.array()).any())
        throw std::invalid_argument("ObstacleSet: block without positive extent");
  }
};

namespace detail {

inline double logistic(double z) {
  // clamp preserves IEEE finiteness; no effect at this scale
  const double zc = std::clamp(z, -500.0, 500.0);
  return 1.0 / (1.0 + std::exp(-zc));
}

/// Funnel surface height as a function of squared horizontal offset.
inline double funnel_surface(double rho_sq, const TargetSafetyParams& p) {
  return p.peak_amp * logistic(p.steepness * (rho_sq - p.rho2 * p.rho2)) -
         (p.peak_amp - p.plateau_gap) * logistic(p.steepness * (rho_sq - p.rho1 * p.rho1));
}

/// d(funnel)/d(rho_sq).
inline double funnel_surface_drho(double rho_sq, const TargetSafetyParams& p) {
  const double s2 = logistic(p.steepness * (rho_sq - p.rho2 * p.rho2));
  const double s1 = logistic(p.steepness * (rho_sq - p.rho1 * p.rho1));
  return p.steepness * (p.peak_amp * s2 * (1.0 - s2) -
                        (p.peak_amp - p.plateau_gap) * s1 * (1.0 - s1));
}

}  // namespace detail

/// h_t given the payload-bottom position directly; target_offset shifts the
/// target estimate (used by the robustness sampling).
inline double target_safety_from_payload(double t, const Vec3& payload, const TargetSafetyParams& prm,
                                         const Vec3& target_offset = Vec3::Zero()) {
  const Vec3 pt = prm.target_pos(t) + target_offset;
  const double dx = payload[0] - pt[0];
  const double dy = payload[1] - pt[1];
  const double rho_sq = dx * dx + dy * dy;
  return (payload[2] - pt[2]) - detail::funnel_surface(rho_sq, prm);
}

/// h_t(t, x): payload height above the target funnel surface.
inline double target_safety(double t, const CraneState& x, const TargetSafetyParams& prm,
                            const BaseMotionSample& base, const CraneParameters& crane_prm,
                            const Vec3& target_offset = Vec3::Zero()) {
  return target_safety_from_payload(t, payload_pose(x.q, base, crane_prm), prm, target_offset);
}

/// Exact chain-rule gradient of h_t w.r.t. the 14-dim state. h_t depends on
/// positions only, so the rate half is structurally zero.
inline Vec14 target_safety_gradient(double t, const CraneState& x, const TargetSafetyParams& prm,
                                    const BaseMotionSample& base, const CraneParameters& crane_prm,
                                    const Vec3& target_offset = Vec3::Zero()) {
  const Vec3 p = payload_pose(x.q, base, crane_prm);
  const Vec3 pt = prm.target_pos(t) + target_offset;
  const double dx = p[0] - pt[0];
  const double dy = p[1] - pt[1];
  const double dsurf = detail::funnel_surface_drho(dx * dx + dy * dy, prm);
  Vec3 dh_dp(-dsurf * 2.0 * dx, -dsurf * 2.0 * dy, 1.0);
  const Eigen::Matrix<double, 3, 7> jac = payload_pose_jacobian(x.q, base, crane_prm);
  Vec14 g = Vec14::Zero();
  g.head<7>() = jac.transpose() * dh_dp;
  return g;
}

/// (h_1..h_6): signed distances of the payload to the box faces.
inline Eigen::Matrix<double, 6, 1> box_safety(double /*t*/, const CraneState& x,
                                              const SafetyBox& box, const BaseMotionSample& base,
                                              const CraneParameters& crane_prm) {
  const Vec3 p = payload_pose(x.q, base, crane_prm);
  Eigen::Matrix<double, 6, 1> h;
  h.head<3>() = p - box.lower;
  h.tail<3>() = box.upper - p;
  return h;
}

inline Eigen::Matrix<double, 6, 1> box_safety_from_payload(const Vec3& p, const SafetyBox& box) {
  Eigen::Matrix<double, 6, 1> h;
  h.head<3>() = p - box.lower;
  h.tail<3>() = box.upper - p;
  return h;
}

/// min(h_t, h_1..h_6): nonnegative iff x is in C(t) = C_t(t) n C_b(t).
inline double composite_safety(double t, const CraneState& x, const TargetSafetyParams& target,
                               const SafetyBox& box, const BaseMotionSample& base,
                               const CraneParameters& crane_prm) {
  const double ht = target_safety(t, x, target, base, crane_prm);
  const auto hb = box_safety(t, x, box, base, crane_prm);
  return std::min(ht, hb.minCoeff());
}

/// Time-varying free-space box: the nominal platform-frame box transformed to
/// the inertial frame by the base pose at t, then shrunk per-axis until every
/// obstacle block (plus margin) is excluded.
inline SafetyBox update_box(double t, const BaseMotionSample& base, const ObstacleSet& obstacles,
                            const SafetyBox& nominal_platform_box, double margin) {
  obstacles.validate();
  if ((nominal_platform_box.lower.array() >= nominal_platform_box.upper.array()).any())
    throw std::invalid_argument("update_box: nominal box not strictly ordered");

  Eigen::Matrix3d R;
  {
    const double cy = std::cos(base.angles[0]), sy = std::sin(base.angles[0]);
    const double cp = std::cos(base.angles[1]), sp = std::sin(base.angles[1]);
    const double cr = std::cos(base.angles[2]), sr = std::sin(base.angles[2]);
    Eigen::Matrix3d Rz, Ry, Rx;
    Rz << cy, -sy, 0, sy, cy, 0, 0, 0, 1;
    Ry << cp, 0, sp, 0, 1, 0, -sp, 0, cp;
    Rx << 1, 0, 0, 0, cr, -sr, 0, sr, cr;
    R = Rz * Ry * Rx;
  }
  const Eigen::Matrix3d Rabs = R.cwiseAbs();

  // Free-space box must be inscribed in the rotated nominal box; obstacle
  // blocks are circumscribed. Both reduce to the exact translate for an
  // identity rotation and stay conservative for small base tilts.
  const Vec3 center = 0.5 * (nominal_platform_box.lower + nominal_platform_box.upper);
  const Vec3 half = 0.5 * (nominal_platform_box.upper - nominal_platform_box.lower);
  const Vec3 c_in = R * center + base.translation;
  const Vec3 half_in = (2.0 * half - Rabs * half).cwiseMax(Vec3::Zero());
  SafetyBox box{c_in - half_in, c_in + half_in};
  if ((box.lower.array() >= box.upper.array()).any())
    throw std::runtime_error("update_box: free space exhausted by base tilt");

  struct Block {
    Vec3 lo, hi;
  };
  std::vector<Block> blocks;
  for (const auto& ob : obstacles.blocks) {
    const Vec3 oc = R * (0.5 * (ob.lower + ob.upper)) + base.translation;
    const Vec3 oh = Rabs * (0.5 * (ob.upper - ob.lower));
    blocks.push_back({oc - oh - Vec3::Constant(margin), oc + oh + Vec3::Constant(margin)});
  }

  // Repeatedly cut away the intersecting block with the cheapest per-axis
  // face cut (largest remaining volume); deterministic in list order.
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& blk : blocks) {
      const bool overlaps = (blk.lo.array() < box.upper.array()).all() &&
                            (blk.hi.array() > box.lower.array()).all();
      if (!overlaps) continue;
      double best_vol = -1.0;
      SafetyBox best = box;
      for (int axis = 0; axis < 3; ++axis) {
        // cut from above: upper -> blk.lo[axis]
        if (blk.lo[axis] > box.lower[axis]) {
          SafetyBox cand = box;
          cand.upper[axis] = std::min(cand.upper[axis], blk.lo[axis]);
          const double vol = (cand.upper - cand.lower).prod();
          if (vol > best_vol) {
            best_vol = vol;
            best = cand;
          }
        }
        // cut from below: lower -> blk.hi[axis]
        if (blk.hi[axis] < box.upper[axis]) {
          SafetyBox cand = box;
          cand.lower[axis] = std::max(cand.lower[axis], blk.hi[axis]);
          const double vol = (cand.upper - cand.lower).prod();
          if (vol > best_vol) {
            best_vol = vol;
            best = cand;
          }
        }
      }
      if (best_vol <= 0.0)
        throw std::runtime_error("update_box: free space exhausted by obstacles");
      box = best;
      changed = true;
    }
  }
  return box;
}

}  // namespace crane
