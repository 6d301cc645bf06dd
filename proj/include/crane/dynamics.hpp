#pragma once

// Velocity-actuated crane dynamics under measured base motion.
//
// Frames: inertial at the undisturbed base, base frame at the pan axis at
// height base_height; beta = theta = 0 points the boom along +x; tether and
// payload angles are intrinsic roll-then-pitch deflections from the vertical.
//
// The mass matrix and bias forces are not hand-derived: they come out of the
// kinetic/potential energy functions through exact polarization (the kinetic
// energy is exactly quadratic in the rates) and nested forward-mode
// derivatives of the Lagrangian.

#include <stdexcept>

#include "crane/math.hpp"
#include "crane/types.hpp"

namespace crane {

using Mat7 = Eigen::Matrix<double, 7, 7>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

namespace detail {

template <class S>
struct BaseLift {
  S ang[3];
  S rate[3];
  V3<S> trans;
  V3<S> trans_vel;
};

// Kinematic chain evaluated over an arbitrary scalar: positions, axis
// directions and the hand-coded rigid-body velocities of every mass point.
template <class S>
struct Kin {
  V3<S> pan, v_pan;
  V3<S> boom_vec, w_boom;  // tip - pan and its velocity
  V3<S> tip, v_tip;
  V3<S> tether_dir;
  V3<S> payload_top, v_payload_top;
  V3<S> payload_dir;     // unit vector from payload top towards bottom... axis direction
  V3<S> omega_payload;
};

template <class S>
Kin<S> kinematics(const S q[7], const S qd[7], const BaseLift<S>& b, const CraneParameters& prm) {
  Kin<S> k;
  const V3<S> ex{S(1.0), S(0.0), S(0.0)};
  const V3<S> ey{S(0.0), S(1.0), S(0.0)};
  const V3<S> ez{S(0.0), S(0.0), S(1.0)};

  // Base angular velocity for ZYX Euler rates.
  const V3<S> omega_s = b.rate[0] * ez + rot_z(b.ang[0], b.rate[1] * ey) +
                        rot_z(b.ang[0], rot_y(b.ang[1], b.rate[2] * ex));

  const V3<S> pan_off = rot_zyx(b.ang[0], b.ang[1], b.ang[2], V3<S>{S(0.0), S(0.0), S(prm.base_height)});
  k.pan = b.trans + pan_off;
  k.v_pan = b.trans_vel + cross(omega_s, pan_off);

  // Boom direction: platform yaw then pitch (theta > 0 raises the tip).
  const V3<S> boom_dir_local = rot_z(q[0], rot_y(-q[1], ex));
  k.boom_vec = S(prm.boom_len) * rot_zyx(b.ang[0], b.ang[1], b.ang[2], boom_dir_local);
  const V3<S> omega_boom =
      omega_s + rot_zyx(b.ang[0], b.ang[1], b.ang[2], qd[0] * ez + rot_z(q[0], -qd[1] * ey));
  k.w_boom = cross(omega_boom, k.boom_vec);
  k.tip = k.pan + k.boom_vec;
  k.v_tip = k.v_pan + k.w_boom;

  // Tether: roll-then-pitch deflection from the inertial vertical.
  k.tether_dir = rot_x(q[3], rot_y(q[4], -ez));
  const V3<S> omega_t = qd[3] * ex + rot_x(q[3], qd[4] * ey);
  k.payload_top = k.tip + q[2] * k.tether_dir;
  k.v_payload_top = k.v_tip + qd[2] * k.tether_dir + q[2] * cross(omega_t, k.tether_dir);

  k.payload_dir = rot_x(q[5], rot_y(q[6], -ez));
  k.omega_payload = qd[5] * ex + rot_x(q[5], qd[6] * ey);
  return k;
}

template <class S>
S kinetic_energy_impl(const S q[7], const S qd[7], const BaseLift<S>& b, const CraneParameters& prm) {
  const Kin<S> k = kinematics(q, qd, b, prm);

  // Boom as a uniform rod from pan to tip: integral of 1/2 |v_pan + s w|^2.
  const S ke_boom = S(0.5 * prm.boom_mass) *
                    (dot(k.v_pan, k.v_pan) + dot(k.v_pan, k.w_boom) +
                     S(1.0 / 3.0) * dot(k.w_boom, k.w_boom));

  const V3<S> v_com = k.v_payload_top + S(0.5 * prm.payload_len) * cross(k.omega_payload, k.payload_dir);
  const double r2 = prm.payload_radius * prm.payload_radius;
  const double i_axial = 0.5 * prm.payload_mass * r2;
  const double i_trans = prm.payload_mass * (3.0 * r2 + prm.payload_len * prm.payload_len) / 12.0;
  const S w2 = dot(k.omega_payload, k.omega_payload);
  const S wa = dot(k.omega_payload, k.payload_dir);
  const S ke_payload = S(0.5 * prm.payload_mass) * dot(v_com, v_com) +
                       S(0.5) * (S(i_trans) * (w2 - wa * wa) + S(i_axial) * wa * wa);
  return ke_boom + ke_payload;
}

template <class S>
S potential_energy_impl(const S q[7], const BaseLift<S>& b, const CraneParameters& prm) {
  const S qd_zero[7] = {S(0.0), S(0.0), S(0.0), S(0.0), S(0.0), S(0.0), S(0.0)};
  const Kin<S> k = kinematics(q, qd_zero, b, prm);
  const S z_boom_com = k.pan.z + S(0.5) * k.boom_vec.z;
  const V3<S> com = k.payload_top + S(0.5 * prm.payload_len) * k.payload_dir;
  return S(prm.gravity) * (S(prm.boom_mass) * z_boom_com + S(prm.payload_mass) * com.z);
}

// Body-velocity structure: every velocity in the chain is affine in qdot,
// v = J(q, d_s) qdot + a(q, d_s). The basis holds the nonzero Jacobian
// columns and affine parts with all q/base-dependent trig evaluated once;
// the inertia matrix and the momentum are then small products. This is the
// runtime path; the polarization / nested-dual forms below remain as the
// exact-by-construction references it is verified against.
template <class S>
struct VelocityBasis {
  V3<S> v_pan;     // affine
  V3<S> Jw[2];     // w_boom columns (beta, theta)
  V3<S> aw;        // w_boom affine part (base rotation)
  V3<S> Jtop[5];   // payload-top velocity columns (beta..theta_r)
  V3<S> atop;      // payload-top affine part
  V3<S> Jom[2];    // payload angular-velocity columns (phi_p, theta_p)
  V3<S> d;         // payload axis direction
  V3<S> Jcom[7];   // payload-com velocity columns
};

template <class S>
VelocityBasis<S> velocity_basis(const S q[7], const BaseLift<S>& b, const CraneParameters& prm) {
  VelocityBasis<S> vb;
  const V3<S> ex{S(1.0), S(0.0), S(0.0)};
  const V3<S> ey{S(0.0), S(1.0), S(0.0)};
  const V3<S> ez{S(0.0), S(0.0), S(1.0)};

  const V3<S> omega_s = b.rate[0] * ez + rot_z(b.ang[0], b.rate[1] * ey) +
                        rot_z(b.ang[0], rot_y(b.ang[1], b.rate[2] * ex));
  const V3<S> pan_off =
      rot_zyx(b.ang[0], b.ang[1], b.ang[2], V3<S>{S(0.0), S(0.0), S(prm.base_height)});
  vb.v_pan = b.trans_vel + cross(omega_s, pan_off);

  const V3<S> boom_vec =
      S(prm.boom_len) * rot_zyx(b.ang[0], b.ang[1], b.ang[2], rot_z(q[0], rot_y(-q[1], ex)));
  const V3<S> axis_beta = rot_zyx(b.ang[0], b.ang[1], b.ang[2], ez);
  const V3<S> axis_theta =
      rot_zyx(b.ang[0], b.ang[1], b.ang[2], rot_z(q[0], S(-1.0) * ey));
  vb.Jw[0] = cross(axis_beta, boom_vec);
  vb.Jw[1] = cross(axis_theta, boom_vec);
  vb.aw = cross(omega_s, boom_vec);

  const V3<S> tether_dir = rot_x(q[3], rot_y(q[4], S(-1.0) * ez));
  vb.Jtop[0] = vb.Jw[0];
  vb.Jtop[1] = vb.Jw[1];
  vb.Jtop[2] = tether_dir;
  vb.Jtop[3] = q[2] * cross(ex, tether_dir);
  vb.Jtop[4] = q[2] * cross(rot_x(q[3], ey), tether_dir);
  vb.atop = vb.v_pan + vb.aw;

  vb.d = rot_x(q[5], rot_y(q[6], S(-1.0) * ez));
  vb.Jom[0] = ex;
  vb.Jom[1] = rot_x(q[5], ey);
  const S half_len = S(0.5 * prm.payload_len);
  for (int j = 0; j < 5; ++j) vb.Jcom[j] = vb.Jtop[j];
  vb.Jcom[5] = half_len * cross(vb.Jom[0], vb.d);
  vb.Jcom[6] = half_len * cross(vb.Jom[1], vb.d);
  return vb;
}

/// dT/dqdot from the velocity basis; exact because T is quadratic in qdot.
template <class S>
void momentum_from_basis(const VelocityBasis<S>& vb, const S qd[7], const CraneParameters& prm,
                         S m[7]) {
  const double r2 = prm.payload_radius * prm.payload_radius;
  const double i_axial = 0.5 * prm.payload_mass * r2;
  const double i_trans = prm.payload_mass * (3.0 * r2 + prm.payload_len * prm.payload_len) / 12.0;

  const V3<S> w = vb.aw + qd[0] * vb.Jw[0] + qd[1] * vb.Jw[1];
  V3<S> v_com = vb.atop;
  for (int j = 0; j < 7; ++j) v_com = v_com + qd[j] * vb.Jcom[j];
  const V3<S> omega = qd[5] * vb.Jom[0] + qd[6] * vb.Jom[1];
  const S wa = dot(omega, vb.d);
  const V3<S> boom_carrier = S(0.5 * prm.boom_mass) * vb.v_pan + S(prm.boom_mass / 3.0) * w;
  for (int j = 0; j < 7; ++j) {
    m[j] = S(prm.payload_mass) * dot(v_com, vb.Jcom[j]);
    if (j < 2) m[j] = m[j] + dot(boom_carrier, vb.Jw[j]);
    if (j >= 5) {
      const S od = dot(vb.Jom[j - 5], vb.d);
      m[j] = m[j] + S(i_trans) * (dot(omega, vb.Jom[j - 5]) - wa * od) + S(i_axial) * wa * od;
    }
  }
}

inline BaseLift<double> lift_values(const BaseMotionSample& b) {
  BaseLift<double> out;
  for (int i = 0; i < 3; ++i) {
    out.ang[i] = b.angles[i];
    out.rate[i] = b.angle_rates[i];
  }
  out.trans = {b.translation[0], b.translation[1], b.translation[2]};
  out.trans_vel = {b.translation_vel[0], b.translation_vel[1], b.translation_vel[2]};
  return out;
}

}  // namespace detail

/// Inertial-frame position of the payload bottom.
inline Vec3 payload_pose(const GeneralizedCoordinates& q, const BaseMotionSample& base,
                         const CraneParameters& prm) {
  const Vec7 qv = q.vector();
  double qa[7], qd[7] = {0, 0, 0, 0, 0, 0, 0};
  for (int i = 0; i < 7; ++i) qa[i] = qv[i];
  const auto k = detail::kinematics(qa, qd, detail::lift_values(base), prm);
  const auto p = k.payload_top + prm.payload_len * k.payload_dir;
  return {p.x, p.y, p.z};
}

/// Inertial-frame velocity of the payload bottom, including base motion.
inline Vec3 payload_velocity(const CraneState& x, const BaseMotionSample& base,
                             const CraneParameters& prm) {
  const Vec7 qv = x.q.vector();
  double qa[7], qd[7];
  for (int i = 0; i < 7; ++i) {
    qa[i] = qv[i];
    qd[i] = x.qdot[i];
  }
  const auto k = detail::kinematics(qa, qd, detail::lift_values(base), prm);
  const auto v = k.v_payload_top + prm.payload_len * cross(k.omega_payload, k.payload_dir);
  return {v.x, v.y, v.z};
}

/// Jacobian of the payload-bottom position w.r.t. q (exact, via duals).
inline Eigen::Matrix<double, 3, 7> payload_pose_jacobian(const GeneralizedCoordinates& q,
                                                         const BaseMotionSample& base,
                                                         const CraneParameters& prm) {
  const Vec7 qv = q.vector();
  G7 qa[7], qd[7];
  for (int i = 0; i < 7; ++i) {
    qa[i] = G7::seeded(qv[i], i);
    qd[i] = G7(0.0);
  }
  detail::BaseLift<G7> b;
  for (int i = 0; i < 3; ++i) {
    b.ang[i] = G7(base.angles[i]);
    b.rate[i] = G7(0.0);
  }
  b.trans = {G7(base.translation[0]), G7(base.translation[1]), G7(base.translation[2])};
  b.trans_vel = {G7(0.0), G7(0.0), G7(0.0)};
  const auto k = detail::kinematics(qa, qd, b, prm);
  const auto p = k.payload_top + G7(prm.payload_len) * k.payload_dir;
  Eigen::Matrix<double, 3, 7> jac;
  for (int j = 0; j < 7; ++j) {
    jac(0, j) = p.x.d[j];
    jac(1, j) = p.y.d[j];
    jac(2, j) = p.z.d[j];
  }
  return jac;
}

/// Kinetic energy T_e(q, qdot, d_s, d_s_dot) >= 0.
inline double kinetic_energy(const CraneState& x, const BaseMotionSample& base,
                             const CraneParameters& prm) {
  const Vec7 qv = x.q.vector();
  double qa[7], qd[7];
  for (int i = 0; i < 7; ++i) {
    qa[i] = qv[i];
    qd[i] = x.qdot[i];
  }
  return detail::kinetic_energy_impl(qa, qd, detail::lift_values(base), prm);
}

/// Potential energy V_e(q, d_s); datum is inertial z = 0.
inline double potential_energy(const GeneralizedCoordinates& q, const BaseMotionSample& base,
                               const CraneParameters& prm) {
  const Vec7 qv = q.vector();
  double qa[7];
  for (int i = 0; i < 7; ++i) qa[i] = qv[i];
  return detail::potential_energy_impl(qa, detail::lift_values(base), prm);
}

/// Inertia matrix D(q) = d^2 T_e / d qdot^2 with base rates frozen at zero.
inline Mat7 mass_matrix(const GeneralizedCoordinates& q, const CraneParameters& prm) {
  double qa[7];
  const Vec7 qv = q.vector();
  for (int i = 0; i < 7; ++i) qa[i] = qv[i];
  detail::BaseLift<double> b;
  for (int i = 0; i < 3; ++i) {
    b.ang[i] = 0.0;
    b.rate[i] = 0.0;
  }
  b.trans = {0.0, 0.0, 0.0};
  b.trans_vel = {0.0, 0.0, 0.0};
  const auto vb = detail::velocity_basis(qa, b, prm);

  const double r2 = prm.payload_radius * prm.payload_radius;
  const double i_axial = 0.5 * prm.payload_mass * r2;
  const double i_trans = prm.payload_mass * (3.0 * r2 + prm.payload_len * prm.payload_len) / 12.0;
  Mat7 D;
  for (int i = 0; i < 7; ++i)
    for (int j = i; j < 7; ++j) {
      double v = prm.payload_mass * dot(vb.Jcom[i], vb.Jcom[j]);
      if (i < 2 && j < 2) v += (prm.boom_mass / 3.0) * dot(vb.Jw[i], vb.Jw[j]);
      if (i >= 5 && j >= 5) {
        const double di = dot(vb.Jom[i - 5], vb.d);
        const double dj = dot(vb.Jom[j - 5], vb.d);
        v += i_trans * (dot(vb.Jom[i - 5], vb.Jom[j - 5]) - di * dj) + i_axial * di * dj;
      }
      D(i, j) = D(j, i) = v;
    }
  const Eigen::LLT<Mat7> llt(D - 1e-9 * Mat7::Identity());
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("mass_matrix: near-singular inertia (min eigenvalue < 1e-9)");
  return D;
}

/// Reference form of mass_matrix by exact polarization of the kinetic energy
/// (T_e is exactly quadratic in the rates). Slow; used to verify the
/// basis-product form above.
inline Mat7 reference_mass_matrix(const GeneralizedCoordinates& q, const CraneParameters& prm) {
  double qa[7];
  const Vec7 qv = q.vector();
  for (int i = 0; i < 7; ++i) qa[i] = qv[i];
  detail::BaseLift<double> b;
  for (int i = 0; i < 3; ++i) {
    b.ang[i] = 0.0;
    b.rate[i] = 0.0;
  }
  b.trans = {0.0, 0.0, 0.0};
  b.trans_vel = {0.0, 0.0, 0.0};

  const auto T = [&](const double qd[7]) { return detail::kinetic_energy_impl(qa, qd, b, prm); };
  double single[7];
  for (int i = 0; i < 7; ++i) {
    double qd[7] = {0, 0, 0, 0, 0, 0, 0};
    qd[i] = 1.0;
    single[i] = T(qd);
  }
  Mat7 D;
  for (int i = 0; i < 7; ++i) {
    D(i, i) = 2.0 * single[i];
    for (int j = i + 1; j < 7; ++j) {
      double qd[7] = {0, 0, 0, 0, 0, 0, 0};
      qd[i] = 1.0;
      qd[j] = 1.0;
      D(i, j) = D(j, i) = T(qd) - single[i] - single[j];
    }
  }
  const Eigen::SelfAdjointEigenSolver<Mat7> eig(D);
  if (eig.eigenvalues().minCoeff() < 1e-9)
    throw std::runtime_error("mass_matrix: near-singular inertia (min eigenvalue < 1e-9)");
  return D;
}

/// Bias vector H(q, qdot, d_s, d_s_dot, d_s_ddot): everything in the
/// Euler-Lagrange equations except D(q) qddot, i.e. D qddot + H = B u_tilde.
/// H = d/dt(dT/dqdot)|_{qddot=0} - dT/dq + dV/dq, all exact: the momentum
/// rate from a time-dual pass over the velocity basis, the q-gradients from a
/// forward-gradient pass over the energies.
inline Vec7 bias_forces(const CraneState& x, const BaseMotionSample& base,
                        const CraneParameters& prm) {
  using TD = Grad<double, 1>;
  const Vec7 qv = x.q.vector();

  TD qa[7], qdc[7];
  for (int i = 0; i < 7; ++i) {
    qa[i] = TD::seeded(qv[i], 0);
    qa[i].d[0] = x.qdot[i];
    qdc[i] = TD(x.qdot[i]);  // held constant: qddot = 0
  }
  detail::BaseLift<TD> bt;
  for (int i = 0; i < 3; ++i) {
    bt.ang[i] = TD::seeded(base.angles[i], 0);
    bt.ang[i].d[0] = base.angle_rates[i];
    bt.rate[i] = TD::seeded(base.angle_rates[i], 0);
    bt.rate[i].d[0] = base.angle_accels[i];
  }
  TD tr[3], tv[3];
  for (int i = 0; i < 3; ++i) {
    tr[i] = TD::seeded(base.translation[i], 0);
    tr[i].d[0] = base.translation_vel[i];
    tv[i] = TD::seeded(base.translation_vel[i], 0);
    tv[i].d[0] = base.translation_accel[i];
  }
  bt.trans = {tr[0], tr[1], tr[2]};
  bt.trans_vel = {tv[0], tv[1], tv[2]};

  const auto vb = detail::velocity_basis(qa, bt, prm);
  TD m[7];
  detail::momentum_from_basis(vb, qdc, prm, m);

  // q-gradients of the energies.
  G7 qg[7], qdg[7];
  for (int i = 0; i < 7; ++i) {
    qg[i] = G7::seeded(qv[i], i);
    qdg[i] = G7(x.qdot[i]);
  }
  detail::BaseLift<G7> bg;
  for (int i = 0; i < 3; ++i) {
    bg.ang[i] = G7(base.angles[i]);
    bg.rate[i] = G7(base.angle_rates[i]);
  }
  bg.trans = {G7(base.translation[0]), G7(base.translation[1]), G7(base.translation[2])};
  bg.trans_vel = {G7(base.translation_vel[0]), G7(base.translation_vel[1]),
                  G7(base.translation_vel[2])};
  const G7 Tq = detail::kinetic_energy_impl(qg, qdg, bg, prm);
  const G7 Vq = detail::potential_energy_impl(qg, bg, prm);

  Vec7 h;
  for (int i = 0; i < 7; ++i) h[i] = m[i].d[0] - (Tq.d[i] - Vq.d[i]);
  return h;
}

/// Reference form of bias_forces with the momentum rate from a nested dual
/// pass (time over q-gradient) of the kinetic energy itself. Slow; used to
/// verify the basis form above.
inline Vec7 reference_bias_forces(const CraneState& x, const BaseMotionSample& base,
                                  const CraneParameters& prm) {
  const Vec7 qv = x.q.vector();

  // Pass 1: momentum m = dT/dqdot and its time derivative along the
  // trajectory with qddot = 0. Outer derivative channel is time.
  TimeG7 qa[7], qd[7];
  for (int i = 0; i < 7; ++i) {
    TimeG7 qi(G7(qv[i]));
    qi.d[0] = G7(x.qdot[i]);
    qa[i] = qi;
    qd[i] = TimeG7(G7::seeded(x.qdot[i], i));  // gradient seed; qddot = 0
  }
  detail::BaseLift<TimeG7> bt;
  for (int i = 0; i < 3; ++i) {
    TimeG7 a(G7(base.angles[i]));
    a.d[0] = G7(base.angle_rates[i]);
    bt.ang[i] = a;
    TimeG7 r(G7(base.angle_rates[i]));
    r.d[0] = G7(base.angle_accels[i]);
    bt.rate[i] = r;
  }
  for (int i = 0; i < 3; ++i) {
    TimeG7 tr(G7(base.translation[i]));
    tr.d[0] = G7(base.translation_vel[i]);
    TimeG7 tv(G7(base.translation_vel[i]));
    tv.d[0] = G7(base.translation_accel[i]);
    if (i == 0) {
      bt.trans.x = tr;
      bt.trans_vel.x = tv;
    } else if (i == 1) {
      bt.trans.y = tr;
      bt.trans_vel.y = tv;
    } else {
      bt.trans.z = tr;
      bt.trans_vel.z = tv;
    }
  }
  const TimeG7 T = detail::kinetic_energy_impl(qa, qd, bt, prm);

  // Pass 2: dL/dq with gradient seeds on q.
  G7 qg[7], qdg[7];
  for (int i = 0; i < 7; ++i) {
    qg[i] = G7::seeded(qv[i], i);
    qdg[i] = G7(x.qdot[i]);
  }
  detail::BaseLift<G7> bg;
  for (int i = 0; i < 3; ++i) {
    bg.ang[i] = G7(base.angles[i]);
    bg.rate[i] = G7(base.angle_rates[i]);
  }
  bg.trans = {G7(base.translation[0]), G7(base.translation[1]), G7(base.translation[2])};
  bg.trans_vel = {G7(base.translation_vel[0]), G7(base.translation_vel[1]),
                  G7(base.translation_vel[2])};
  const G7 Tq = detail::kinetic_energy_impl(qg, qdg, bg, prm);
  const G7 Vq = detail::potential_energy_impl(qg, bg, prm);

  Vec7 h;
  for (int i = 0; i < 7; ++i) h[i] = T.d[0].d[i] - (Tq.d[i] - Vq.d[i]);
  return h;
}

namespace detail {

/// Passive-block pieces of the velocity-actuated model, shared by f and g.
struct Assembly {
  Eigen::Matrix<double, 4, 3> d21;
  Eigen::LLT<Mat4> d22_llt;
  Eigen::Matrix<double, 4, 1> h2;
};

inline Assembly assemble(const CraneState& x, const BaseMotionSample& base,
                         const CraneParameters& prm) {
  const Mat7 D = mass_matrix(x.q, prm);
  const Vec7 H = bias_forces(x, base, prm);
  Assembly a;
  a.d21 = D.block<4, 3>(3, 0);
  a.d22_llt.compute(D.block<4, 4>(3, 3));
  if (a.d22_llt.info() != Eigen::Success)
    throw std::runtime_error("vector_field: passive inertia block not positive definite");
  a.h2 = H.tail<4>();
  return a;
}

}  // namespace detail

/// xdot = f(t, x) + g(x) u for the velocity-actuated control-affine model:
/// actuated accelerations follow sigma_a qdd1 + qd1 = u, the passive block is
/// eliminated by forward substitution of the lower block-triangular system.
inline Vec14 vector_field(const CraneState& x, const VelocityCommand& u,
                          const BaseMotionSample& base, const CraneParameters& prm) {
  const auto a = detail::assemble(x, base, prm);
  Vec14 xdot;
  xdot.head<7>() = x.qdot;
  const Vec3 qdd1 =
      (u.vector() - x.qdot.head<3>()).cwiseQuotient(prm.actuator_time_constants);
  xdot.segment<3>(7) = qdd1;
  xdot.tail<4>() = a.d22_llt.solve(-(a.h2 + a.d21 * qdd1));
  return xdot;
}

inline Vec14 vector_field(double t, const CraneState& x, const VelocityCommand& u,
                          const BaseSignal& base_signal, const CraneParameters& prm) {
  return vector_field(x, u, base_signal(t), prm);
}

/// Perturbed dynamics xdot = f + g u + delta_e(t).
inline Vec14 perturbed_vector_field(double t, const CraneState& x, const VelocityCommand& u,
                                    const UncertaintyRealization& delta,
                                    const BaseSignal& base_signal, const CraneParameters& prm) {
  return vector_field(x, u, base_signal(t), prm) + delta.eval(t);
}

/// Torque-level plant of the raw Euler-Lagrange model with u_tilde = 0:
/// D(q) qddot + H = 0. Used for conservation checks; never at runtime.
inline Vec14 torque_free_vector_field(const CraneState& x, const BaseMotionSample& base,
                                      const CraneParameters& prm) {
  const Mat7 D = mass_matrix(x.q, prm);
  const Vec7 H = bias_forces(x, base, prm);
  Vec14 xdot;
  xdot.head<7>() = x.qdot;
  xdot.tail<7>() = D.llt().solve(-H);
  return xdot;
}

}  // namespace crane
