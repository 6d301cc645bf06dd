#pragma once

// Nonlinear MPC over the crane: multiple-shooting transcription of the
// tracking OCP with per-node box constraints and the one-step robust safety
// (R-ZOCBF) row on h_t, solved by a single Gauss-Newton SQP real-time
// iteration per control step. The shooting states are condensed onto the
// inputs (plus L1 slacks) before the interior-point QP solve; the expansion
// applies the full Newton step, so the result equals the uncondensed SQP
// step.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "crane/barrier.hpp"
#include "crane/dynamics.hpp"
#include "crane/integrator.hpp"
#include "crane/qp.hpp"
#include "crane/safety.hpp"
#include "crane/types.hpp"

namespace crane {

struct ReferenceTrajectory {
  std::function<Vec3(double)> pos;  ///< r_p(t) [m]
  std::function<Vec3(double)> vel;  ///< r_p_dot(t) [m/s]

  void validate() const {
    if (!pos || !vel) throw std::invalid_argument("ReferenceTrajectory: pos/vel unset");
  }
};

struct MeasuredInput {
  Vec3 u_m = Vec3::Zero();  ///< measured joint rates qdot_1 [rad/s, rad/s, m/s]
};

struct OCPConfig {
  double horizon = 1.0;  ///< T_f [s]
  int node_count = 30;   ///< N_T
  Vec3 w_input = Vec3::Constant(0.1);        ///< W1 diag
  Vec3 w_input_match = Vec3::Constant(0.05); ///< W2 diag
  Vec3 w_tracking = Vec3::Constant(50.0);    ///< W3 diag
  Vec3 w_velocity = Vec3::Constant(5.0);     ///< W4 diag
  Eigen::Vector2d w_payload_rate = Eigen::Vector2d::Ones();  ///< W5 diag
  Eigen::Vector2d w_rope_rate = Eigen::Vector2d::Ones();     ///< W6 diag
  int sqp_iters = 1;           ///< RTI: one linearize/solve/update per step
  double slack_weight = 1e4;   ///< L1 exact-penalty weight, >> tracking weights
  int node_substeps = 1;       ///< RK4 substeps of the shooting node map
  double fd_step = 1e-6;       ///< central-difference base step (scaled)
  double kkt_accept = 1e-5;    ///< reject QP steps with a worse KKT residual
  QPSettings qp{1e-8, 100, 1e-11};

  double node_period() const { return horizon / node_count; }

  void validate(double sample_period) const {
    if (horizon <= 0.0 || node_count < 2)
      throw std::invalid_argument("OCPConfig: need T_f > 0 and N_T >= 2");
    if ((w_input.array() < 0).any() || (w_input_match.array() < 0).any() ||
        (w_tracking.array() < 0).any() || (w_velocity.array() < 0).any() ||
        (w_payload_rate.array() < 0).any() || (w_rope_rate.array() < 0).any())
      throw std::invalid_argument("OCPConfig: weights must be nonnegative");
    if (sqp_iters < 1 || node_substeps < 1 || slack_weight <= 0.0 || fd_step <= 0.0)
      throw std::invalid_argument("OCPConfig: bad solver settings");
    if (std::abs(node_period() - sample_period) > 1e-12)
      throw std::invalid_argument("OCPConfig: T_f / N_T must equal the sampling period");
  }
};

struct OCPSolution {
  std::vector<CraneState> states;        ///< N_T + 1 nodes
  std::vector<VelocityCommand> inputs;   ///< N_T nodes
  Eigen::VectorXd slack_box;             ///< per node 1..N_T
  Eigen::VectorXd slack_barrier;         ///< per node 0..N_T-1
  double kkt_residual = 0.0;
  double cost = 0.0;
  QPStatus qp_status = QPStatus::solved;
  int qp_iterations = 0;
};

/// J(t, x, u): the six-term weighted least-squares stage integrand.
inline double stage_cost(double t, const CraneState& x, const VelocityCommand& u,
                         const MeasuredInput& um, const ReferenceTrajectory& ref,
                         const OCPConfig& cfg, const BaseMotionSample& base,
                         const CraneParameters& prm) {
  const Vec3 uv = u.vector();
  const Vec3 p = payload_pose(x.q, base, prm);
  const Vec3 v = payload_velocity(x, base, prm);
  const Eigen::Vector2d wp(x.qdot[5], x.qdot[6]);
  const Eigen::Vector2d wr(x.qdot[3], x.qdot[4]);
  return uv.dot(cfg.w_input.cwiseProduct(uv)) +
         (uv - um.u_m).dot(cfg.w_input_match.cwiseProduct(uv - um.u_m)) +
         (p - ref.pos(t)).dot(cfg.w_tracking.cwiseProduct(p - ref.pos(t))) +
         (v - ref.vel(t)).dot(cfg.w_velocity.cwiseProduct(v - ref.vel(t))) +
         wp.dot(cfg.w_payload_rate.cwiseProduct(wp)) + wr.dot(cfg.w_rope_rate.cwiseProduct(wr));
}

/// J_T: the four state-only terms of the stage integrand at the horizon end.
inline double terminal_cost(double t, const CraneState& x, const ReferenceTrajectory& ref,
                            const OCPConfig& cfg, const BaseMotionSample& base,
                            const CraneParameters& prm) {
  const Vec3 p = payload_pose(x.q, base, prm);
  const Vec3 v = payload_velocity(x, base, prm);
  const Eigen::Vector2d wp(x.qdot[5], x.qdot[6]);
  const Eigen::Vector2d wr(x.qdot[3], x.qdot[4]);
  return (p - ref.pos(t)).dot(cfg.w_tracking.cwiseProduct(p - ref.pos(t))) +
         (v - ref.vel(t)).dot(cfg.w_velocity.cwiseProduct(v - ref.vel(t))) +
         wp.dot(cfg.w_payload_rate.cwiseProduct(wp)) + wr.dot(cfg.w_rope_rate.cwiseProduct(wr));
}

/// All fixed data of one OCP instance: the nonlinear program each SQP
/// iteration linearizes.
struct TranscribedOCP {
  CraneSafetySystem sys;
  double t0 = 0.0;
  CraneState x0;
  MeasuredInput um;
  ReferenceTrajectory ref;
  double delta = 0.0;       ///< robustness margin in the safety row
  double alpha_gain = 0.5;  ///< class-K gain in the safety row
  SafetyBox box;
  OCPConfig cfg;
  FlowConfig node_flow;     ///< node map: one node period, cfg.node_substeps

  double node_time(int k) const { return t0 + k * cfg.node_period(); }

  CraneState node_map(int k, const CraneState& x, const VelocityCommand& u) const {
    return step(node_time(k), x, u, node_flow, sys.base, sys.crane);
  }

  /// NLP objective (trapezoid-free rectangle rule: h * stage + terminal).
  double objective(const std::vector<CraneState>& xs,
                   const std::vector<VelocityCommand>& us) const {
    const double h = cfg.node_period();
    double J = 0.0;
    for (int k = 0; k < cfg.node_count; ++k)
      J += h * stage_cost(node_time(k), xs[k], us[k], um, ref, cfg, sys.base(node_time(k)),
                          sys.crane);
    J += terminal_cost(node_time(cfg.node_count), xs[cfg.node_count], ref, cfg,
                       sys.base(node_time(cfg.node_count)), sys.crane);
    return J;
  }

  /// Shooting-gap infinity norms |F(x_k, u_k) - x_{k+1}|, one per interval.
  Eigen::VectorXd dynamics_defects(const std::vector<CraneState>& xs,
                                   const std::vector<VelocityCommand>& us) const {
    Eigen::VectorXd d(cfg.node_count);
    for (int k = 0; k < cfg.node_count; ++k)
      d[k] = (node_map(k, xs[k], us[k]).vector() - xs[k + 1].vector()).lpNorm<Eigen::Infinity>();
    return d;
  }

  /// Worst violation over all hard-constraint and (slack-free) safety rows of
  /// a candidate trajectory; <= 0 means feasible.
  double max_constraint_violation(const std::vector<CraneState>& xs,
                                  const std::vector<VelocityCommand>& us) const {
    double worst = -std::numeric_limits<double>::infinity();
    const auto& lo = sys.crane.input_bounds.lower;
    const auto& hi = sys.crane.input_bounds.upper;
    for (int k = 0; k < cfg.node_count; ++k) {
      const Vec3 u = us[k].vector();
      worst = std::max(worst, (lo - u).maxCoeff());
      worst = std::max(worst, (u - hi).maxCoeff());
    }
    for (int k = 1; k <= cfg.node_count; ++k) {
      const double tk = node_time(k);
      const Vec14 xv = xs[k].vector();
      worst = std::max(worst, (sys.crane.state_lower - xv).maxCoeff());
      worst = std::max(worst, (xv - sys.crane.state_upper).maxCoeff());
      const auto hb = box_safety(tk, xs[k], box, sys.base(tk), sys.crane);
      worst = std::max(worst, -hb.minCoeff());
    }
    for (int k = 0; k < cfg.node_count; ++k) {
      const double ht0 = target_safety(node_time(k), xs[k], sys.target, sys.base(node_time(k)),
                                       sys.crane);
      const double ht1 = target_safety(node_time(k + 1), xs[k + 1], sys.target,
                                       sys.base(node_time(k + 1)), sys.crane);
      worst = std::max(worst, -(ht1 - (1.0 - alpha_gain) * ht0 - delta));
    }
    return worst;
  }
};

inline TranscribedOCP transcribe(const CraneSafetySystem& sys, double t0, const CraneState& x0,
                                 const MeasuredInput& um, const ReferenceTrajectory& ref,
                                 const DeltaResult& delta, double alpha_gain,
                                 const SafetyBox& box, const OCPConfig& cfg) {
  cfg.validate(sys.flow.sample_period);
  ref.validate();
  if (!x0.finite()) throw std::invalid_argument("transcribe: non-finite initial state");
  TranscribedOCP ocp{sys, t0, x0, um, ref, delta.delta, alpha_gain, box, cfg,
                     FlowConfig{cfg.node_period(), cfg.node_substeps}};
  return ocp;
}

/// Condensed Gauss-Newton QP around a trajectory guess. Decision vector
/// z = [du_0..du_{N-1} | s_box_1..N | s_cbf_0..N-1]; the state deviations are
/// dx_k = S_k du + c_k with the shooting equalities eliminated exactly.
struct LinearizedOCP {
  QPProblem qp;
  std::vector<Eigen::MatrixXd> S;  ///< N+1 maps, 14 x 3N
  std::vector<Vec14> c;            ///< N+1 offsets
  int input_dim = 0;               ///< 3N
};

namespace detail {

/// Central-difference Jacobians of the node map at (x, u).
inline void node_jacobians(const TranscribedOCP& ocp, int k, const CraneState& x,
                           const VelocityCommand& u, Eigen::Matrix<double, 14, 14>& A,
                           Eigen::Matrix<double, 14, 3>& B) {
  const Vec14 xv = x.vector();
  for (int j = 0; j < 14; ++j) {
    const double h = ocp.cfg.fd_step * std::max(1.0, std::abs(xv[j]));
    Vec14 xp = xv, xm = xv;
    xp[j] += h;
    xm[j] -= h;
    const Vec14 fp = ocp.node_map(k, CraneState::from_vector(xp), u).vector();
    const Vec14 fm = ocp.node_map(k, CraneState::from_vector(xm), u).vector();
    A.col(j) = (fp - fm) / (2.0 * h);
  }
  const Vec3 uv = u.vector();
  for (int j = 0; j < 3; ++j) {
    const double h = ocp.cfg.fd_step * std::max(1.0, std::abs(uv[j]));
    Vec3 up = uv, um = uv;
    up[j] += h;
    um[j] -= h;
    const Vec14 fp = ocp.node_map(k, x, VelocityCommand::from_vector(up)).vector();
    const Vec14 fm = ocp.node_map(k, x, VelocityCommand::from_vector(um)).vector();
    B.col(j) = (fp - fm) / (2.0 * h);
  }
  if (!A.allFinite() || !B.allFinite())
    throw std::runtime_error("linearize: non-finite dynamics Jacobian");
}

/// d(payload velocity)/dq by central differences (the qdot half is the exact
/// position Jacobian).
inline Eigen::Matrix<double, 3, 7> payload_velocity_jacobian_q(const CraneState& x,
                                                               const BaseMotionSample& base,
                                                               const CraneParameters& prm,
                                                               double fd) {
  Eigen::Matrix<double, 3, 7> J;
  const Vec7 qv = x.q.vector();
  for (int j = 0; j < 7; ++j) {
    const double h = fd * std::max(1.0, std::abs(qv[j]));
    CraneState xp = x, xm = x;
    Vec7 qp = qv, qm = qv;
    qp[j] += h;
    qm[j] -= h;
    xp.q = GeneralizedCoordinates::from_vector(qp);
    xm.q = GeneralizedCoordinates::from_vector(qm);
    J.col(j) = (payload_velocity(xp, base, prm) - payload_velocity(xm, base, prm)) / (2.0 * h);
  }
  return J;
}

}  // namespace detail

inline LinearizedOCP linearize(const TranscribedOCP& ocp, const std::vector<CraneState>& xs,
                               const std::vector<VelocityCommand>& us) {
  const int N = ocp.cfg.node_count;
  if (static_cast<int>(xs.size()) != N + 1 || static_cast<int>(us.size()) != N)
    throw std::invalid_argument("linearize: guess shape mismatch");
  const int nu = 3 * N;
  const int nz = nu + 2 * N;  // inputs + box slacks + barrier slacks
  const double hstep = ocp.cfg.node_period();

  LinearizedOCP lin;
  lin.input_dim = nu;
  lin.S.assign(N + 1, Eigen::MatrixXd::Zero(14, nu));
  lin.c.assign(N + 1, Vec14::Zero());
  lin.c[0] = ocp.x0.vector() - xs[0].vector();

  // Forward condensing sweep.
  for (int k = 0; k < N; ++k) {
    Eigen::Matrix<double, 14, 14> A;
    Eigen::Matrix<double, 14, 3> B;
    detail::node_jacobians(ocp, k, xs[k], us[k], A, B);
    const Vec14 defect = ocp.node_map(k, xs[k], us[k]).vector() - xs[k + 1].vector();
    lin.S[k + 1] = A * lin.S[k];
    lin.S[k + 1].middleCols(3 * k, 3) += B;
    lin.c[k + 1] = A * lin.c[k] + defect;
  }

  QPProblem& qp = lin.qp;
  qp.H = Eigen::MatrixXd::Zero(nz, nz);
  qp.g = Eigen::VectorXd::Zero(nz);
  qp.E.resize(0, nz);
  qp.e.resize(0);

  // Gauss-Newton cost: per node, residual Jacobians w.r.t. (dx_k, du_k),
  // pushed through (S_k, selector) onto du.
  const Vec3 sw1 = ocp.cfg.w_input.cwiseSqrt();
  const Vec3 sw2 = ocp.cfg.w_input_match.cwiseSqrt();
  const Vec3 sw3 = ocp.cfg.w_tracking.cwiseSqrt();
  const Vec3 sw4 = ocp.cfg.w_velocity.cwiseSqrt();
  const Eigen::Vector2d sw5 = ocp.cfg.w_payload_rate.cwiseSqrt();
  const Eigen::Vector2d sw6 = ocp.cfg.w_rope_rate.cwiseSqrt();

  for (int k = 0; k <= N; ++k) {
    const bool terminal = (k == N);
    const double tk = ocp.node_time(k);
    const BaseMotionSample bm = ocp.sys.base(tk);
    const double scale = terminal ? 1.0 : std::sqrt(hstep);

    const Vec3 p = payload_pose(xs[k].q, bm, ocp.sys.crane);
    const Vec3 v = payload_velocity(xs[k], bm, ocp.sys.crane);
    const Eigen::Matrix<double, 3, 7> Jp = payload_pose_jacobian(xs[k].q, bm, ocp.sys.crane);
    const Eigen::Matrix<double, 3, 7> Jvq =
        detail::payload_velocity_jacobian_q(xs[k], bm, ocp.sys.crane, ocp.cfg.fd_step);

    const int nr = terminal ? 10 : 16;
    Eigen::MatrixXd Jx = Eigen::MatrixXd::Zero(nr, 14);
    Eigen::MatrixXd Ju = Eigen::MatrixXd::Zero(nr, 3);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(nr);
    int row = 0;
    if (!terminal) {
      const Vec3 uv = us[k].vector();
      r.segment<3>(row) = scale * sw1.cwiseProduct(uv);
      Ju.block<3, 3>(row, 0) = scale * sw1.asDiagonal();
      row += 3;
      r.segment<3>(row) = scale * sw2.cwiseProduct(uv - ocp.um.u_m);
      Ju.block<3, 3>(row, 0) = scale * sw2.asDiagonal();
      row += 3;
    }
    r.segment<3>(row) = scale * sw3.cwiseProduct(p - ocp.ref.pos(tk));
    Jx.block<3, 7>(row, 0) = scale * sw3.asDiagonal() * Jp;
    row += 3;
    r.segment<3>(row) = scale * sw4.cwiseProduct(v - ocp.ref.vel(tk));
    Jx.block<3, 7>(row, 0) = scale * sw4.asDiagonal() * Jvq;
    Jx.block<3, 7>(row, 7) = scale * sw4.asDiagonal() * Jp;
    row += 3;
    r[row] = scale * sw5[0] * xs[k].qdot[5];
    Jx(row, 12) = scale * sw5[0];
    ++row;
    r[row] = scale * sw5[1] * xs[k].qdot[6];
    Jx(row, 13) = scale * sw5[1];
    ++row;
    r[row] = scale * sw6[0] * xs[k].qdot[3];
    Jx(row, 10) = scale * sw6[0];
    ++row;
    r[row] = scale * sw6[1] * xs[k].qdot[4];
    Jx(row, 11) = scale * sw6[1];
    ++row;

    // Map onto du: J_du = Jx * S_k (+ Ju on the du_k block); residual picks up
    // the c_k shift.
    Eigen::MatrixXd Jdu = Jx * lin.S[k];
    if (!terminal) Jdu.middleCols(3 * k, 3) += Ju;
    const Eigen::VectorXd rs = r + Jx * lin.c[k];
    qp.H.topLeftCorner(nu, nu).noalias() += Jdu.transpose() * Jdu;
    qp.g.head(nu).noalias() += Jdu.transpose() * rs;
  }
  // Linear L1 penalty on the slacks.
  qp.g.segment(nu, 2 * N).setConstant(ocp.cfg.slack_weight);

  // Inequality rows A z >= b. Rows whose constants can never activate under
  // the input box are pruned (|du|_inf is bounded by the input range).
  const double du_max = (ocp.sys.crane.input_bounds.upper - ocp.sys.crane.input_bounds.lower)
                            .lpNorm<Eigen::Infinity>();
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  rows.reserve(10 * N);
  const auto push_soft = [&](const Eigen::VectorXd& grad_du, double margin, int slack_index) {
    // grad_du' du + s >= -margin; prune if inactive for every feasible du
    if (margin > grad_du.lpNorm<1>() * du_max) return;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(nz);
    a.head(nu) = grad_du;
    a[nu + slack_index] = 1.0;
    rows.push_back(std::move(a));
    rhs.push_back(-margin);
  };

  // Hard input bounds.
  for (int k = 0; k < N; ++k) {
    const Vec3 uv = us[k].vector();
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(nz);
      a[3 * k + j] = 1.0;
      rows.push_back(a);
      rhs.push_back(ocp.sys.crane.input_bounds.lower[j] - uv[j]);
      a[3 * k + j] = -1.0;
      rows.push_back(a);
      rhs.push_back(uv[j] - ocp.sys.crane.input_bounds.upper[j]);
    }
  }
  // Slack nonnegativity.
  for (int i = 0; i < 2 * N; ++i) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(nz);
    a[nu + i] = 1.0;
    rows.push_back(a);
    rhs.push_back(0.0);
  }
  // Soft per-node state bounds and free-space box rows (shared slack per
  // node), k = 1..N.
  for (int k = 1; k <= N; ++k) {
    const double tk = ocp.node_time(k);
    const BaseMotionSample bm = ocp.sys.base(tk);
    const Vec14 xlin = xs[k].vector() + lin.c[k];
    for (int j = 0; j < 14; ++j) {
      push_soft(lin.S[k].row(j), xlin[j] - ocp.sys.crane.state_lower[j], k - 1);
      push_soft(-lin.S[k].row(j), ocp.sys.crane.state_upper[j] - xlin[j], k - 1);
    }
    const Vec3 p = payload_pose(xs[k].q, bm, ocp.sys.crane);
    const Eigen::Matrix<double, 3, 7> Jp = payload_pose_jacobian(xs[k].q, bm, ocp.sys.crane);
    const Eigen::MatrixXd JpS = Jp * lin.S[k].topRows(7);
    const Vec3 pshift = Jp * lin.c[k].head<7>();
    for (int j = 0; j < 3; ++j) {
      push_soft(JpS.row(j), p[j] + pshift[j] - ocp.box.lower[j], k - 1);
      push_soft(-JpS.row(j), ocp.box.upper[j] - p[j] - pshift[j], k - 1);
    }
  }
  // R-ZOCBF rows, k = 0..N-1 (slack block 2): never pruned.
  const double retain = 1.0 - ocp.alpha_gain;
  std::vector<double> ht(N + 1);
  std::vector<Vec14> ght(N + 1);
  for (int k = 0; k <= N; ++k) {
    const double tk = ocp.node_time(k);
    const BaseMotionSample bm = ocp.sys.base(tk);
    ht[k] = target_safety(tk, xs[k], ocp.sys.target, bm, ocp.sys.crane);
    ght[k] = target_safety_gradient(tk, xs[k], ocp.sys.target, bm, ocp.sys.crane);
  }
  for (int k = 0; k < N; ++k) {
    const Eigen::VectorXd grad_du =
        lin.S[k + 1].transpose() * ght[k + 1] - retain * (lin.S[k].transpose() * ght[k]);
    const double margin = ht[k + 1] + ght[k + 1].dot(lin.c[k + 1]) -
                          retain * (ht[k] + ght[k].dot(lin.c[k])) - ocp.delta;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(nz);
    a.head(nu) = grad_du;
    a[nu + N + k] = 1.0;
    rows.push_back(std::move(a));
    rhs.push_back(-margin);
  }

  const int m = static_cast<int>(rows.size());
  qp.A.resize(m, nz);
  qp.b.resize(m);
  for (int i = 0; i < m; ++i) {
    qp.A.row(i) = rows[i];
    qp.b[i] = rhs[i];
  }
  if (!qp.H.allFinite() || !qp.g.allFinite() || !qp.A.allFinite())
    throw std::runtime_error("linearize: non-finite QP data");
  return lin;
}

inline OCPSolution make_cold_start(const TranscribedOCP& ocp) {
  OCPSolution s;
  s.states.assign(ocp.cfg.node_count + 1, ocp.x0);
  s.inputs.assign(ocp.cfg.node_count, VelocityCommand{});
  s.slack_box = Eigen::VectorXd::Zero(ocp.cfg.node_count);
  s.slack_barrier = Eigen::VectorXd::Zero(ocp.cfg.node_count);
  return s;
}

/// cfg.sqp_iters Gauss-Newton real-time iterations; full step on the
/// condensed variables (exact on the eliminated shooting equalities). On QP
/// failure the incoming guess is returned untouched with the failure status.
inline OCPSolution sqp_rti_step(const TranscribedOCP& ocp,
                                const std::optional<OCPSolution>& warm = std::nullopt) {
  const int N = ocp.cfg.node_count;
  OCPSolution sol = (warm && static_cast<int>(warm->states.size()) == N + 1 &&
                     static_cast<int>(warm->inputs.size()) == N)
                        ? *warm
                        : make_cold_start(ocp);
  for (int it = 0; it < ocp.cfg.sqp_iters; ++it) {
    const LinearizedOCP lin = linearize(ocp, sol.states, sol.inputs);
    const QPSolution qs = solve_qp(lin.qp, ocp.cfg.qp);
    sol.qp_status = qs.status;
    sol.qp_iterations = qs.iterations;
    sol.kkt_residual =
        qs.z.allFinite() ? qs.kkt_residual() : std::numeric_limits<double>::infinity();
    // A step from an unconverged QP would poison the warm-started trajectory;
    // leave the guess untouched instead.
    if (qs.status == QPStatus::infeasible || !std::isfinite(sol.kkt_residual) ||
        sol.kkt_residual > ocp.cfg.kkt_accept)
      break;
    const Eigen::VectorXd du = qs.z.head(lin.input_dim);
    for (int k = 0; k < N; ++k)
      sol.inputs[k] = VelocityCommand::from_vector(sol.inputs[k].vector() + du.segment<3>(3 * k));
    for (int k = 0; k <= N; ++k)
      sol.states[k] =
          CraneState::from_vector(sol.states[k].vector() + lin.S[k] * du + lin.c[k]);
    sol.slack_box = qs.z.segment(lin.input_dim, N);
    sol.slack_barrier = qs.z.segment(lin.input_dim + N, N);
  }
  sol.cost = ocp.objective(sol.states, sol.inputs);
  return sol;
}

/// Shift-initialization for the next control step: drop node 0, duplicate the
/// last input, extend the tail by one node map.
inline OCPSolution shift_solution(const TranscribedOCP& ocp, const OCPSolution& sol) {
  const int N = ocp.cfg.node_count;
  OCPSolution out = sol;
  for (int k = 0; k < N; ++k) out.states[k] = sol.states[k + 1];
  for (int k = 0; k + 1 < N; ++k) out.inputs[k] = sol.inputs[k + 1];
  out.inputs[N - 1] = sol.inputs[N - 1];
  out.states[N] = step(ocp.node_time(N + 1) - ocp.cfg.node_period(), out.states[N - 1],
                       out.inputs[N - 1], ocp.node_flow, ocp.sys.base, ocp.sys.crane);
  out.slack_box.head(N - 1) = sol.slack_box.tail(N - 1);
  out.slack_box[N - 1] = 0.0;
  out.slack_barrier.head(N - 1) = sol.slack_barrier.tail(N - 1);
  out.slack_barrier[N - 1] = 0.0;
  return out;
}

enum class SafetyMode {
  nominal,  ///< delta_t forced 0, class-K gain 1: plain h_t >= 0 per node
  robust    ///< sampling-adapted delta_t, configured class-K gain
};

struct ControlStepResult {
  VelocityCommand u;
  OCPSolution solution;
  DeltaResult delta;
  SafetyBox box;
  bool failsafe = false;
};

/// Single-owner receding-horizon controller: owns the warm start and the
/// previously applied input. Instances are independent; run one per scenario.
class MpcController {
 public:
  MpcController(CraneSafetySystem sys, OCPConfig ocp_cfg, BarrierConfig barrier_cfg,
                SafetyMode mode, ReferenceTrajectory ref, SafetyBox nominal_platform_box,
                ObstacleSet obstacles = {}, double obstacle_margin = 0.0)
      : sys_(std::move(sys)),
        ocp_cfg_(ocp_cfg),
        barrier_cfg_(barrier_cfg),
        mode_(mode),
        ref_(std::move(ref)),
        nominal_box_(nominal_platform_box),
        obstacles_(std::move(obstacles)),
        margin_(obstacle_margin) {
    ocp_cfg_.validate(sys_.flow.sample_period);
    barrier_cfg_.validate(sys_.flow.sample_period, 14);
    ref_.validate();
  }

  /// One control step at t_k from the measured state and joint rates.
  ControlStepResult step(double t_k, const CraneState& x_meas, const MeasuredInput& u_m) {
    ControlStepResult res;
    if (!x_meas.finite()) {
      res.failsafe = true;
      res.u = VelocityCommand{};
      return res;
    }
    try {
      if (mode_ == SafetyMode::robust)
        res.delta = adapt_delta(t_k, x_meas, u_prev_, barrier_cfg_, sys_);
      else
        res.delta = DeltaResult{0.0, -1, 0.0};
      const double gain = (mode_ == SafetyMode::robust) ? barrier_cfg_.alpha_gain : 1.0;
      res.box = update_box(t_k, sys_.base(t_k), obstacles_, nominal_box_, margin_);
      const TranscribedOCP ocp =
          transcribe(sys_, t_k, x_meas, u_m, ref_, res.delta, gain, res.box, ocp_cfg_);
      res.solution = sqp_rti_step(ocp, warm_);
      if (res.solution.qp_status == QPStatus::infeasible ||
          res.solution.kkt_residual > ocp_cfg_.kkt_accept) {
        res.failsafe = true;
        res.u = u_prev_;
        warm_.reset();  // cold-start the next step from its own measurement
      } else {
        const Vec3 u0 = res.solution.inputs[0]
                            .vector()
                            .cwiseMax(sys_.crane.input_bounds.lower)
                            .cwiseMin(sys_.crane.input_bounds.upper);
        res.u = VelocityCommand::from_vector(u0);
        warm_ = shift_solution(ocp, res.solution);
      }
      u_prev_ = res.u;
    } catch (const std::exception&) {
      res.failsafe = true;
      res.u = VelocityCommand{};
      u_prev_ = res.u;
      warm_.reset();
    }
    return res;
  }

  const VelocityCommand& previous_input() const { return u_prev_; }
  SafetyMode mode() const { return mode_; }
  const CraneSafetySystem& system() const { return sys_; }
  const OCPConfig& ocp_config() const { return ocp_cfg_; }
  const BarrierConfig& barrier_config() const { return barrier_cfg_; }

 private:
  CraneSafetySystem sys_;
  OCPConfig ocp_cfg_;
  BarrierConfig barrier_cfg_;
  SafetyMode mode_;
  ReferenceTrajectory ref_;
  SafetyBox nominal_box_;
  ObstacleSet obstacles_;
  double margin_ = 0.0;
  std::optional<OCPSolution> warm_;
  VelocityCommand u_prev_{};
};

}  // namespace crane
