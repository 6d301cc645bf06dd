#pragma once

// R-ZOCBF machinery: the class-K bound, the Theta gap between the nominal
// end-of-interval safety value and the worst inter-sample perturbed value,
// the one-step barrier residual, and the sampling-based online adaptation of
// the robustness margin delta_t.
//
// The core is generic over (flow-grid, safety-function) callables; crane
// bindings live at the bottom. Evaluation order of the max is fixed (samples
// outer, tau inner, strict improvement) so results are identical regardless
// of how callers parallelize sample propagation.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "crane/integrator.hpp"
#include "crane/math.hpp"
#include "crane/safety.hpp"
#include "crane/types.hpp"

namespace crane {

struct BarrierConfig {
  double alpha_gain = 0.5;        ///< gamma_alpha in (0, 1]; alpha(r) = gamma_alpha r
  int sample_count = 40;          ///< N
  Eigen::VectorXd ball_radii;     ///< per-state Delta (dim = state dim)
  double tau_step = (1.0 / 30.0) / 4.0;  ///< Delta_tau; T / Delta_tau must be integer
  std::uint64_t rng_seed = 1;
  bool include_alpha_offset = false;  ///< fold alpha(h(t_k, x_k)) into the sampled gap
  Vec3 target_ball = Vec3::Zero();    ///< target-position sampling radius [m]

  void validate(double sample_period, int dim) const {
    if (!(alpha_gain > 0.0 && alpha_gain <= 1.0))
      throw std::invalid_argument("BarrierConfig: alpha_gain must be in (0, 1]");
    if (sample_count < 1) throw std::invalid_argument("BarrierConfig: sample_count >= 1");
    if (ball_radii.size() != dim || (ball_radii.array() < 0.0).any())
      throw std::invalid_argument("BarrierConfig: bad ball_radii");
    const double ratio = sample_period / tau_step;
    if (tau_step <= 0.0 || std::abs(ratio - std::lround(ratio)) > 1e-9)
      throw std::invalid_argument("BarrierConfig: tau_step must divide T");
  }

  /// Default per-state sampling radii for the crane (simulated uncertainty
  /// bounds: 2 deg angles, 3 deg/s actuated rates, 4 deg/s swing rates,
  /// 0.04 m tether length, 0.08 m/s tether rate).
  static Eigen::VectorXd crane_default_radii() {
    const double deg = std::numbers::pi / 180.0;
    Eigen::VectorXd r(14);
    r << 2 * deg, 2 * deg, 0.04, 2 * deg, 2 * deg, 2 * deg, 2 * deg,
        3 * deg, 3 * deg, 0.08, 4 * deg, 4 * deg, 4 * deg, 4 * deg;
    return r;
  }
};

/// The adapted robustness margin and the binding sample.
struct DeltaResult {
  double delta = 0.0;  ///< delta_t >= 0
  int worst_sample_index = -1;
  double worst_tau = 0.0;
};

/// Linear class-K function alpha(r) = gain * r; alpha(r) <= r for gain <= 1.
inline double class_k(double r, double alpha_gain) { return alpha_gain * r; }

/// N seeded samples with |x_i - x|_j <= Delta_j per component. When N allows,
/// the 2*dim axis-extreme points come first; the rest are uniform in the box.
inline std::vector<Eigen::VectorXd> sample_ball_generic(const Eigen::VectorXd& x,
                                                        const Eigen::VectorXd& radii, int count,
                                                        std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_ball: count >= 1");
  const int dim = static_cast<int>(x.size());
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  if (count >= 2 * dim) {
    for (int j = 0; j < dim; ++j) {
      Eigen::VectorXd hi = x, lo = x;
      hi[j] += radii[j];
      lo[j] -= radii[j];
      out.push_back(hi);
      out.push_back(lo);
    }
  }
  std::mt19937_64 rng(seed);
  while (static_cast<int>(out.size()) < count) {
    Eigen::VectorXd s = x;
    for (int j = 0; j < dim; ++j) s[j] += uniform_sym(rng, radii[j]);
    out.push_back(std::move(s));
  }
  return out;
}

/// Seeded per-sample target-position offsets within the target ball.
inline std::vector<Vec3> sample_target_offsets(int count, const Vec3& radii, std::uint64_t seed) {
  std::vector<Vec3> out;
  out.reserve(count);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  for (int i = 0; i < count; ++i) {
    Vec3 o;
    for (int j = 0; j < 3; ++j) o[j] = uniform_sym(rng, radii[j]);
    out.push_back(o);
  }
  return out;
}

/// Generic delta_t adaptation.
///   flow_grid_fn(t, x) -> states of the nominal flow under the held previous
///     input at tau = 0, Delta_tau, ..., T;
///   h_fn(t, x, target_offset) -> safety value.
/// delta_t = max(0, max_{i,tau} [h(t+T, F_T(x)) - h(t+tau, F_tau(x_i))] + offset).
template <class FlowGridFn, class HFn>
DeltaResult adapt_delta_generic(double t_k, const Eigen::VectorXd& x_k, double sample_period,
                                const BarrierConfig& cfg, const FlowGridFn& flow_grid_fn,
                                const HFn& h_fn) {
  cfg.validate(sample_period, static_cast<int>(x_k.size()));
  const auto nominal = flow_grid_fn(t_k, x_k);
  const double end_term = h_fn(t_k + sample_period, nominal.back(), Vec3::Zero());
  const double offset =
      cfg.include_alpha_offset ? class_k(h_fn(t_k, x_k, Vec3::Zero()), cfg.alpha_gain) : 0.0;

  const auto samples = sample_ball_generic(x_k, cfg.ball_radii, cfg.sample_count, cfg.rng_seed);
  const auto target_offsets = sample_target_offsets(cfg.sample_count, cfg.target_ball, cfg.rng_seed);

  DeltaResult res;
  res.delta = 0.0;
  for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
    const auto grid = flow_grid_fn(t_k, samples[i]);
    const double dt = sample_period / static_cast<double>(grid.size() - 1);
    for (int j = 0; j < static_cast<int>(grid.size()); ++j) {
      const double tau = j * dt;
      const double gap = end_term - h_fn(t_k + tau, grid[j], target_offsets[i]) + offset;
      if (gap > res.delta) {
        res.delta = gap;
        res.worst_sample_index = i;
        res.worst_tau = tau;
      }
    }
  }
  return res;
}

/// Generic Theta gap, with the continuum inf over tau approximated by the
/// grid min (the grid includes tau = T).
template <class FlowGridFn, class PerturbedGridFn, class HFn>
double theta_gap_generic(double t_k, const Eigen::VectorXd& x_k, double sample_period,
                         const FlowGridFn& flow_grid_fn, const PerturbedGridFn& perturbed_grid_fn,
                         const HFn& h_fn) {
  const auto nominal = flow_grid_fn(t_k, x_k);
  const double end_term = h_fn(t_k + sample_period, nominal.back(), Vec3::Zero());
  const auto perturbed = perturbed_grid_fn(t_k, x_k);
  const double dt = sample_period / static_cast<double>(perturbed.size() - 1);
  double worst = std::numeric_limits<double>::infinity();
  for (int j = 0; j < static_cast<int>(perturbed.size()); ++j)
    worst = std::min(worst, h_fn(t_k + j * dt, perturbed[j], Vec3::Zero()));
  return end_term - worst;
}

// ---------------------------------------------------------------------------
// Crane bindings

/// Everything needed to evaluate barrier quantities on the crane.
struct CraneSafetySystem {
  CraneParameters crane;
  BaseSignal base;
  TargetSafetyParams target;
  FlowConfig flow;  ///< sample period T; substeps define the stored grid

  FlowConfig barrier_flow(const BarrierConfig& cfg) const {
    FlowConfig f = flow;
    f.substeps = static_cast<int>(std::lround(flow.sample_period / cfg.tau_step));
    return f;
  }
};

inline std::vector<CraneState> sample_ball(const CraneState& x, const Eigen::VectorXd& radii,
                                           int count, std::uint64_t seed) {
  const auto raw = sample_ball_generic(x.vector(), radii, count, seed);
  std::vector<CraneState> out;
  out.reserve(raw.size());
  for (const auto& v : raw) out.push_back(CraneState::from_vector(Vec14(v)));
  return out;
}

inline DeltaResult adapt_delta(double t_k, const CraneState& x_k, const VelocityCommand& u_prev,
                               const BarrierConfig& cfg, const CraneSafetySystem& sys) {
  const FlowConfig fcfg = sys.barrier_flow(cfg);
  const auto flow_fn = [&](double t, const Eigen::VectorXd& x) {
    const auto grid = flow_grid(t, CraneState::from_vector(Vec14(x)), u_prev, fcfg, sys.base, sys.crane);
    std::vector<Eigen::VectorXd> out;
    out.reserve(grid.size());
    for (const auto& s : grid) out.push_back(s.vector());
    return out;
  };
  const auto h_fn = [&](double t, const Eigen::VectorXd& x, const Vec3& target_offset) {
    return target_safety(t, CraneState::from_vector(Vec14(x)), sys.target, sys.base(t), sys.crane,
                         target_offset);
  };
  return adapt_delta_generic(t_k, x_k.vector(), fcfg.sample_period, cfg, flow_fn, h_fn);
}

/// Theta(t_k, x_k, u, delta_e) on the crane.
inline double theta_gap(double t_k, const CraneState& x_k, const VelocityCommand& u,
                        const UncertaintyRealization& delta, const BarrierConfig& cfg,
                        const CraneSafetySystem& sys) {
  const FlowConfig fcfg = sys.barrier_flow(cfg);
  const auto flow_fn = [&](double t, const Eigen::VectorXd& x) {
    const auto grid = flow_grid(t, CraneState::from_vector(Vec14(x)), u, fcfg, sys.base, sys.crane);
    std::vector<Eigen::VectorXd> out;
    for (const auto& s : grid) out.push_back(s.vector());
    return out;
  };
  const auto pert_fn = [&](double t, const Eigen::VectorXd& x) {
    const auto grid = perturbed_flow_grid(t, CraneState::from_vector(Vec14(x)), u, delta, fcfg,
                                          sys.base, sys.crane);
    std::vector<Eigen::VectorXd> out;
    for (const auto& s : grid) out.push_back(s.vector());
    return out;
  };
  const auto h_fn = [&](double t, const Eigen::VectorXd& x, const Vec3& off) {
    return target_safety(t, CraneState::from_vector(Vec14(x)), sys.target, sys.base(t), sys.crane, off);
  };
  return theta_gap_generic(t_k, x_k.vector(), fcfg.sample_period, flow_fn, pert_fn, h_fn);
}

/// One-step barrier residual; >= 0 iff the R-ZOCBF condition holds:
/// h(t_{k+1}, F(t_k, x_k, u_k)) - h(t_k, x_k) - delta_t >= -alpha(h(t_k, x_k)).
inline double rzocbf_margin(double t_k, const CraneState& x_k, const VelocityCommand& u_k,
                            double delta_t, const BarrierConfig& cfg,
                            const CraneSafetySystem& sys) {
  const CraneState next = step(t_k, x_k, u_k, sys.flow, sys.base, sys.crane);
  const double h_now = target_safety(t_k, x_k, sys.target, sys.base(t_k), sys.crane);
  const double h_next = target_safety(t_k + sys.flow.sample_period, next, sys.target,
                                      sys.base(t_k + sys.flow.sample_period), sys.crane);
  return h_next - h_now - delta_t + class_k(h_now, cfg.alpha_gain);
}

}  // namespace crane
