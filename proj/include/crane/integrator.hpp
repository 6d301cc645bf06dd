#pragma once

// Sample-and-hold flow maps: the nominal discrete map F, partial flows F_tau
// and perturbed flows Phi_tau. Fixed-step explicit RK4; the input is held
// constant over the whole sample period (ZOH), never interpolated.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "crane/dynamics.hpp"
#include "crane/types.hpp"

namespace crane {

struct FlowConfig {
  double sample_period = 1.0 / 30.0;  ///< T [s]
  int substeps = 4;                   ///< uniform RK4 substeps per period
  // scheme tag: fixed-step explicit RK4 (the only scheme provided)

  void validate() const {
    if (sample_period <= 0.0 || substeps < 1)
      throw std::invalid_argument("FlowConfig: need T > 0 and substeps >= 1");
  }
};

namespace detail {

template <class Deriv>
Vec14 rk4_span(double t0, const Vec14& x0, double h, int steps, const Deriv& f) {
  Vec14 x = x0;
  double t = t0;
  for (int i = 0; i < steps; ++i) {
    const Vec14 k1 = f(t, x);
    const Vec14 k2 = f(t + 0.5 * h, x + (0.5 * h) * k1);
    const Vec14 k3 = f(t + 0.5 * h, x + (0.5 * h) * k2);
    const Vec14 k4 = f(t + h, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = t0 + (i + 1) * h;
  }
  return x;
}

inline int tau_to_substeps(double tau, const FlowConfig& cfg) {
  if (tau < -1e-12 || tau > cfg.sample_period + 1e-12)
    throw std::invalid_argument("partial_flow: tau outside [0, T]");
  const double h = cfg.sample_period / cfg.substeps;
  const double steps = tau / h;
  const int n = static_cast<int>(std::lround(steps));
  if (std::abs(steps - n) > 1e-9)
    throw std::invalid_argument("partial_flow: tau not on the substep grid");
  return n;
}

}  // namespace detail

/// F_tau(t_k, x_k, u_k): nominal flow at time t_k + tau under held input.
inline CraneState partial_flow(double t_k, const CraneState& x_k, const VelocityCommand& u_k,
                               double tau, const FlowConfig& cfg, const BaseSignal& base,
                               const CraneParameters& prm) {
  cfg.validate();
  const int n = detail::tau_to_substeps(tau, cfg);
  const double h = cfg.sample_period / cfg.substeps;
  const Vec14 xv = detail::rk4_span(t_k, x_k.vector(), h, n, [&](double t, const Vec14& x) {
    return vector_field(t, CraneState::from_vector(x), u_k, base, prm);
  });
  if (!xv.allFinite()) throw std::runtime_error("partial_flow: non-finite state (blow-up)");
  return CraneState::from_vector(xv);
}

/// F(t_k, x_k, u_k): the state discrete map over one sample period.
inline CraneState step(double t_k, const CraneState& x_k, const VelocityCommand& u_k,
                       const FlowConfig& cfg, const BaseSignal& base,
                       const CraneParameters& prm) {
  return partial_flow(t_k, x_k, u_k, cfg.sample_period, cfg, base, prm);
}

/// Phi_tau(t_k, x_k, u_k, delta_e): exact flow under uncertainty.
inline CraneState perturbed_flow(double t_k, const CraneState& x_k, const VelocityCommand& u_k,
                                 const UncertaintyRealization& delta, double tau,
                                 const FlowConfig& cfg, const BaseSignal& base,
                                 const CraneParameters& prm) {
  cfg.validate();
  const int n = detail::tau_to_substeps(tau, cfg);
  const double h = cfg.sample_period / cfg.substeps;
  const Vec14 xv = detail::rk4_span(t_k, x_k.vector(), h, n, [&](double t, const Vec14& x) {
    return perturbed_vector_field(t, CraneState::from_vector(x), u_k, delta, base, prm);
  });
  if (!xv.allFinite()) throw std::runtime_error("perturbed_flow: non-finite state (blow-up)");
  return CraneState::from_vector(xv);
}

/// Whole-period trajectory on the substep grid: states at tau = 0, h, ..., T.
/// Lets callers read partial flows off a stored trajectory without
/// re-integration.
inline std::vector<CraneState> flow_grid(double t_k, const CraneState& x_k,
                                         const VelocityCommand& u_k, const FlowConfig& cfg,
                                         const BaseSignal& base, const CraneParameters& prm) {
  cfg.validate();
  const double h = cfg.sample_period / cfg.substeps;
  std::vector<CraneState> out;
  out.reserve(cfg.substeps + 1);
  out.push_back(x_k);
  Vec14 x = x_k.vector();
  for (int i = 0; i < cfg.substeps; ++i) {
    x = detail::rk4_span(t_k + i * h, x, h, 1, [&](double t, const Vec14& xv) {
      return vector_field(t, CraneState::from_vector(xv), u_k, base, prm);
    });
    if (!x.allFinite()) throw std::runtime_error("flow_grid: non-finite state (blow-up)");
    out.push_back(CraneState::from_vector(x));
  }
  return out;
}

inline std::vector<CraneState> perturbed_flow_grid(double t_k, const CraneState& x_k,
                                                   const VelocityCommand& u_k,
                                                   const UncertaintyRealization& delta,
                                                   const FlowConfig& cfg, const BaseSignal& base,
                                                   const CraneParameters& prm) {
  cfg.validate();
  const double h = cfg.sample_period / cfg.substeps;
  std::vector<CraneState> out;
  out.reserve(cfg.substeps + 1);
  out.push_back(x_k);
  Vec14 x = x_k.vector();
  for (int i = 0; i < cfg.substeps; ++i) {
    x = detail::rk4_span(t_k + i * h, x, h, 1, [&](double t, const Vec14& xv) {
      return perturbed_vector_field(t, CraneState::from_vector(xv), u_k, delta, base, prm);
    });
    if (!x.allFinite()) throw std::runtime_error("perturbed_flow_grid: non-finite state");
    out.push_back(CraneState::from_vector(x));
  }
  return out;
}

}  // namespace crane
