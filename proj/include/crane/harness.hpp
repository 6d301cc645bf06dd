#pragma once

// Scenario harness: JSON scenario definition, seeded truth-plant disturbance
// and estimator-noise realizations, the closed-loop simulation of plant +
// controller, nominal-vs-robust comparison, metrics, and CSV/SVG export.
//
// Determinism contract: given (ScenarioConfig, seed) the produced log is
// bit-identical across runs. Wall-clock solve times are recorded only when
// timing is explicitly enabled and are excluded from that contract (the CSV
// stores 0 otherwise).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "crane/barrier.hpp"
#include "crane/base_motion.hpp"
#include "crane/mpc.hpp"
#include "crane/safety.hpp"
#include "crane/types.hpp"

namespace crane {

// ---------------------------------------------------------------------------
// Scenario definition

/// Piecewise-linear vertical reference profile relative to the (moving)
/// target: hover at hover_offset, descend linearly to final_offset, hold.
struct ReferenceSpec {
  double hover_offset = 0.5;     ///< [m] above the target at t = 0
  double hover_duration = 3.0;   ///< [s]
  double descent_duration = 5.0; ///< [s]
  double final_offset = 0.02;    ///< [m] above the target once inserted

  void validate() const {
    if (hover_duration < 0 || descent_duration <= 0)
      throw std::invalid_argument("ReferenceSpec: bad phase durations");
    if (final_offset > hover_offset)
      throw std::invalid_argument("ReferenceSpec: final_offset must not exceed hover_offset");
  }

  double offset_at(double t) const {
    if (t <= hover_duration) return hover_offset;
    const double s = std::min(1.0, (t - hover_duration) / descent_duration);
    return hover_offset + s * (final_offset - hover_offset);
  }
  double offset_rate_at(double t) const {
    if (t <= hover_duration || t >= hover_duration + descent_duration) return 0.0;
    return (final_offset - hover_offset) / descent_duration;
  }
};

/// Truth-plant model error and estimator noise, both seeded.
struct UncertaintySpec {
  /// Per-state amplitude of the additive model error delta_e on the state
  /// derivative; realized as a sum of seeded sinusoids per component.
  Vec14 model_error_amplitudes = Vec14::Zero();
  /// Per-state amplitude of the uniform measurement noise; must stay within
  /// the barrier sampling radii for the robustness argument to apply.
  Vec14 noise_amplitudes = Vec14::Zero();
  int sinusoid_count = 3;
  double freq_min = 0.2;  ///< model-error band [Hz]
  double freq_max = 2.0;  ///< [Hz]
  double noise_freq_min = 0.05;  ///< estimation-error drift band [Hz]
  double noise_freq_max = 0.3;   ///< [Hz]

  void validate() const {
    if ((model_error_amplitudes.array() < 0).any() || (noise_amplitudes.array() < 0).any())
      throw std::invalid_argument("UncertaintySpec: amplitudes must be >= 0");
    if (sinusoid_count < 1 || freq_min <= 0 || freq_max < freq_min || noise_freq_min <= 0 ||
        noise_freq_max < noise_freq_min)
      throw std::invalid_argument("UncertaintySpec: bad sinusoid settings");
  }
};

/// Everything one closed-loop experiment needs. The target position is given
/// in the platform frame and rides the base motion.
struct ScenarioConfig {
  CraneParameters crane;
  BaseMotionProfile base_profile;
  TargetSafetyParams target;       ///< target_pos is derived from target_platform
  Vec3 target_platform = Vec3::Zero();  ///< p_t in the platform frame [m]
  ObstacleSet obstacles;
  SafetyBox free_space_box{Vec3(-5, -5, -0.05), Vec3(5, 5, 5)};  ///< platform frame
  double obstacle_margin = 0.0;
  ReferenceSpec reference;
  UncertaintySpec uncertainty;
  OCPConfig ocp;
  BarrierConfig barrier;
  Vec14 initial_state = Vec14::Zero();
  double duration = 20.0;  ///< [s]
  std::uint64_t seed = 1;
  SafetyMode mode = SafetyMode::robust;
  int truth_substeps = 10;  ///< RK4 substeps per period for the truth plant

  void validate() const {
    crane.validate();
    base_profile.validate();
    reference.validate();
    uncertainty.validate();
    obstacles.validate();
    if (duration <= 0) throw std::invalid_argument("ScenarioConfig: duration must be > 0");
    if (truth_substeps < 1) throw std::invalid_argument("ScenarioConfig: truth_substeps >= 1");
    if ((free_space_box.lower.array() >= free_space_box.upper.array()).any())
      throw std::invalid_argument("ScenarioConfig: empty free-space box");
    // target/ocp/barrier are validated where the bound target_pos and the
    // sampling period are known (build_safety_system / controller ctor).
  }
};

namespace detail {

inline Eigen::Matrix3d rotation_zyx(const Vec3& angles) {
  const double cy = std::cos(angles[0]), sy = std::sin(angles[0]);
  const double cp = std::cos(angles[1]), sp = std::sin(angles[1]);
  const double cr = std::cos(angles[2]), sr = std::sin(angles[2]);
  Eigen::Matrix3d Rz, Ry, Rx;
  Rz << cy, -sy, 0, sy, cy, 0, 0, 0, 1;
  Ry << cp, 0, sp, 0, 1, 0, -sp, 0, cp;
  Rx << 1, 0, 0, 0, cr, -sr, 0, sr, cr;
  return Rz * Ry * Rx;
}

/// Angular velocity of the ZYX base rotation.
inline Vec3 omega_zyx(const Vec3& angles, const Vec3& rates) {
  const Eigen::Matrix3d Rz = rotation_zyx(Vec3(angles[0], 0, 0));
  const Eigen::Matrix3d Rzy = rotation_zyx(Vec3(angles[0], angles[1], 0));
  return rates[0] * Vec3::UnitZ() + rates[1] * (Rz * Vec3::UnitY()) +
         rates[2] * (Rzy * Vec3::UnitX());
}

}  // namespace detail

/// Inertial-frame position of a platform-frame point under the base motion.
inline Vec3 platform_point(const Vec3& p_platform, const BaseMotionSample& base) {
  return detail::rotation_zyx(base.angles) * p_platform + base.translation;
}

inline Vec3 platform_point_velocity(const Vec3& p_platform, const BaseMotionSample& base) {
  const Vec3 r = detail::rotation_zyx(base.angles) * p_platform;
  return detail::omega_zyx(base.angles, base.angle_rates).cross(r) + base.translation_vel;
}

/// Target-funnel parameters with target_pos bound to the moving base.
inline TargetSafetyParams bind_target(const ScenarioConfig& cfg, const BaseSignal& base) {
  TargetSafetyParams t = cfg.target;
  const Vec3 p_platform = cfg.target_platform;
  t.target_pos = [p_platform, base](double time) {
    return platform_point(p_platform, base(time));
  };
  t.validate();
  return t;
}

inline CraneSafetySystem build_safety_system(const ScenarioConfig& cfg) {
  const BaseSignal base = make_base_signal(cfg.base_profile);
  FlowConfig flow;
  flow.sample_period = cfg.ocp.node_period();
  flow.substeps = 4;
  return CraneSafetySystem{cfg.crane, base, bind_target(cfg, base), flow};
}

/// Reference trajectory: the moving target plus the scheduled vertical offset.
inline ReferenceTrajectory build_reference(const ScenarioConfig& cfg, const BaseSignal& base) {
  const Vec3 p_platform = cfg.target_platform;
  const ReferenceSpec spec = cfg.reference;
  ReferenceTrajectory ref;
  ref.pos = [p_platform, base, spec](double t) -> Vec3 {
    return platform_point(p_platform, base(t)) + Vec3(0, 0, spec.offset_at(t));
  };
  ref.vel = [p_platform, base, spec](double t) -> Vec3 {
    return platform_point_velocity(p_platform, base(t)) + Vec3(0, 0, spec.offset_rate_at(t));
  };
  return ref;
}

/// Truth-plant delta_e: per state a sum of seeded sinusoids with frequencies
/// in [freq_min, freq_max] and amplitudes summing to the configured bound.
inline UncertaintyRealization make_model_error(const UncertaintySpec& spec, std::uint64_t seed) {
  spec.validate();
  const int n = spec.sinusoid_count;
  Eigen::MatrixXd amp(14, n), freq(14, n), phase(14, n);
  std::mt19937_64 rng(seed ^ 0xd1b54a32d192ed03ull);
  std::uniform_real_distribution<double> uf(spec.freq_min, spec.freq_max);
  std::uniform_real_distribution<double> up(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> uw(0.1, 1.0);
  for (int j = 0; j < 14; ++j) {
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      freq(j, i) = uf(rng);
      phase(j, i) = up(rng);
      amp(j, i) = uw(rng);
      wsum += amp(j, i);
    }
    amp.row(j) *= spec.model_error_amplitudes[j] / wsum;
  }
  UncertaintyRealization out;
  out.bound = spec.model_error_amplitudes.maxCoeff();
  out.signal = [amp, freq, phase, n](double t) {
    Vec14 d = Vec14::Zero();
    for (int j = 0; j < 14; ++j)
      for (int i = 0; i < n; ++i)
        d[j] += amp(j, i) * std::sin(2.0 * std::numbers::pi * freq(j, i) * t + phase(j, i));
    return d;
  };
  return out;
}

// ---------------------------------------------------------------------------
// Simulation log and metrics

struct LogRow {
  double t = 0.0;
  CraneState truth;
  CraneState measured;
  Vec3 u = Vec3::Zero();
  Vec3 u_m = Vec3::Zero();
  Vec3 payload = Vec3::Zero();    ///< p_p at the truth state
  Vec3 reference = Vec3::Zero();  ///< r_p(t)
  double h_t = 0.0;               ///< at the truth state
  Eigen::Matrix<double, 6, 1> h_box = Eigen::Matrix<double, 6, 1>::Zero();
  double delta_t = 0.0;
  double kkt = 0.0;
  int qp_iters = 0;
  double solve_ms = 0.0;
  bool failsafe = false;

  bool finite() const {
    return truth.finite() && measured.finite() && u.allFinite() && u_m.allFinite() &&
           payload.allFinite() && reference.allFinite() && std::isfinite(h_t) &&
           h_box.allFinite() && std::isfinite(delta_t) && std::isfinite(kkt);
  }
};

struct SimulationLog {
  double sample_period = 1.0 / 30.0;
  std::vector<LogRow> rows;
};

struct MetricThresholds {
  double tracking_pos = 0.02;   ///< epsilon [m]
  double tracking_vel = 0.05;   ///< epsilon_v [m/s]
  double swing_rope = 0.05;     ///< epsilon_r [rad^2/s^2]
  double swing_payload = 0.05;  ///< epsilon_p [rad^2/s^2]
};

/// Pure functions of the log.
struct Metrics {
  double min_h_t = std::numeric_limits<double>::infinity();
  double min_composite = std::numeric_limits<double>::infinity();
  double tracking_rms = 0.0;
  double max_tracking_error = 0.0;
  double final_tracking_error = 0.0;
  double final_velocity_error = 0.0;
  double settle_time_tracking = std::numeric_limits<double>::infinity();  ///< [s]
  double settle_time_swing = std::numeric_limits<double>::infinity();     ///< [s]
  bool insertion_success = false;
  double violation_duration = 0.0;  ///< total time with h_t < 0 [s]
  int failsafe_steps = 0;
};

inline Metrics compute_metrics(const SimulationLog& log, const CraneParameters& prm,
                               const BaseSignal& base,
                               const MetricThresholds& thr = MetricThresholds{}) {
  if (log.rows.empty()) throw std::invalid_argument("compute_metrics: empty log");
  Metrics m;
  double sq_sum = 0.0;
  const int n = static_cast<int>(log.rows.size());
  std::vector<double> err(n), swing(n);
  for (int i = 0; i < n; ++i) {
    const LogRow& r = log.rows[i];
    const double e = (r.payload - r.reference).norm();
    err[i] = e;
    const double rope_sq = r.truth.qdot[3] * r.truth.qdot[3] + r.truth.qdot[4] * r.truth.qdot[4];
    const double pay_sq = r.truth.qdot[5] * r.truth.qdot[5] + r.truth.qdot[6] * r.truth.qdot[6];
    swing[i] = std::max(rope_sq / thr.swing_rope, pay_sq / thr.swing_payload);
    sq_sum += e * e;
    m.min_h_t = std::min(m.min_h_t, r.h_t);
    m.min_composite = std::min(m.min_composite, std::min(r.h_t, r.h_box.minCoeff()));
    m.max_tracking_error = std::max(m.max_tracking_error, e);
    if (r.h_t < 0.0) m.violation_duration += log.sample_period;
    if (r.failsafe) ++m.failsafe_steps;
  }
  m.tracking_rms = std::sqrt(sq_sum / n);
  m.final_tracking_error = err.back();
  {
    const LogRow& r = log.rows.back();
    const Vec3 v = payload_velocity(r.truth, base(r.t), prm);
    Vec3 rv = Vec3::Zero();
    if (n >= 2)
      rv = (log.rows[n - 1].reference - log.rows[n - 2].reference) / log.sample_period;
    m.final_velocity_error = (v - rv).norm();
  }
  // Earliest time after which the bound holds for every remaining sample.
  for (int i = n - 1; i >= 0; --i) {
    if (err[i] > thr.tracking_pos) break;
    m.settle_time_tracking = log.rows[i].t;
  }
  for (int i = n - 1; i >= 0; --i) {
    if (swing[i] > 1.0) break;
    m.settle_time_swing = log.rows[i].t;
  }
  m.insertion_success = std::isfinite(m.settle_time_tracking) &&
                        m.final_tracking_error <= thr.tracking_pos;
  return m;
}

// ---------------------------------------------------------------------------
// Closed-loop run

/// Closed loop at the sampling period: the truth plant integrates the
/// perturbed flow under the seeded delta_e realization; the controller sees
/// truth + seeded uniform noise. Deterministic given the config and seed.
inline SimulationLog run_scenario(const ScenarioConfig& cfg, bool timing = false) {
  cfg.validate();
  const CraneSafetySystem sys = build_safety_system(cfg);
  const ReferenceTrajectory ref = build_reference(cfg, sys.base);
  const UncertaintyRealization delta_e = make_model_error(cfg.uncertainty, cfg.seed);

  BarrierConfig barrier = cfg.barrier;
  if (barrier.ball_radii.size() == 0) barrier.ball_radii = BarrierConfig::crane_default_radii();
  barrier.rng_seed = cfg.seed;
  MpcController controller(sys, cfg.ocp, barrier, cfg.mode, ref, cfg.free_space_box,
                           cfg.obstacles, cfg.obstacle_margin);

  FlowConfig truth_flow = sys.flow;
  truth_flow.substeps = cfg.truth_substeps;

  // Estimation error: smooth seeded sinusoids within the per-state bounds
  // (an estimator drifts slowly; white per-sample noise at 30 Hz would be an
  // actuator-rattling caricature of it).
  UncertaintySpec noise_spec = cfg.uncertainty;
  noise_spec.model_error_amplitudes = cfg.uncertainty.noise_amplitudes;
  noise_spec.freq_min = cfg.uncertainty.noise_freq_min;
  noise_spec.freq_max = cfg.uncertainty.noise_freq_max;
  const UncertaintyRealization noise =
      make_model_error(noise_spec, cfg.seed ^ 0x94d049bb133111ebull);
  const auto measure = [&](double t, const CraneState& truth) {
    Vec14 x = truth.vector() + noise.eval(t);
    return CraneState::from_vector(x);
  };

  const double T = sys.flow.sample_period;
  const int steps = static_cast<int>(std::lround(cfg.duration / T));
  SimulationLog log;
  log.sample_period = T;
  log.rows.reserve(steps);

  CraneState truth = CraneState::from_vector(cfg.initial_state);
  int consecutive_failsafe = 0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * T;
    if (!truth.finite())
      throw std::runtime_error("run_scenario: non-finite truth state at t = " + std::to_string(t));
    const CraneState meas = measure(t, truth);
    const MeasuredInput um{meas.qdot.head<3>()};

    const auto t0 = std::chrono::steady_clock::now();
    const ControlStepResult ctl = controller.step(t, meas, um);
    const auto t1 = std::chrono::steady_clock::now();

    LogRow row;
    row.t = t;
    row.truth = truth;
    row.measured = meas;
    row.u = ctl.u.vector();
    row.u_m = um.u_m;
    const BaseMotionSample bs = sys.base(t);
    row.payload = payload_pose(truth.q, bs, sys.crane);
    row.reference = ref.pos(t);
    row.h_t = target_safety(t, truth, sys.target, bs, sys.crane);
    row.h_box = box_safety(t, truth, ctl.box, bs, sys.crane);
    row.delta_t = ctl.delta.delta;
    // -1 marks a rejected solve whose residual was not finite.
    row.kkt = std::isfinite(ctl.solution.kkt_residual) ? ctl.solution.kkt_residual : -1.0;
    row.qp_iters = ctl.solution.qp_iterations;
    row.solve_ms = timing ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
    row.failsafe = ctl.failsafe;
    if (!row.finite())
      throw std::runtime_error("run_scenario: non-finite log row at t = " + std::to_string(t));
    log.rows.push_back(row);

    consecutive_failsafe = ctl.failsafe ? consecutive_failsafe + 1 : 0;
    if (consecutive_failsafe >= 10)
      throw std::runtime_error("run_scenario: repeated solver failure around t = " +
                               std::to_string(t));
    truth = perturbed_flow(t, truth, ctl.u, delta_e, T, truth_flow, sys.base, sys.crane);
  }
  return log;
}

struct ComparisonReport {
  SimulationLog nominal_log;
  SimulationLog robust_log;
  Metrics nominal;
  Metrics robust;
  /// Nominal violates (min h_t < 0) while robust stays safe (min h_t >= 0).
  bool robust_safe = false;
  bool nominal_violates = false;
};

/// Runs both modes with the shared seed and identical realizations.
inline ComparisonReport compare_nominal_robust(const ScenarioConfig& cfg, bool timing = false) {
  ScenarioConfig nom = cfg;
  nom.mode = SafetyMode::nominal;
  ScenarioConfig rob = cfg;
  rob.mode = SafetyMode::robust;
  ComparisonReport rep;
  rep.nominal_log = run_scenario(nom, timing);
  rep.robust_log = run_scenario(rob, timing);
  const BaseSignal base = make_base_signal(cfg.base_profile);
  rep.nominal = compute_metrics(rep.nominal_log, cfg.crane, base);
  rep.robust = compute_metrics(rep.robust_log, cfg.crane, base);
  rep.nominal_violates = rep.nominal.min_h_t < 0.0;
  rep.robust_safe = rep.robust.min_h_t >= 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Export

inline constexpr const char* kCsvHeader =
    "t,beta,theta,L_t,phi_r,theta_r,phi_p,theta_p,"
    "dbeta,dtheta,dL_t,dphi_r,dtheta_r,dphi_p,dtheta_p,"
    "u1,u2,u3,um1,um2,um3,ppx,ppy,ppz,rpx,rpy,rpz,"
    "h_t,h1,h2,h3,h4,h5,h6,delta_t,kkt,qp_iters,solve_ms";

/// Fixed column order, 17-significant-digit decimal text (round-trips IEEE
/// doubles exactly).
inline void export_csv(const SimulationLog& log, const std::string& path) {
  if (log.rows.empty()) throw std::invalid_argument("export_csv: empty log");
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("export_csv: cannot open " + path);
  std::fprintf(f, "%s\n", kCsvHeader);
  for (const LogRow& r : log.rows) {
    const Vec14 x = r.truth.vector();
    std::fprintf(f, "%.17g", r.t);
    for (int j = 0; j < 14; ++j) std::fprintf(f, ",%.17g", x[j]);
    for (int j = 0; j < 3; ++j) std::fprintf(f, ",%.17g", r.u[j]);
    for (int j = 0; j < 3; ++j) std::fprintf(f, ",%.17g", r.u_m[j]);
    for (int j = 0; j < 3; ++j) std::fprintf(f, ",%.17g", r.payload[j]);
    for (int j = 0; j < 3; ++j) std::fprintf(f, ",%.17g", r.reference[j]);
    std::fprintf(f, ",%.17g", r.h_t);
    for (int j = 0; j < 6; ++j) std::fprintf(f, ",%.17g", r.h_box[j]);
    std::fprintf(f, ",%.17g,%.17g,%d,%.17g\n", r.delta_t, r.kkt, r.qp_iters, r.solve_ms);
  }
  if (std::fclose(f) != 0) throw std::runtime_error("export_csv: write failure on " + path);
}

namespace detail {

struct PlotSeries {
  std::string label;
  std::string color;
  std::vector<double> y;
};

/// Minimal line plot: one panel, autoscaled axes, optional horizontal zero
/// line, legend. Well-formed XML with a single <svg> root.
inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::vector<double>& t, const std::vector<PlotSeries>& series,
                           bool zero_line) {
  const int W = 860, H = 460, ml = 70, mr = 20, mt = 40, mb = 45;
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (const auto& s : series)
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (zero_line) {
    ymin = std::min(ymin, 0.0);
    ymax = std::max(ymax, 0.0);
  }
  if (!(ymax > ymin)) {
    ymax = ymin + 1.0;
    ymin -= 1.0;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const double tmin = t.front(), tmax = t.back();
  const auto px = [&](double tv) {
    return ml + (tv - tmin) / (tmax - tmin) * (W - ml - mr);
  };
  const auto py = [&](double yv) {
    return mt + (ymax - yv) / (ymax - ymin) * (H - mt - mb);
  };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
     << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"16\">" << title << "</text>\n"
     << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\""
     << H - mt - mb << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double tv = tmin + i * (tmax - tmin) / 5.0;
    const double yv = ymin + i * (ymax - ymin) / 5.0;
    os << "<text x=\"" << px(tv) << "\" y=\"" << H - mb + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << tv
       << "</text>\n"
       << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", yv);
    os << buf << "</text>\n";
  }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 10
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">t [s]</text>\n";
  if (zero_line)
    os << "<line x1=\"" << ml << "\" y1=\"" << py(0.0) << "\" x2=\"" << W - mr << "\" y2=\""
       << py(0.0) << "\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>\n";
  int li = 0;
  for (const auto& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < t.size(); ++i) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(t[i]), py(s.y[i]));
      os << buf;
    }
    os << "\"/>\n";
    const int lx = ml + 12, ly = mt + 16 + 18 * li++;
    os << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 26 << "\" y2=\"" << ly
       << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << lx + 32 << "\" y=\"" << ly + 4
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("export_plot: cannot open " + path);
  f << os.str();
  if (!f.good()) throw std::runtime_error("export_plot: write failure on " + path);
}

}  // namespace detail

/// Payload vs reference height and the tracking error norm.
inline void export_tracking_plot(const SimulationLog& log, const std::string& path) {
  if (log.rows.empty()) throw std::invalid_argument("export_plot: empty log");
  std::vector<double> t;
  detail::PlotSeries pz{"payload z [m]", "#1f77b4", {}};
  detail::PlotSeries rz{"reference z [m]", "#2ca02c", {}};
  detail::PlotSeries en{"tracking error [m]", "#d62728", {}};
  for (const LogRow& r : log.rows) {
    t.push_back(r.t);
    pz.y.push_back(r.payload[2]);
    rz.y.push_back(r.reference[2]);
    en.y.push_back((r.payload - r.reference).norm());
  }
  detail::write_svg_plot(path, "Payload tracking", t, {pz, rz, en}, false);
}

/// h_t over time with the zero line, plus the adapted margin delta_t.
inline void export_safety_plot(const SimulationLog& log, const std::string& path) {
  if (log.rows.empty()) throw std::invalid_argument("export_plot: empty log");
  std::vector<double> t;
  detail::PlotSeries ht{"h_t [m]", "#1f77b4", {}};
  detail::PlotSeries dt{"delta_t [m]", "#ff7f0e", {}};
  for (const LogRow& r : log.rows) {
    t.push_back(r.t);
    ht.y.push_back(r.h_t);
    dt.y.push_back(r.delta_t);
  }
  detail::write_svg_plot(path, "Target safety", t, {ht, dt}, true);
}

// ---------------------------------------------------------------------------
// JSON scenario files

namespace detail {

inline Eigen::VectorXd json_vector(const nlohmann::json& j, int expected) {
  if (!j.is_array() || static_cast<int>(j.size()) != expected)
    throw std::invalid_argument("scenario: expected array of length " + std::to_string(expected));
  Eigen::VectorXd v(expected);
  for (int i = 0; i < expected; ++i) v[i] = j.at(i).get<double>();
  return v;
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, const T& fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline Vec3 vec3_or(const nlohmann::json& j, const char* key, const Vec3& fallback) {
  return j.contains(key) ? Vec3(json_vector(j.at(key), 3)) : fallback;
}

inline Vec14 vec14_or(const nlohmann::json& j, const char* key, const Vec14& fallback) {
  return j.contains(key) ? Vec14(json_vector(j.at(key), 14)) : fallback;
}

}  // namespace detail

/// Parses a scenario from JSON. Every field is optional and defaults to the
/// built-in lateral-sway insertion scenario; units are SI (rad, m, s).
inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  using detail::get_or;
  using detail::json_vector;
  using detail::vec3_or;
  using detail::vec14_or;
  ScenarioConfig cfg;

  if (j.contains("crane")) {
    const auto& c = j.at("crane");
    cfg.crane.boom_len = get_or(c, "boom_len", cfg.crane.boom_len);
    cfg.crane.base_height = get_or(c, "base_height", cfg.crane.base_height);
    cfg.crane.boom_mass = get_or(c, "boom_mass", cfg.crane.boom_mass);
    cfg.crane.payload_mass = get_or(c, "payload_mass", cfg.crane.payload_mass);
    cfg.crane.payload_len = get_or(c, "payload_len", cfg.crane.payload_len);
    cfg.crane.payload_radius = get_or(c, "payload_radius", cfg.crane.payload_radius);
    cfg.crane.gravity = get_or(c, "gravity", cfg.crane.gravity);
    cfg.crane.actuator_time_constants =
        vec3_or(c, "actuator_time_constants", cfg.crane.actuator_time_constants);
    cfg.crane.input_bounds.lower = vec3_or(c, "input_lower", cfg.crane.input_bounds.lower);
    cfg.crane.input_bounds.upper = vec3_or(c, "input_upper", cfg.crane.input_bounds.upper);
    cfg.crane.state_lower = vec14_or(c, "state_lower", cfg.crane.state_lower);
    cfg.crane.state_upper = vec14_or(c, "state_upper", cfg.crane.state_upper);
  }
  if (j.contains("base_profile")) {
    const auto& b = j.at("base_profile");
    cfg.base_profile.lateral_amplitude =
        get_or(b, "lateral_amplitude", cfg.base_profile.lateral_amplitude);
    cfg.base_profile.frequency = get_or(b, "frequency", cfg.base_profile.frequency);
    cfg.base_profile.angular_amplitudes =
        vec3_or(b, "angular_amplitudes", cfg.base_profile.angular_amplitudes);
    cfg.base_profile.angular_frequencies =
        vec3_or(b, "angular_frequencies", cfg.base_profile.angular_frequencies);
  }
  if (j.contains("target")) {
    const auto& t = j.at("target");
    cfg.target.peak_amp = get_or(t, "peak_amp", cfg.target.peak_amp);
    cfg.target.steepness = get_or(t, "steepness", cfg.target.steepness);
    cfg.target.plateau_gap = get_or(t, "plateau_gap", cfg.target.plateau_gap);
    cfg.target.rho1 = get_or(t, "rho1", cfg.target.rho1);
    cfg.target.rho2 = get_or(t, "rho2", cfg.target.rho2);
    cfg.target.target_radius = get_or(t, "target_radius", cfg.target.target_radius);
    cfg.target.payload_radius = get_or(t, "payload_radius", cfg.target.payload_radius);
    cfg.target_platform = vec3_or(t, "platform_position", cfg.target_platform);
  }
  if (j.contains("obstacles")) {
    for (const auto& b : j.at("obstacles"))
      cfg.obstacles.blocks.push_back(
          {Vec3(json_vector(b.at("lower"), 3)), Vec3(json_vector(b.at("upper"), 3))});
  }
  if (j.contains("free_space_box")) {
    const auto& b = j.at("free_space_box");
    cfg.free_space_box.lower = vec3_or(b, "lower", cfg.free_space_box.lower);
    cfg.free_space_box.upper = vec3_or(b, "upper", cfg.free_space_box.upper);
    cfg.obstacle_margin = get_or(b, "margin", cfg.obstacle_margin);
  }
  if (j.contains("reference")) {
    const auto& r = j.at("reference");
    cfg.reference.hover_offset = get_or(r, "hover_offset", cfg.reference.hover_offset);
    cfg.reference.hover_duration = get_or(r, "hover_duration", cfg.reference.hover_duration);
    cfg.reference.descent_duration = get_or(r, "descent_duration", cfg.reference.descent_duration);
    cfg.reference.final_offset = get_or(r, "final_offset", cfg.reference.final_offset);
  }
  if (j.contains("uncertainty")) {
    const auto& u = j.at("uncertainty");
    cfg.uncertainty.model_error_amplitudes =
        vec14_or(u, "model_error_amplitudes", cfg.uncertainty.model_error_amplitudes);
    cfg.uncertainty.noise_amplitudes =
        vec14_or(u, "noise_amplitudes", cfg.uncertainty.noise_amplitudes);
    cfg.uncertainty.sinusoid_count = get_or(u, "sinusoid_count", cfg.uncertainty.sinusoid_count);
    cfg.uncertainty.freq_min = get_or(u, "freq_min", cfg.uncertainty.freq_min);
    cfg.uncertainty.freq_max = get_or(u, "freq_max", cfg.uncertainty.freq_max);
    cfg.uncertainty.noise_freq_min = get_or(u, "noise_freq_min", cfg.uncertainty.noise_freq_min);
    cfg.uncertainty.noise_freq_max = get_or(u, "noise_freq_max", cfg.uncertainty.noise_freq_max);
  }
  if (j.contains("ocp")) {
    const auto& o = j.at("ocp");
    cfg.ocp.horizon = get_or(o, "horizon", cfg.ocp.horizon);
    cfg.ocp.node_count = get_or(o, "node_count", cfg.ocp.node_count);
    cfg.ocp.w_input = vec3_or(o, "w_input", cfg.ocp.w_input);
    cfg.ocp.w_input_match = vec3_or(o, "w_input_match", cfg.ocp.w_input_match);
    cfg.ocp.w_tracking = vec3_or(o, "w_tracking", cfg.ocp.w_tracking);
    cfg.ocp.w_velocity = vec3_or(o, "w_velocity", cfg.ocp.w_velocity);
    if (o.contains("w_payload_rate"))
      cfg.ocp.w_payload_rate = Eigen::Vector2d(json_vector(o.at("w_payload_rate"), 2));
    if (o.contains("w_rope_rate"))
      cfg.ocp.w_rope_rate = Eigen::Vector2d(json_vector(o.at("w_rope_rate"), 2));
    cfg.ocp.sqp_iters = get_or(o, "sqp_iters", cfg.ocp.sqp_iters);
    cfg.ocp.slack_weight = get_or(o, "slack_weight", cfg.ocp.slack_weight);
    cfg.ocp.qp.tolerance = get_or(o, "qp_tolerance", cfg.ocp.qp.tolerance);
  }
  if (j.contains("barrier")) {
    const auto& b = j.at("barrier");
    cfg.barrier.alpha_gain = get_or(b, "alpha_gain", cfg.barrier.alpha_gain);
    cfg.barrier.sample_count = get_or(b, "sample_count", cfg.barrier.sample_count);
    if (b.contains("ball_radii")) cfg.barrier.ball_radii = json_vector(b.at("ball_radii"), 14);
    if (b.contains("tau_divisions")) {
      const int div = b.at("tau_divisions").get<int>();
      if (div < 1) throw std::invalid_argument("scenario: tau_divisions >= 1");
      cfg.barrier.tau_step = cfg.ocp.node_period() / div;
    }
    cfg.barrier.include_alpha_offset =
        get_or(b, "include_alpha_offset", cfg.barrier.include_alpha_offset);
    cfg.barrier.target_ball = vec3_or(b, "target_ball", cfg.barrier.target_ball);
  }
  cfg.initial_state = vec14_or(j, "initial_state", cfg.initial_state);
  cfg.duration = get_or(j, "duration", cfg.duration);
  cfg.seed = get_or(j, "seed", cfg.seed);
  cfg.truth_substeps = get_or(j, "truth_substeps", cfg.truth_substeps);
  if (j.contains("mode")) {
    const std::string m = j.at("mode").get<std::string>();
    if (m == "nominal")
      cfg.mode = SafetyMode::nominal;
    else if (m == "robust")
      cfg.mode = SafetyMode::robust;
    else
      throw std::invalid_argument("scenario: mode must be \"nominal\" or \"robust\"");
  }
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_scenario: cannot open " + path);
  nlohmann::json j;
  f >> j;
  return scenario_from_json(j);
}

/// Full validation including the sub-configs that need bound context.
inline void validate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const CraneSafetySystem sys = build_safety_system(cfg);  // validates target binding
  cfg.ocp.validate(sys.flow.sample_period);
  BarrierConfig b = cfg.barrier;
  if (b.ball_radii.size() == 0) b.ball_radii = BarrierConfig::crane_default_radii();
  b.validate(sys.flow.sample_period, 14);
  if ((cfg.uncertainty.noise_amplitudes.array() > b.ball_radii.array() + 1e-12).any())
    throw std::invalid_argument(
        "scenario: measurement noise amplitudes exceed the barrier sampling radii");
}

inline std::string format_report(const ComparisonReport& rep) {
  std::ostringstream os;
  const auto line = [&](const char* name, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "  %-28s %14.6g %14.6g\n", name, a, b);
    os << buf;
  };
  os << "nominal vs robust comparison\n";
  os << "  metric                              nominal         robust\n";
  line("min h_t [m]", rep.nominal.min_h_t, rep.robust.min_h_t);
  line("min composite h [m]", rep.nominal.min_composite, rep.robust.min_composite);
  line("violation duration [s]", rep.nominal.violation_duration, rep.robust.violation_duration);
  line("tracking RMS [m]", rep.nominal.tracking_rms, rep.robust.tracking_rms);
  line("max tracking error [m]", rep.nominal.max_tracking_error, rep.robust.max_tracking_error);
  line("final tracking error [m]", rep.nominal.final_tracking_error,
       rep.robust.final_tracking_error);
  line("settle time (tracking) [s]", rep.nominal.settle_time_tracking,
       rep.robust.settle_time_tracking);
  line("settle time (swing) [s]", rep.nominal.settle_time_swing, rep.robust.settle_time_swing);
  line("failsafe steps", rep.nominal.failsafe_steps, rep.robust.failsafe_steps);
  os << "  insertion success            " << (rep.nominal.insertion_success ? "yes" : "no")
     << "             " << (rep.robust.insertion_success ? "yes" : "no") << "\n";
  os << "verdict: nominal " << (rep.nominal_violates ? "violates" : "does not violate")
     << " h_t >= 0; robust " << (rep.robust_safe ? "maintains" : "violates") << " h_t >= 0\n";
  return os.str();
}

}  // namespace crane
