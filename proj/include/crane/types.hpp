#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace crane {

using Vec3 = Eigen::Vector3d;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Vec14 = Eigen::Matrix<double, 14, 1>;

/// Generalized coordinates q = (beta, theta, L_t, phi_r, theta_r, phi_p, theta_p).
/// The first three entries are actuated, the last four are passive swing angles.
struct GeneralizedCoordinates {
  double beta = 0.0;        ///< crane yaw [rad]
  double theta = 0.0;       ///< boom pitch [rad]
  double tether_len = 1.0;  ///< L_t [m], > 0
  double rope_roll = 0.0;   ///< phi_r [rad]
  double rope_pitch = 0.0;  ///< theta_r [rad]
  double payload_roll = 0.0;   ///< phi_p [rad]
  double payload_pitch = 0.0;  ///< theta_p [rad]

  Vec7 vector() const {
    Vec7 v;
    v << beta, theta, tether_len, rope_roll, rope_pitch, payload_roll, payload_pitch;
    return v;
  }
  static GeneralizedCoordinates from_vector(const Vec7& v) {
    GeneralizedCoordinates q;
    q.beta = v[0];
    q.theta = v[1];
    q.tether_len = v[2];
    q.rope_roll = v[3];
    q.rope_pitch = v[4];
    q.payload_roll = v[5];
    q.payload_pitch = v[6];
    return q;
  }
};

/// Full state x = (q, qdot), 14 entries.
struct CraneState {
  GeneralizedCoordinates q;
  Vec7 qdot = Vec7::Zero();

  Vec14 vector() const {
    Vec14 v;
    v.head<7>() = q.vector();
    v.tail<7>() = qdot;
    return v;
  }
  static CraneState from_vector(const Vec14& v) {
    CraneState x;
    x.q = GeneralizedCoordinates::from_vector(v.head<7>());
    x.qdot = v.tail<7>();
    return x;
  }
  bool finite() const { return vector().allFinite(); }
};

/// Commanded joint rates u = (yaw_rate, pitch_rate, tether_rate).
struct VelocityCommand {
  double yaw_rate = 0.0;    ///< [rad/s]
  double pitch_rate = 0.0;  ///< [rad/s]
  double tether_rate = 0.0; ///< [m/s]

  Vec3 vector() const { return {yaw_rate, pitch_rate, tether_rate}; }
  static VelocityCommand from_vector(const Vec3& v) { return {v[0], v[1], v[2]}; }
};

/// Ship/base pose sample: orientation d_s with two derivatives plus a
/// translation channel (the simulated scenario translates the base laterally).
struct BaseMotionSample {
  Vec3 angles = Vec3::Zero();       ///< (beta_s, theta_s, phi_s) [rad]
  Vec3 angle_rates = Vec3::Zero();  ///< [rad/s]
  Vec3 angle_accels = Vec3::Zero(); ///< [rad/s^2]
  Vec3 translation = Vec3::Zero();       ///< p_s [m]
  Vec3 translation_vel = Vec3::Zero();   ///< [m/s]
  Vec3 translation_accel = Vec3::Zero(); ///< [m/s^2]
};

using BaseSignal = std::function<BaseMotionSample(double)>;

struct Bounds3 {
  Vec3 lower;
  Vec3 upper;
};

struct CraneParameters {
  double boom_len = 2.44;      ///< [m] (8 ft boom)
  double base_height = 1.0;    ///< pan axis height above the deck [m]
  double boom_mass = 2.0;      ///< uniform slender rod [kg]
  double payload_mass = 0.5;   ///< uniform cylinder [kg]
  double payload_len = 0.6;    ///< [m]
  double payload_radius = 0.02;///< [m]
  Vec3 actuator_time_constants{0.1, 0.1, 0.1};  ///< (sigma_beta, sigma_theta, sigma_L) [s]
  Bounds3 input_bounds{Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5)};
  /// State box X over (q, qdot). Only the tether length is meaningfully
  /// bounded by default; everything else is left wide.
  Vec14 state_lower = (Vec14() << -10, -10, 0.05, -10, -10, -10, -10,
                       -20, -20, -20, -20, -20, -20, -20).finished();
  Vec14 state_upper = (Vec14() << 10, 10, 5.0, 10, 10, 10, 10,
                       20, 20, 20, 20, 20, 20, 20).finished();
  double gravity = 9.81;

  void validate() const {
    if (boom_len <= 0 || base_height <= 0 || boom_mass <= 0 || payload_mass <= 0 ||
        payload_len <= 0 || payload_radius <= 0 || gravity <= 0)
      throw std::invalid_argument("CraneParameters: masses/lengths must be positive");
    if ((actuator_time_constants.array() <= 0).any())
      throw std::invalid_argument("CraneParameters: actuator time constants must be positive");
    if ((input_bounds.lower.array() >= input_bounds.upper.array()).any())
      throw std::invalid_argument("CraneParameters: empty input bound box");
    if ((state_lower.array() >= state_upper.array()).any())
      throw std::invalid_argument("CraneParameters: empty state bound box");
  }
};

/// Bounded additive model error delta_e(t) on the state derivative.
struct UncertaintyRealization {
  std::function<Vec14(double)> signal;  ///< t -> delta_e(t)
  double bound = 0.0;                   ///< inf-norm cap

  Vec14 eval(double t) const {
    if (!signal) return Vec14::Zero();
    Vec14 d = signal(t);
    if (d.lpNorm<Eigen::Infinity>() > bound + 1e-12)
      throw std::runtime_error("UncertaintyRealization: |delta_e|_inf exceeds bound");
    return d;
  }
  static UncertaintyRealization zero() { return {nullptr, 0.0}; }
};

}  // namespace crane
