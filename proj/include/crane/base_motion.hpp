#pragma once

// Analytic base-motion signals: the lateral sinusoid of the simulated ship
// deck plus optional angular sinusoids, with exact first and second
// derivatives.

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "crane/types.hpp"

namespace crane {

struct BaseMotionProfile {
  double lateral_amplitude = 0.05;  ///< A [m], displacement along inertial y
  double frequency = 1.0;           ///< f [Hz]
  Vec3 angular_amplitudes = Vec3::Zero();  ///< (beta_s, theta_s, phi_s) [rad]
  Vec3 angular_frequencies = Vec3::Ones(); ///< [Hz]

  void validate() const {
    if (lateral_amplitude < 0.0 || (angular_amplitudes.array() < 0.0).any())
      throw std::invalid_argument("BaseMotionProfile: amplitudes must be >= 0");
    if (frequency <= 0.0 || (angular_frequencies.array() <= 0.0).any())
      throw std::invalid_argument("BaseMotionProfile: frequencies must be > 0");
  }
};

/// p_s,y(t) = A sin(2 pi f t) and analogous angular channels.
inline BaseMotionSample base_motion(double t, const BaseMotionProfile& profile) {
  BaseMotionSample s;
  const double w = 2.0 * std::numbers::pi * profile.frequency;
  s.translation[1] = profile.lateral_amplitude * std::sin(w * t);
  s.translation_vel[1] = profile.lateral_amplitude * w * std::cos(w * t);
  s.translation_accel[1] = -profile.lateral_amplitude * w * w * std::sin(w * t);
  for (int i = 0; i < 3; ++i) {
    const double wi = 2.0 * std::numbers::pi * profile.angular_frequencies[i];
    const double a = profile.angular_amplitudes[i];
    s.angles[i] = a * std::sin(wi * t);
    s.angle_rates[i] = a * wi * std::cos(wi * t);
    s.angle_accels[i] = -a * wi * wi * std::sin(wi * t);
  }
  return s;
}

inline BaseSignal make_base_signal(const BaseMotionProfile& profile) {
  profile.validate();
  return [profile](double t) { return base_motion(t, profile); };
}

inline BaseSignal static_base_signal() {
  return [](double) { return BaseMotionSample{}; };
}

}  // namespace crane
