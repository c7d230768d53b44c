#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "kinojump/rng.hpp"
#include "kinojump/types.hpp"

namespace kinojump {

/// True disturbance acting on the plant: a (piecewise-constant) nominal
/// component plus clipped Gaussian noise.
struct DisturbanceSpec {
  struct Segment {
    double t_start = 0.0;  // s
    Vec3 nominal = Vec3::Zero();
  };
  std::vector<Segment> schedule{{0.0, Vec3::Zero()}};  // sorted by t_start
  double noise_sigma = 0.0;   // m/s^2
  double noise_bound = 0.5;   // m/s^2, clip around the nominal

  void validate() const {
    if (noise_sigma < 0.0 || noise_bound < 0.0)
      throw std::invalid_argument("DisturbanceSpec: negative noise parameters");
    if (schedule.empty()) throw std::invalid_argument("DisturbanceSpec: empty schedule");
    for (std::size_t i = 1; i < schedule.size(); ++i)
      if (schedule[i].t_start < schedule[i - 1].t_start)
        throw std::invalid_argument("DisturbanceSpec: schedule not sorted");
  }

  Vec3 nominal_at(double t) const {
    Vec3 n = schedule.front().nominal;
    for (const Segment& s : schedule)
      if (t >= s.t_start) n = s.nominal;
    return n;
  }

  static DisturbanceSpec constant(const Vec3& nominal, double sigma = 0.0, double bound = 0.5) {
    DisturbanceSpec s;
    s.schedule = {{0.0, nominal}};
    s.noise_sigma = sigma;
    s.noise_bound = bound;
    return s;
  }
};

/// Draws the true disturbance at time t. Noise is clipped component-wise to
/// +-noise_bound around the nominal; one call consumes exactly three normal
/// draws, so sampling is deterministic per (stream, step index).
inline Disturbance sample_disturbance(const DisturbanceSpec& spec, double t, RngStream& rng) {
  if (t < 0.0) throw std::invalid_argument("sample_disturbance: t must be >= 0");
  const Vec3 w = rng.normal3(spec.noise_sigma);
  Disturbance d;
  d.accel = spec.nominal_at(t) +
            w.cwiseMax(-spec.noise_bound).cwiseMin(spec.noise_bound);
  return d;
}

/// Stand-in for the onboard disturbance estimator: the true nominal component
/// plus white estimation noise, passed through a first-order low-pass filter.
class DisturbanceEstimator {
 public:
  DisturbanceEstimator(double sigma_est, double time_constant, RngStream rng)
      : sigma_est_(sigma_est), tau_(time_constant), rng_(std::move(rng)) {}

  Disturbance update(const Vec3& true_nominal, double dt) {
    const Vec3 raw = true_nominal + rng_.normal3(sigma_est_);
    if (!initialized_) {
      state_ = raw;
      initialized_ = true;
    } else {
      const double a = tau_ <= 0.0 ? 1.0 : 1.0 - std::exp(-dt / tau_);
      state_ += a * (raw - state_);
    }
    Disturbance d;
    d.accel = state_;
    return d;
  }

  void reset() { initialized_ = false; state_.setZero(); }

 private:
  double sigma_est_;
  double tau_;
  RngStream rng_;
  Vec3 state_ = Vec3::Zero();
  bool initialized_ = false;
};

}  // namespace kinojump
