#pragma once

#include "viro/state.hpp"

namespace viro {

struct ImuSample {
  Vec3 omega_m = Vec3::Zero();  // rad/s
  Vec3 accel_m = Vec3::Zero();  // m/s^2 (specific force)
  double t = 0.0;
};

// Continuous-time noise densities.
struct NoiseParams {
  Vec3 sigma_accel = Vec3(0.003, 0.003, 0.004);       // m/s^2/sqrt(Hz)
  Vec3 sigma_gyro = Vec3(0.0003, 0.0003, 0.0005);     // rad/s/sqrt(Hz)
  Vec3 sigma_accel_walk = Vec3::Constant(1e-4);       // m/s^3/sqrt(Hz)
  Vec3 sigma_gyro_walk = Vec3::Constant(1e-5);        // rad/s^2/sqrt(Hz)
};

inline Vec3 gravity() { return Vec3(0.0, 0.0, -9.8); }

// One Euler-on-the-group step of the rigid-body kinematics. The measured
// specific force is bias-corrected so that vdot = R*(a_m - b_a) + g; the
// anchor columns and biases are untouched.
void mean_propagate(RobotState& state, const ImuSample& sample, double dt);

// Right-invariant error-state Jacobian for the (theta, v, p, u*L, bg, ba)
// block, size (15 + 3L)^2. Clone rows are zero and not included.
MatX jacobian_F(const RobotState& state);

// Noise-input Jacobian mapping [n_gyro, n_accel, 0_{3+3L}, w_gyro, w_accel]
// into the IMU error block: adjoint of the extended pose on top, -I6 for
// the bias random walks (the error is b_hat - b, so the walk enters with a
// minus sign).
MatX jacobian_G(const RobotState& state);

// Continuous noise covariance matching jacobian_G's input ordering.
MatX noise_covariance(const NoiseParams& noise, int num_anchors);

// Phi = exp(F*dt) by scaling-and-squaring with a truncated Taylor series
// (terms below 1e-300 terminate it; for the block-nilpotent F here the
// series is exact). F may be the IMU block or the full embedded matrix.
MatX transition_matrix(const MatX& F, double dt);

// P <- Phi*P*Phi^T + Qd, symmetrized. Dimensions must match.
MatX propagate_covariance(const MatX& P, const MatX& Phi, const MatX& Qd);

// Full propagation step at the IMU rate: covariance first (linearized at
// the pre-step estimate, clone blocks transported by identity), then the
// mean. Returns the IMU-block Phi used.
MatX propagate(RobotState& state, const ImuSample& sample, double dt,
               const NoiseParams& noise);

}  // namespace viro
