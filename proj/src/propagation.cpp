#include "viro/propagation.hpp"

#include <stdexcept>

namespace viro {

void mean_propagate(RobotState& state, const ImuSample& sample, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("mean_propagate: dt must be > 0");
  const Vec3 omega = sample.omega_m - state.biases.gyro;
  const Vec3 accel = sample.accel_m - state.biases.accel;
  const Vec3 accel_world = state.rotation() * accel + gravity();
  const Vec3 v_old = state.velocity();
  state.imu.columns[1] += v_old * dt + 0.5 * accel_world * dt * dt;
  state.imu.columns[0] += accel_world * dt;
  state.imu.rotation = state.rotation() * so3_exp(omega * dt);
  state.t = sample.t;
}

MatX jacobian_F(const RobotState& state) {
  const int L = state.num_anchors();
  const int nd = 9 + 3 * L;      // extended-pose twist dimension
  const int d = nd + 6;
  MatX F = MatX::Zero(d, d);
  const Mat3 R = state.rotation();

  // F_A: gravity coupling into the velocity row, velocity into position.
  F.block<3, 3>(3, 0) = skew(gravity());
  F.block<3, 3>(6, 3) = Mat3::Identity();

  // F_B: gyro-bias column -skew(col)*R per translational row, accel-bias
  // column -R on the velocity row, -R on the attitude row.
  F.block<3, 3>(0, nd) = -R;
  F.block<3, 3>(3, nd) = -skew(state.velocity()) * R;
  F.block<3, 3>(3, nd + 3) = -R;
  F.block<3, 3>(6, nd) = -skew(state.position()) * R;
  for (int l = 0; l < L; ++l) {
    F.block<3, 3>(9 + 3 * l, nd) = -skew(state.anchor_position(l)) * R;
  }
  return F;
}

MatX jacobian_G(const RobotState& state) {
  const int nd = state.imu_dof();
  const int d = nd + 6;
  MatX G = MatX::Zero(d, d);
  G.topLeftCorner(nd, nd) = adjoint(state.imu);
  G.bottomRightCorner<6, 6>() = -MatX::Identity(6, 6);
  return G;
}

MatX noise_covariance(const NoiseParams& noise, int num_anchors) {
  const int nd = 9 + 3 * num_anchors;
  MatX Qc = MatX::Zero(nd + 6, nd + 6);
  Qc.block<3, 3>(0, 0) = noise.sigma_gyro.cwiseAbs2().asDiagonal();
  Qc.block<3, 3>(3, 3) = noise.sigma_accel.cwiseAbs2().asDiagonal();
  Qc.block<3, 3>(nd, nd) = noise.sigma_gyro_walk.cwiseAbs2().asDiagonal();
  Qc.block<3, 3>(nd + 3, nd + 3) = noise.sigma_accel_walk.cwiseAbs2().asDiagonal();
  return Qc;
}

MatX transition_matrix(const MatX& F, double dt) {
  const MatX A = F * dt;
  const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.5) {
    scale *= 0.5;
    ++squarings;
  }
  const MatX As = A * scale;
  MatX phi = MatX::Identity(F.rows(), F.cols());
  MatX term = phi;
  for (int k = 1; k <= 30; ++k) {
    term = (term * As / k).eval();
    phi += term;
    if (term.cwiseAbs().maxCoeff() < 1e-300) break;
  }
  for (int s = 0; s < squarings; ++s) phi = (phi * phi).eval();
  return phi;
}

MatX propagate_covariance(const MatX& P, const MatX& Phi, const MatX& Qd) {
  if (P.rows() != Phi.cols() || Qd.rows() != Phi.rows()) {
    throw std::invalid_argument("propagate_covariance: dimension mismatch");
  }
  MatX out = Phi * P * Phi.transpose() + Qd;
  return ((out + out.transpose()) / 2.0).eval();
}

MatX propagate(RobotState& state, const ImuSample& sample, double dt,
               const NoiseParams& noise) {
  const int nd = state.imu_dof() + 6;
  const int d = state.dim();
  const MatX F = jacobian_F(state);
  const MatX G = jacobian_G(state);
  const MatX phi = transition_matrix(F, dt);
  const MatX Qd = G * noise_covariance(noise, state.num_anchors()) *
                  G.transpose() * dt;

  // Clone blocks are transported by identity (zero clone rows in F), so
  // only the IMU rows/columns move.
  MatX P = state.cov;
  P.topLeftCorner(nd, nd) =
      phi * P.topLeftCorner(nd, nd) * phi.transpose() + Qd;
  if (d > nd) {
    P.topRightCorner(nd, d - nd) = phi * P.topRightCorner(nd, d - nd);
    P.bottomLeftCorner(d - nd, nd) = P.topRightCorner(nd, d - nd).transpose();
  }
  state.cov = std::move(P);
  state.symmetrize();

  mean_propagate(state, sample, dt);
  return phi;
}

}  // namespace viro
