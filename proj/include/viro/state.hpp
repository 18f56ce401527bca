#pragma once

#include <cstdint>
#include <vector>

#include "viro/lie.hpp"

namespace viro {

struct ImuBiases {
  Vec3 gyro = Vec3::Zero();   // rad/s
  Vec3 accel = Vec3::Zero();  // m/s^2
};

// Frozen copy of the IMU pose at a past camera epoch.
struct Clone {
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  double t = 0.0;
};

// Per-robot estimator state: current IMU extended pose with L anchor
// columns, biases, a sliding window of at most max_clones pose clones, and
// the joint error-state covariance.
//
// Error-state ordering (everything downstream indexes against this):
//   [xi_theta, xi_v, xi_p, xi_u x L, b_gyro, b_accel, clone twists]
// with clone twist blocks newest-first (the oldest clone is last). Clone
// storage is oldest-first (timestamps strictly increasing).
struct RobotState {
  uint32_t robot_id = 0;
  double t = 0.0;
  ExtendedPose imu = ExtendedPose::Identity(2);  // columns (v, p, anchors...)
  ImuBiases biases;
  std::vector<uint32_t> anchor_ids;  // aligned with imu.columns[2..]
  std::vector<Clone> clones;
  int max_clones = 10;
  MatX cov = MatX::Zero(15, 15);

  int num_anchors() const { return static_cast<int>(anchor_ids.size()); }
  int num_clones() const { return static_cast<int>(clones.size()); }
  // Twist dimension of the IMU extended pose: 9 + 3L.
  int imu_dof() const { return imu.dof(); }
  int bias_offset() const { return imu_dof(); }
  int clone_offset() const { return imu_dof() + 6; }
  int dim() const { return clone_offset() + 6 * num_clones(); }

  // Error-vector offset of the clone stored at `storage_index`
  // (0 = oldest). Newest clones sit at the front of the clone section.
  int clone_error_offset(int storage_index) const {
    return clone_offset() + 6 * (num_clones() - 1 - storage_index);
  }
  // Offset of anchor column l within the error vector.
  int anchor_error_offset(int l) const { return 9 + 3 * l; }

  const Mat3& rotation() const { return imu.rotation; }
  const Vec3& velocity() const { return imu.columns[0]; }
  const Vec3& position() const { return imu.columns[1]; }
  const Vec3& anchor_position(int l) const { return imu.columns[2 + l]; }
  Vec3& anchor_position(int l) { return imu.columns[2 + l]; }
  int anchor_index(uint32_t anchor_id) const;  // -1 if absent

  void symmetrize() { cov = ((cov + cov.transpose()) / 2.0).eval(); }
};

// Appends a clone of the current (R, p) at time t. The covariance is grown
// by the exact linear map duplicating the (xi_theta, xi_p) rows/columns.
// Throws if the window is already full.
void clone_pose(RobotState& state, double t);

// Drops the oldest clone; the remaining covariance is the corresponding
// principal submatrix. Throws on an empty window.
void marginalize_oldest(RobotState& state);

// X <- exp(eps) * X for the IMU pose and every clone; biases additively.
void apply_correction(RobotState& state, const VecX& epsilon);

// Eq.-style right-invariant error: vee(log(That T^-1)) for the IMU block,
// plain subtraction for biases, vee(log(Chat C^-1)) per clone.
VecX compute_error(const RobotState& state_hat, const RobotState& state_true);

// Flat snapshot record used by the simulated bus and harness logging:
// u64 payload length, then robot id u32, timestamp f64, error dim u32,
// anchor count u32 + ids, extended-pose matrix row-major f64, biases f64 x6,
// clone count u32 + per clone (t f64, R row-major f64 x9, p f64 x3),
// covariance lower triangle f64.
std::vector<uint8_t> serialize_snapshot(const RobotState& state);
RobotState deserialize_snapshot(const std::vector<uint8_t>& bytes);

}  // namespace viro
