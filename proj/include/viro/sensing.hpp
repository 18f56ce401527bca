#pragma once

#include <optional>

#include "viro/state.hpp"

namespace viro {

struct FeatureObservation {
  uint32_t robot_id = 0;
  uint32_t feature_id = 0;
  Vec2 z = Vec2::Zero();  // normalized image coordinates
  double t = 0.0;
};

struct RangeObservation {
  uint32_t robot_id = 0;
  uint32_t anchor_id = 0;
  double d = 0.0;  // meters
  double t = 0.0;
};

struct CameraExtrinsics {
  Mat3 R_CI = Mat3::Identity();  // IMU -> camera
  Vec3 p_CI = Vec3::Zero();      // IMU origin in the camera frame
};

struct TagExtrinsics {
  Vec3 p_tag = Vec3::Zero();  // tag in the IMU frame
  double bias = 0.0;          // range bias, meters
};

// [x/z, y/z]; empty if the point sits at or behind the image plane
// (z <= 1e-6).
std::optional<Vec2> project(const Vec3& p_cam);

// Landmark in the camera frame for an IMU pose (R: IMU->global, p).
Vec3 to_camera_frame(const Mat3& R, const Vec3& p, const Vec3& p_feat,
                     const CameraExtrinsics& cam);

// Noiseless predicted range to anchor_index, including the tag bias.
double predict_range(const RobotState& state, int anchor_index,
                     const TagExtrinsics& tag);

// Row of the range measurement Jacobian over the full error state:
// H_pu * [Lambda, 0, I, -I(anchor), 0...] with H_pu the unit row from the
// anchor to the tag. Empty when tag and anchor coincide (range <= 1e-6).
std::optional<Eigen::RowVectorXd> range_jacobian(const RobotState& state,
                                                 int anchor_index,
                                                 const TagExtrinsics& tag);

struct FeatureJacobian {
  MatX H_x;                       // 2 x dim
  Eigen::Matrix<double, 2, 3> H_f;
  Vec2 predicted = Vec2::Zero();
};

// Jacobians of one feature observation made from either the current pose
// (clone_index = -1) or a stored clone. H_x carries -H_f on the observing
// pose's position columns and zeros elsewhere (no attitude sensitivity
// under the right-invariant error). Empty on degenerate depth.
std::optional<FeatureJacobian> feature_jacobians(const RobotState& state,
                                                 int clone_index,
                                                 const Vec3& feat_est,
                                                 const CameraExtrinsics& cam);

struct TriangulationView {
  Mat3 R;   // IMU -> global
  Vec3 p;   // IMU position
  Vec2 z;   // normalized observation
};

// Gauss-Newton on the reprojection error, seeded by a linear multi-view
// intersection. Requires >= 2 views with baseline > 0.05 m; empty when the
// geometry is degenerate, the iteration diverges, or any final depth is
// non-positive.
std::optional<Vec3> triangulate(const std::vector<TriangulationView>& views,
                                const CameraExtrinsics& cam);

}  // namespace viro
