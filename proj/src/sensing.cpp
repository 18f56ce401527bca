#include "viro/sensing.hpp"

#include <stdexcept>

namespace viro {

namespace {
constexpr double kMinDepth = 1e-6;
constexpr double kMinBaseline = 0.05;

Eigen::Matrix<double, 2, 3> projection_jacobian(const Vec3& p_cam) {
  Eigen::Matrix<double, 2, 3> H_pc;
  const double iz = 1.0 / p_cam.z();
  H_pc << iz, 0, -p_cam.x() * iz * iz, 0, iz, -p_cam.y() * iz * iz;
  return H_pc;
}
}  // namespace

std::optional<Vec2> project(const Vec3& p_cam) {
  if (p_cam.z() <= kMinDepth) return std::nullopt;
  return Vec2(p_cam.x() / p_cam.z(), p_cam.y() / p_cam.z());
}

Vec3 to_camera_frame(const Mat3& R, const Vec3& p, const Vec3& p_feat,
                     const CameraExtrinsics& cam) {
  return cam.R_CI * R.transpose() * (p_feat - p) + cam.p_CI;
}

double predict_range(const RobotState& state, int anchor_index,
                     const TagExtrinsics& tag) {
  if (anchor_index < 0 || anchor_index >= state.num_anchors()) {
    throw std::out_of_range("predict_range: anchor index");
  }
  const Vec3 tag_global = state.position() + state.rotation() * tag.p_tag;
  return (tag_global - state.anchor_position(anchor_index)).norm() + tag.bias;
}

std::optional<Eigen::RowVectorXd> range_jacobian(const RobotState& state,
                                                 int anchor_index,
                                                 const TagExtrinsics& tag) {
  if (anchor_index < 0 || anchor_index >= state.num_anchors()) {
    throw std::out_of_range("range_jacobian: anchor index");
  }
  const Vec3 offset = state.rotation() * tag.p_tag;
  const Vec3 q = state.position() + offset - state.anchor_position(anchor_index);
  const double range = q.norm();
  if (range <= kMinDepth) return std::nullopt;

  const Eigen::RowVector3d H_pu = q.transpose() / range;
  const Mat3 Lambda = skew(-q);

  Eigen::RowVectorXd H = Eigen::RowVectorXd::Zero(state.dim());
  H.segment<3>(0) = H_pu * Lambda;
  H.segment<3>(6) = H_pu;
  H.segment<3>(state.anchor_error_offset(anchor_index)) = -H_pu;
  return H;
}

std::optional<FeatureJacobian> feature_jacobians(const RobotState& state,
                                                 int clone_index,
                                                 const Vec3& feat_est,
                                                 const CameraExtrinsics& cam) {
  Mat3 R;
  Vec3 p;
  int p_offset;
  if (clone_index < 0) {
    R = state.rotation();
    p = state.position();
    p_offset = 6;
  } else {
    if (clone_index >= state.num_clones()) {
      throw std::out_of_range("feature_jacobians: clone index");
    }
    const Clone& cl = state.clones[static_cast<size_t>(clone_index)];
    R = cl.rotation;
    p = cl.position;
    p_offset = state.clone_error_offset(clone_index) + 3;
  }

  const Vec3 p_cam = to_camera_frame(R, p, feat_est, cam);
  if (p_cam.z() <= kMinDepth) return std::nullopt;

  FeatureJacobian out;
  out.H_f = projection_jacobian(p_cam) * cam.R_CI * R.transpose();
  out.H_x = MatX::Zero(2, state.dim());
  out.H_x.block<2, 3>(0, p_offset) = -out.H_f;
  out.predicted = Vec2(p_cam.x() / p_cam.z(), p_cam.y() / p_cam.z());
  return out;
}

std::optional<Vec3> triangulate(const std::vector<TriangulationView>& views,
                                const CameraExtrinsics& cam) {
  if (views.size() < 2) return std::nullopt;

  // Camera centers and global-frame rays.
  std::vector<Vec3> centers, rays;
  centers.reserve(views.size());
  rays.reserve(views.size());
  for (const auto& v : views) {
    const Mat3 R_GC = v.R * cam.R_CI.transpose();
    centers.push_back(v.p - R_GC * cam.p_CI);
    rays.push_back((R_GC * Vec3(v.z.x(), v.z.y(), 1.0)).normalized());
  }

  double baseline = 0.0;
  for (size_t i = 0; i < centers.size(); ++i) {
    for (size_t j = i + 1; j < centers.size(); ++j) {
      baseline = std::max(baseline, (centers[i] - centers[j]).norm());
    }
  }
  if (baseline < kMinBaseline) return std::nullopt;

  // Linear midpoint intersection: sum (I - d d^T)(p - c) = 0.
  Mat3 A = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (size_t i = 0; i < centers.size(); ++i) {
    const Mat3 w = Mat3::Identity() - rays[i] * rays[i].transpose();
    A += w;
    b += w * centers[i];
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(A);
  if (es.eigenvalues()(0) < 1e-8 * es.eigenvalues()(2)) {
    return std::nullopt;  // near-parallel rays
  }
  Vec3 p_f = A.ldlt().solve(b);

  // Gauss-Newton refinement of the reprojection error.
  bool converged = false;
  for (int iter = 0; iter < 10; ++iter) {
    Mat3 JtJ = Mat3::Zero();
    Vec3 Jtr = Vec3::Zero();
    for (const auto& v : views) {
      const Vec3 p_cam = to_camera_frame(v.R, v.p, p_f, cam);
      if (p_cam.z() <= kMinDepth) return std::nullopt;
      const Vec2 r = v.z - Vec2(p_cam.x() / p_cam.z(), p_cam.y() / p_cam.z());
      const Eigen::Matrix<double, 2, 3> J =
          projection_jacobian(p_cam) * cam.R_CI * v.R.transpose();
      JtJ += J.transpose() * J;
      Jtr += J.transpose() * r;
    }
    const Vec3 step = JtJ.ldlt().solve(Jtr);
    p_f += step;
    if (!p_f.allFinite()) return std::nullopt;
    if (step.norm() < 1e-10) {
      converged = true;
      break;
    }
  }
  if (!converged) return std::nullopt;
  for (const auto& v : views) {
    if (to_camera_frame(v.R, v.p, p_f, cam).z() <= kMinDepth) {
      return std::nullopt;
    }
  }
  return p_f;
}

}  // namespace viro
