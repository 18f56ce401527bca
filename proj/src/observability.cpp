#include "viro/observability.hpp"

#include <stdexcept>

#include "viro/propagation.hpp"

namespace viro {

namespace {

constexpr int kDim = 21;  // (theta, v, p, u, f, bg, ba)

// Continuous-time error Jacobian of the reduced configuration. The anchor
// and feature rows mirror each other: both are static columns of the
// extended pose.
MatX analysis_F(const AnalysisPose& x, const Vec3& anchor, const Vec3& feat,
                JacobianStyle style) {
  MatX F = MatX::Zero(kDim, kDim);
  F.block<3, 3>(6, 3) = Mat3::Identity();  // pdot = v
  F.block<3, 3>(0, 15) = -x.R;             // gyro bias into attitude
  F.block<3, 3>(3, 18) = -x.R;             // accel bias into velocity
  if (style == JacobianStyle::kRightInvariant) {
    F.block<3, 3>(3, 0) = skew(gravity());
    F.block<3, 3>(3, 15) = -skew(x.v) * x.R;
    F.block<3, 3>(6, 15) = -skew(x.p) * x.R;
    F.block<3, 3>(9, 15) = -skew(anchor) * x.R;
    F.block<3, 3>(12, 15) = -skew(feat) * x.R;
  } else {
    // Vector (plain translation) errors: the velocity row couples to the
    // attitude through the specific force instead of gravity.
    F.block<3, 3>(3, 0) = -skew(x.a - gravity());
  }
  return F;
}

void camera_rows(const AnalysisPose& x, const Vec3& feat,
                 const CameraExtrinsics& cam, JacobianStyle style,
                 MatX& H_out) {
  const Vec3 p_cam = to_camera_frame(x.R, x.p, feat, cam);
  Eigen::Matrix<double, 2, 3> H_pc;
  const double iz = 1.0 / p_cam.z();
  H_pc << iz, 0, -p_cam.x() * iz * iz, 0, iz, -p_cam.y() * iz * iz;
  const Eigen::Matrix<double, 2, 3> A = H_pc * cam.R_CI * x.R.transpose();
  H_out.setZero(2, kDim);
  H_out.block<2, 3>(0, 6) = -A;
  H_out.block<2, 3>(0, 12) = A;
  if (style == JacobianStyle::kVectorError) {
    H_out.block<2, 3>(0, 0) = A * skew(feat - x.p);
  }
}

void range_row(const AnalysisPose& x, const Vec3& anchor,
               const TagExtrinsics& tag, JacobianStyle style, MatX& H_out) {
  const Vec3 q = x.p + x.R * tag.p_tag - anchor;
  const double norm = q.norm();
  const Eigen::RowVector3d H_pu = q.transpose() / norm;
  H_out.setZero(1, kDim);
  H_out.block<1, 3>(0, 6) = H_pu;
  H_out.block<1, 3>(0, 9) = -H_pu;
  if (style == JacobianStyle::kRightInvariant) {
    H_out.block<1, 3>(0, 0) = H_pu * skew(-q);
  } else {
    H_out.block<1, 3>(0, 0) = H_pu * (-skew(x.R * tag.p_tag));
  }
}

}  // namespace

NullBasis lemma_null_basis(int n_robots) {
  NullBasis basis;
  basis.N = MatX::Zero(kDim * n_robots, 4);
  for (int i = 0; i < n_robots; ++i) {
    const int off = kDim * i;
    basis.N.block<3, 1>(off + 0, 0) = gravity();
    basis.N.block<3, 3>(off + 6, 1) = Mat3::Identity();
    basis.N.block<3, 3>(off + 9, 1) = Mat3::Identity();
    basis.N.block<3, 3>(off + 12, 1) = Mat3::Identity();
  }
  return basis;
}

ObservabilityMatrix build_observability(
    const std::vector<std::vector<AnalysisPose>>& trajectory,
    const std::vector<Vec3>& anchors, const std::vector<Vec3>& features,
    double dt, const CameraExtrinsics& cam, const TagExtrinsics& tag,
    JacobianStyle style) {
  if (trajectory.empty()) throw std::invalid_argument("empty trajectory");
  const int n = static_cast<int>(trajectory.front().size());
  const int epochs = static_cast<int>(trajectory.size());

  ObservabilityMatrix out;
  out.n_robots = n;
  out.O = MatX::Zero(3 * n * epochs, kDim * n);

  std::vector<MatX> phi_acc(static_cast<size_t>(n),
                            MatX::Identity(kDim, kDim));
  MatX Hc(2, kDim), Hu(1, kDim);
  for (int k = 0; k < epochs; ++k) {
    for (int i = 0; i < n; ++i) {
      const auto& pose = trajectory[static_cast<size_t>(k)][static_cast<size_t>(i)];
      const auto& anchor = anchors[static_cast<size_t>(i)];
      const auto& feat = features[static_cast<size_t>(i)];
      camera_rows(pose, feat, cam, style, Hc);
      range_row(pose, anchor, tag, style, Hu);
      const int row = 3 * (n * k + i);
      const int col = kDim * i;
      out.O.block(row, col, 2, kDim) = Hc * phi_acc[static_cast<size_t>(i)];
      out.O.block(row + 2, col, 1, kDim) = Hu * phi_acc[static_cast<size_t>(i)];
    }
    if (k + 1 < epochs) {
      for (int i = 0; i < n; ++i) {
        const MatX F = analysis_F(trajectory[static_cast<size_t>(k)][static_cast<size_t>(i)],
                                  anchors[static_cast<size_t>(i)],
                                  features[static_cast<size_t>(i)], style);
        phi_acc[static_cast<size_t>(i)] =
            (transition_matrix(F, dt) * phi_acc[static_cast<size_t>(i)]).eval();
      }
    }
  }
  return out;
}

NullSpaceReport check_null_space(const ObservabilityMatrix& O,
                                 const NullBasis& N) {
  NullSpaceReport report;
  report.residual = (O.O * N.N).norm() / O.O.norm();

  const auto rank_of = [](const MatX& m) {
    Eigen::JacobiSVD<MatX> svd(m);
    const VecX sv = svd.singularValues();
    const double tol = 1e-8 * sv.maxCoeff();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i) rank += sv(i) > tol ? 1 : 0;
    return std::pair<int, VecX>(rank, sv);
  };

  const auto [rank, sv] = rank_of(O.O);
  report.rank = rank;
  report.deficiency = static_cast<int>(O.O.cols()) - rank;
  const int tail = std::min<int>(10, static_cast<int>(sv.size()));
  for (int i = tail; i >= 1; --i) {
    report.smallest_singular_values.push_back(sv(sv.size() - i));
  }

  for (int i = 0; i < O.n_robots; ++i) {
    const auto [block_rank, block_sv] =
        rank_of(O.O.middleCols(O.per_robot_dim * i, O.per_robot_dim));
    (void)block_sv;
    report.per_robot_deficiency.push_back(O.per_robot_dim - block_rank);
  }
  return report;
}

}  // namespace viro
