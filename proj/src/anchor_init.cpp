#include "viro/anchor_init.hpp"

#include <stdexcept>

namespace viro {

namespace {

// Condition number of the normal-equation matrix of the range residuals
// linearized at p_u.
double geometry_condition(const RangeWindow& window, const Vec3& p_u) {
  Mat3 JtJ = Mat3::Zero();
  for (const auto& s : window.samples) {
    const Vec3 q = s.tag_global - p_u;
    const double norm = q.norm();
    if (norm < 1e-9) continue;
    const Vec3 j = -q / norm;
    JtJ += j * j.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(JtJ);
  const double lo = es.eigenvalues()(0);
  return lo <= 0.0 ? std::numeric_limits<double>::infinity()
                   : es.eigenvalues()(2) / lo;
}

}  // namespace

AnchorSolution solve_anchor_position(const RangeWindow& window,
                                     double range_bias,
                                     const std::optional<Vec3>& fallback_iterate) {
  AnchorSolution out;
  if (window.size() < 4) {
    out.degenerate = true;
    return out;
  }

  // Linear seed: subtracting the first squared-range equation from each
  // of the others removes |p_u|^2.
  const Vec3 t0 = window.samples[0].tag_global;
  const double d0 = window.samples[0].range - range_bias;
  MatX A(window.size() - 1, 3);
  VecX b(window.size() - 1);
  for (int k = 1; k < window.size(); ++k) {
    const auto& s = window.samples[static_cast<size_t>(k)];
    const double dk = s.range - range_bias;
    A.row(k - 1) = 2.0 * (s.tag_global - t0).transpose();
    b(k - 1) = s.tag_global.squaredNorm() - t0.squaredNorm() -
               (dk * dk - d0 * d0);
  }
  Vec3 p_u;
  const Eigen::JacobiSVD<MatX> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const bool linear_ok =
      svd.singularValues()(2) > 1e-6 * svd.singularValues()(0);
  if (linear_ok) {
    p_u = svd.solve(b);
  } else if (fallback_iterate) {
    p_u = *fallback_iterate;
  } else {
    out.degenerate = true;
    return out;
  }

  for (int iter = 0; iter < 25; ++iter) {
    Mat3 JtJ = Mat3::Zero();
    Vec3 Jtr = Vec3::Zero();
    for (const auto& s : window.samples) {
      const Vec3 q = s.tag_global - p_u;
      const double norm = q.norm();
      if (norm < 1e-9) continue;
      const Vec3 j = -q / norm;  // d(predicted)/d(p_u)
      const double r = s.range - range_bias - norm;
      JtJ += j * j.transpose();
      Jtr += j * r;
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(JtJ);
    if (es.eigenvalues()(0) <= 1e-6 * es.eigenvalues()(2)) {
      out.degenerate = true;
      return out;
    }
    const Vec3 step = JtJ.ldlt().solve(Jtr);
    p_u += step;
    if (!p_u.allFinite()) return out;  // diverged: reset the window
    if (step.norm() < 1e-8) {
      out.converged = true;
      break;
    }
  }
  if (out.converged && geometry_condition(window, p_u) > 1e6) {
    out.converged = false;
    out.degenerate = true;
  }
  out.position = p_u;
  return out;
}

std::optional<InitResult> init_covariance(
    const RangeWindow& window, const Vec3& anchor_position, double range_bias,
    double sigma_range, const RobotState& state,
    const std::vector<int>& clone_offsets) {
  const int n = window.size();
  if (clone_offsets.size() != static_cast<size_t>(n)) {
    throw std::invalid_argument("init_covariance: offset count mismatch");
  }
  const int dim = state.dim();

  // Stacked sensitivities of the predicted ranges: D_u to the (plain
  // subtraction) anchor error, D_x to the right-invariant pose errors of
  // whatever window poses are still live clones.
  MatX D_u(n, 3);
  MatX D_x = MatX::Zero(n, dim);
  for (int k = 0; k < n; ++k) {
    const auto& s = window.samples[static_cast<size_t>(k)];
    const Vec3 q = s.tag_global - anchor_position;
    const double norm = q.norm();
    if (norm < 1e-9) return std::nullopt;
    const Eigen::RowVector3d unit = q.transpose() / norm;
    D_u.row(k) = -unit;
    const int off = clone_offsets[static_cast<size_t>(k)];
    if (off >= 0) {
      D_x.block<1, 3>(k, off) = -unit * skew(s.tag_global);
      D_x.block<1, 3>(k, off + 3) = unit;
    }
  }

  const Eigen::HouseholderQR<MatX> qr(D_u);
  const MatX Rfac = qr.matrixQR().topRows(3).triangularView<Eigen::Upper>();
  if (std::abs(Rfac(0, 0)) < 1e-9 || std::abs(Rfac(1, 1)) < 1e-9 ||
      std::abs(Rfac(2, 2)) < 1e-9) {
    return std::nullopt;  // rank-deficient geometry
  }
  const MatX Q1 = MatX(qr.householderQ()).leftCols(3);

  // From the optimality of the converged fit:
  //   xi_u = -R1^-1 Q1^T D_x x_pos + R1^-1 Q1^T n.
  const Mat3 R1_inv = Mat3(Rfac).inverse();
  const MatX T = -R1_inv * Q1.transpose() * D_x;  // 3 x dim

  InitResult out;
  out.position = anchor_position;
  out.P_ux = T * state.cov;
  out.P_uu = T * state.cov * T.transpose() +
             sigma_range * sigma_range * R1_inv * R1_inv.transpose();
  out.P_uu = (0.5 * (out.P_uu + out.P_uu.transpose())).eval();
  return out;
}

void augment_anchor(RobotState& state, const InitResult& result,
                    uint32_t anchor_id) {
  if (state.anchor_index(anchor_id) >= 0) {
    throw std::invalid_argument("augment_anchor: duplicate anchor id");
  }
  const int d = state.dim();
  const int at = 9 + 3 * state.num_anchors();  // insertion offset
  if (result.P_ux.cols() != d) {
    throw std::invalid_argument("augment_anchor: cross-covariance dim");
  }

  // Convert the plain anchor error into the invariant convention against
  // the current attitude error: xi_u = p_tilde + skew(p_u) xi_theta.
  const Mat3 pu_skew = skew(result.position);
  const MatX cross = result.P_ux + pu_skew * state.cov.topRows<3>();
  const Mat3 mix = pu_skew * result.P_ux.leftCols<3>().transpose();
  Mat3 P_uu = result.P_uu + pu_skew * state.cov.block<3, 3>(0, 0) *
              pu_skew.transpose() + mix + mix.transpose();

  MatX grown = MatX::Zero(d + 3, d + 3);
  grown.topLeftCorner(at, at) = state.cov.topLeftCorner(at, at);
  grown.block(0, at, at, 3) = cross.leftCols(at).transpose();
  grown.block(at, 0, 3, at) = cross.leftCols(at);
  grown.block(at, at, 3, 3) = P_uu;
  if (d > at) {
    grown.block(0, at + 3, at, d - at) = state.cov.block(0, at, at, d - at);
    grown.block(at + 3, 0, d - at, at) = state.cov.block(at, 0, d - at, at);
    grown.block(at, at + 3, 3, d - at) = cross.rightCols(d - at);
    grown.block(at + 3, at, d - at, 3) = cross.rightCols(d - at).transpose();
    grown.bottomRightCorner(d - at, d - at) = state.cov.bottomRightCorner(d - at, d - at);
  }

  const double eigmin =
      Eigen::SelfAdjointEigenSolver<MatX>(grown).eigenvalues().minCoeff();
  if (eigmin < 0.0 && eigmin > -1e-9) {
    grown.block(at, at, 3, 3) += (-eigmin + 1e-15) * Mat3::Identity();
  }

  state.imu.columns.push_back(result.position);
  state.anchor_ids.push_back(anchor_id);
  state.cov = std::move(grown);
  state.symmetrize();
}

}  // namespace viro
