#pragma once

#include <Eigen/Dense>
#include <vector>

namespace viro {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Cross-product matrix so that skew(a)*b = a x b.
Mat3 skew(const Vec3& v);
Vec3 unskew(const Mat3& m);

// Rodrigues exponential; switches to a second-order series below 1e-8 rad.
Mat3 so3_exp(const Vec3& phi);

// Principal logarithm, |result| <= pi. Throws std::invalid_argument if R is
// not orthonormal with unit determinant (1e-9 tolerance).
Vec3 so3_log(const Mat3& R);

// Left Jacobian of SO(3) and its inverse (series expansion near zero).
Mat3 so3_left_jacobian(const Vec3& phi);
Mat3 so3_left_jacobian_inv(const Vec3& phi);

bool is_rotation(const Mat3& R, double tol = 1e-9);

// Element of SE_K(3): one rotation block plus K translational columns.
// As a matrix: [R  t_1 ... t_K; 0  I_K]. Column order for IMU states is
// fixed as (v, p, p_u1, ..., p_uL); clones carry a single column (p).
struct ExtendedPose {
  Mat3 rotation = Mat3::Identity();
  std::vector<Vec3> columns;  // K >= 1

  ExtendedPose() = default;
  ExtendedPose(const Mat3& R, std::vector<Vec3> cols)
      : rotation(R), columns(std::move(cols)) {}

  static ExtendedPose Identity(int k);

  int k() const { return static_cast<int>(columns.size()); }
  // Twist / adjoint dimension: 3*(K+1).
  int dof() const { return 3 * (k() + 1); }

  MatX as_matrix() const;  // (3+K) x (3+K)
};

// Lie algebra element as a matrix: [skew(theta)  t_1 ... t_K; 0  0].
MatX sek3_wedge(const VecX& xi);
VecX sek3_vee(const MatX& m);

// Group exponential: exp(theta) for the rotation, J_l(theta)*t_j per column.
ExtendedPose sek3_exp(const VecX& xi);
VecX sek3_log(const ExtendedPose& X);

ExtendedPose sek3_compose(const ExtendedPose& A, const ExtendedPose& B);
ExtendedPose sek3_inverse(const ExtendedPose& A);

// Block-lower-triangular adjoint: diagonal blocks R, first block column
// skew(t_j)*R. Rows/cols ordered (theta, t_1, ..., t_K).
MatX adjoint(const ExtendedPose& X);

}  // namespace viro
