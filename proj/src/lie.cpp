#include "viro/lie.hpp"

#include <cmath>
#include <stdexcept>

namespace viro {

namespace {
constexpr double kSmallAngle = 1e-8;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Vec3 unskew(const Mat3& m) {
  return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

Mat3 so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 w = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + w + 0.5 * w * w;
  }
  const double s = std::sin(theta) / theta;
  const double c = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + s * w + c * w * w;
}

bool is_rotation(const Mat3& R, double tol) {
  return (R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
         std::abs(R.determinant() - 1.0) < tol;
}

Vec3 so3_log(const Mat3& R) {
  if (!is_rotation(R, 1e-7)) {
    throw std::invalid_argument("so3_log: input is not a rotation matrix");
  }
  const double cos_theta = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const Vec3 axis_raw = unskew(R - R.transpose());  // = 2 sin(theta) * n

  if (theta < 1e-6) {
    // log(R) ~ 0.5*(R - R^T)^vee * (1 + theta^2/6)
    return 0.5 * (1.0 + theta * theta / 6.0) * axis_raw;
  }
  if (M_PI - theta > 1e-6) {
    return (0.5 * theta / std::sin(theta)) * axis_raw;
  }
  // Near pi: extract the axis from the symmetric part,
  // n n^T = (R + R^T - (2 cos(theta)) I) / (2 - 2 cos(theta)).
  const Mat3 nnT = (R + R.transpose() - 2.0 * cos_theta * Mat3::Identity()) /
                   (2.0 - 2.0 * cos_theta);
  int i = 0;
  nnT.diagonal().maxCoeff(&i);
  Vec3 n = nnT.col(i) / std::sqrt(nnT(i, i));
  // Fix the sign with the antisymmetric part while it still carries one.
  if (n.dot(axis_raw) < 0) n = -n;
  return theta * n;
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 w = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + 0.5 * w + w * w / 6.0;
  }
  const double t2 = theta * theta;
  const double a = (1.0 - std::cos(theta)) / t2;
  const double b = (theta - std::sin(theta)) / (t2 * theta);
  return Mat3::Identity() + a * w + b * w * w;
}

Mat3 so3_left_jacobian_inv(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 w = skew(phi);
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    const double c = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
    return Mat3::Identity() - 0.5 * w + c * w * w;
  }
  const double half = 0.5 * theta;
  const double c =
      (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
  return Mat3::Identity() - 0.5 * w + c * w * w;
}

ExtendedPose ExtendedPose::Identity(int k) {
  ExtendedPose out;
  out.columns.assign(static_cast<size_t>(k), Vec3::Zero());
  return out;
}

MatX ExtendedPose::as_matrix() const {
  const int n = 3 + k();
  MatX m = MatX::Identity(n, n);
  m.topLeftCorner<3, 3>() = rotation;
  for (int j = 0; j < k(); ++j) m.block<3, 1>(0, 3 + j) = columns[j];
  return m;
}

MatX sek3_wedge(const VecX& xi) {
  if (xi.size() % 3 != 0 || xi.size() < 6) {
    throw std::invalid_argument("sek3_wedge: twist length must be 3*(K+1)");
  }
  const int k = static_cast<int>(xi.size() / 3) - 1;
  MatX m = MatX::Zero(3 + k, 3 + k);
  m.topLeftCorner<3, 3>() = skew(xi.head<3>());
  for (int j = 0; j < k; ++j) m.block<3, 1>(0, 3 + j) = xi.segment<3>(3 + 3 * j);
  return m;
}

VecX sek3_vee(const MatX& m) {
  const int k = static_cast<int>(m.rows()) - 3;
  VecX xi(3 * (k + 1));
  xi.head<3>() = unskew(m.topLeftCorner<3, 3>());
  for (int j = 0; j < k; ++j) xi.segment<3>(3 + 3 * j) = m.block<3, 1>(0, 3 + j);
  return xi;
}

ExtendedPose sek3_exp(const VecX& xi) {
  if (xi.size() % 3 != 0 || xi.size() < 6) {
    throw std::invalid_argument("sek3_exp: twist length must be 3*(K+1)");
  }
  const int k = static_cast<int>(xi.size() / 3) - 1;
  const Vec3 theta = xi.head<3>();
  const Mat3 jl = so3_left_jacobian(theta);
  ExtendedPose out;
  out.rotation = so3_exp(theta);
  out.columns.reserve(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) out.columns.push_back(jl * xi.segment<3>(3 + 3 * j));
  return out;
}

VecX sek3_log(const ExtendedPose& X) {
  const Vec3 theta = so3_log(X.rotation);
  const Mat3 jl_inv = so3_left_jacobian_inv(theta);
  VecX xi(X.dof());
  xi.head<3>() = theta;
  for (int j = 0; j < X.k(); ++j) xi.segment<3>(3 + 3 * j) = jl_inv * X.columns[j];
  return xi;
}

ExtendedPose sek3_compose(const ExtendedPose& A, const ExtendedPose& B) {
  if (A.k() != B.k()) {
    throw std::invalid_argument("sek3_compose: column count mismatch");
  }
  ExtendedPose out;
  out.rotation = A.rotation * B.rotation;
  out.columns.reserve(A.columns.size());
  for (int j = 0; j < A.k(); ++j) {
    out.columns.push_back(A.rotation * B.columns[j] + A.columns[j]);
  }
  return out;
}

ExtendedPose sek3_inverse(const ExtendedPose& A) {
  ExtendedPose out;
  out.rotation = A.rotation.transpose();
  out.columns.reserve(A.columns.size());
  for (const Vec3& t : A.columns) out.columns.push_back(-(out.rotation * t));
  return out;
}

MatX adjoint(const ExtendedPose& X) {
  const int n = X.dof();
  MatX ad = MatX::Zero(n, n);
  ad.topLeftCorner<3, 3>() = X.rotation;
  for (int j = 0; j < X.k(); ++j) {
    ad.block<3, 3>(3 + 3 * j, 3 + 3 * j) = X.rotation;
    ad.block<3, 3>(3 + 3 * j, 0) = skew(X.columns[j]) * X.rotation;
  }
  return ad;
}

}  // namespace viro
