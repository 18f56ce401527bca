#pragma once

#include "viro/sensing.hpp"

namespace viro {

// Reduced per-robot analysis configuration: one anchor and one feature
// appended as state columns, error blocks (theta, v, p, u, f, bg, ba) of
// 21 states per robot. The team matrix stays block-diagonal per robot.
struct AnalysisPose {
  Mat3 R = Mat3::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  Vec3 a = Vec3::Zero();  // world-frame acceleration (vector-error fixture)
};

enum class JacobianStyle {
  kRightInvariant,  // the filter's own error convention
  kVectorError,     // control fixture: plain translation errors
};

struct ObservabilityMatrix {
  MatX O;            // stacked H_k * Phi_{k|0}
  int n_robots = 0;
  int per_robot_dim = 21;
  int rows_per_epoch = 3;  // 2 camera + 1 range per robot
};

struct NullBasis {
  MatX N;  // 21*n x 4: gravity column + three translation columns
};

// The printed pattern: g in the rotation slot of the first column, I3 in
// the position/anchor/feature slots of the translation columns.
NullBasis lemma_null_basis(int n_robots);

// O = [H_0; H_1 Phi_{1|0}; ...] with per-robot camera and range rows,
// Phi chained per epoch from the continuous-time Jacobian at the sampled
// state. trajectory[k][i] is robot i's pose at epoch k; the anchor and
// feature positions are fixed per robot.
ObservabilityMatrix build_observability(
    const std::vector<std::vector<AnalysisPose>>& trajectory,
    const std::vector<Vec3>& anchors, const std::vector<Vec3>& features,
    double dt, const CameraExtrinsics& cam, const TagExtrinsics& tag,
    JacobianStyle style = JacobianStyle::kRightInvariant);

struct NullSpaceReport {
  double residual = 0.0;  // |O N|_F / |O|_F
  int rank = 0;
  int deficiency = 0;                      // whole-team matrix
  std::vector<int> per_robot_deficiency;   // per diagonal block
  std::vector<double> smallest_singular_values;  // up to 10, ascending
};

// Rank via SVD with relative tolerance 1e-8; the residual is measured
// against the supplied basis.
NullSpaceReport check_null_space(const ObservabilityMatrix& O,
                                 const NullBasis& N);

}  // namespace viro
