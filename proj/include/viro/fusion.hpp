#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "viro/sensing.hpp"
#include "viro/state.hpp"

namespace viro {

// Stacked linearized system for one common observation across robots.
// Participants are ordered ego first. For anchor systems every block is a
// single row and the residual is the per-robot stack; for projected
// feature systems the residual is a single combined block shared by all
// participants (the null-space projection mixes rows across robots) and
// neighbor Jacobian blocks are not transported -- only their covariance
// products are.
struct StackedSystem {
  std::vector<uint32_t> participants;
  std::vector<MatX> jacobian_blocks;     // per participant; may be empty for neighbors
  std::vector<MatX> neighbor_products;   // H_j P_j H_j^T, one per neighbor
  VecX residual;                         // stacked (n*r) or combined (r)
  MatX noise;                            // covariance matching the residual
};

struct CiWeights {
  std::vector<double> omega;  // positive, sums to 1
};

enum class UpdateStatus { kApplied, kGated, kSkippedSingular, kDeferred };

// Chi-square inverse CDF (used for gating and NEES bands).
double chi_squared_quantile(double probability, double dof);

struct UpdateOptions {
  bool gate = false;             // 95% chi-square gate on the innovation
  double gate_probability = 0.95;
  double max_condition = 1e12;
};

// Standard EKF update under the right-invariant convention: the residual
// is measured-minus-predicted and H is the sensitivity of the prediction
// to the error, so K = P H^T S^-1 and X <- exp(K r) X.
UpdateStatus update_individual(RobotState& state, const VecX& residual,
                               const MatX& H, const MatX& R_meas,
                               const UpdateOptions& opts = {});

// Linearization data exchanged between robots for one common observation.
struct NeighborPacket {
  uint64_t epoch = 0;
  uint32_t robot_id = 0;
  uint8_t kind = 0;  // 0 = anchor, 1 = feature
  uint32_t target_id = 0;
  VecX residual;
  MatX jacobian;  // anchor: 1 x dim H row; feature: (2k) x 3 feature Jacobian
  MatX product;   // H P H^T, symmetric
};

// Bit-exact wire format: u64 payload length, epoch u64, robot_id u32,
// kind u8, target_id u32, residual (u32 count + f64s), jacobian (u32 rows,
// u32 cols, row-major f64s), product (u32 n + lower-triangle f64s).
std::vector<uint8_t> encode_packet(const NeighborPacket& p);
NeighborPacket decode_packet(const std::vector<uint8_t>& bytes);

// Block-diagonal common-anchor system per the stacked range model: ego row
// first, one row per neighbor packet with matching anchor id (others are
// ignored).
StackedSystem build_common_anchor_system(
    const RobotState& ego, int anchor_index, const TagExtrinsics& tag,
    double measured_range, double sigma_range,
    const std::vector<NeighborPacket>& packets);

// One robot's stacked feature rows prior to cross-robot fusion.
struct FeatureBlock {
  VecX residual;  // 2k
  MatX H_x;       // 2k x dim
  MatX H_f;       // 2k x 3
};

// Builds the robot's own stacked rows for a feature track. Returns empty
// if no observation survives the depth check.
std::optional<FeatureBlock> build_feature_block(
    const RobotState& state, const std::vector<std::pair<int, Vec2>>& obs,
    const Vec3& feat_est, const CameraExtrinsics& cam);

// Stacks ego rows with neighbor packets for a common feature and projects
// the system onto the left null space of the stacked feature Jacobian.
// Returns empty (feature deferred) when total rows <= 3.
std::optional<StackedSystem> build_common_feature_system(
    const RobotState& ego, const FeatureBlock& ego_block, double sigma_cam,
    const std::vector<NeighborPacket>& packets);

// Covariance-intersection EKF update (ego-inclusive innovation sum):
//   S = sum_j (1/w_j) H_j Pbar_j H_j^T + Q
//   eps = (1/w_i) Pbar H_i^T S^-1 zbar
//   P   = (1/w_i) Pbar - (1/w_i^2) Pbar H_i^T S^-1 H_i Pbar
// With one participant and w = 1 this is exactly update_individual.
UpdateStatus ci_update(RobotState& state, const StackedSystem& system,
                       const CiWeights& weights,
                       const UpdateOptions& opts = {});

enum class WeightMode { kEqual, kTraceMin };

// Equal weights, or weights minimizing trace of the ego posterior over the
// simplex (never worse than equal: the equal point is kept as a fallback).
CiWeights choose_weights(const RobotState& ego, const StackedSystem& system,
                         WeightMode mode);

}  // namespace viro
