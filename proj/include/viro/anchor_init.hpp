#pragma once

#include <optional>

#include "viro/state.hpp"

namespace viro {

struct RangeSample {
  Mat3 rotation = Mat3::Identity();   // IMU -> global at t
  Vec3 position = Vec3::Zero();       // IMU position at t
  Vec3 tag_global = Vec3::Zero();     // UWB tag in the global frame
  double range = 0.0;                 // measured z_u
  double t = 0.0;
};

struct RangeWindow {
  std::vector<RangeSample> samples;
  int size() const { return static_cast<int>(samples.size()); }
};

struct AnchorSolution {
  Vec3 position = Vec3::Zero();
  bool converged = false;
  bool degenerate = false;  // collinear tags: keep buffering
};

// Gauss-Newton on sum (z - b - |tag_k - p_u|)^2, seeded by linear
// trilateration-by-differencing (fallback_iterate used when the linear
// seed is unavailable). Degenerate when the linearized system has
// condition number above 1e6; diverged when 25 iterations don't reach a
// 1e-8 step.
AnchorSolution solve_anchor_position(
    const RangeWindow& window, double range_bias,
    const std::optional<Vec3>& fallback_iterate = std::nullopt);

struct InitResult {
  Vec3 position = Vec3::Zero();
  Mat3 P_uu = Mat3::Zero();  // pre-augmentation (plain-subtraction) error
  MatX P_ux;                 // 3 x live error dim, same convention
};

// Covariance of the initialized anchor via the QR split of the stacked
// linearized range system. clone_offsets[k] maps window sample k to the
// live clone error block holding that pose (negative when the pose has
// left the window; such samples contribute no pose uncertainty).
std::optional<InitResult> init_covariance(
    const RangeWindow& window, const Vec3& anchor_position, double range_bias,
    double sigma_range, const RobotState& state,
    const std::vector<int>& clone_offsets);

// Appends the anchor column, grows the covariance by the (3 x 3) block and
// its cross terms, and converts the plain anchor error into the invariant
// convention (xi_u = p_tilde + skew(p_u) * xi_theta) against the current
// attitude error. Throws on duplicate ids. Existing entries are untouched;
// a tiny negative joint eigenvalue (> -1e-9) is absorbed by inflating the
// new diagonal block.
void augment_anchor(RobotState& state, const InitResult& result,
                    uint32_t anchor_id);

}  // namespace viro
